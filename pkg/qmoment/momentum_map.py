"""
The momentum map of local unitary groups and what is read off from it.

Blocks are stored Hermitian, m_k = rho_k - I/N_k, and |mu|^2 = (1/4) sum_k Tr(m_k^2).
For L qubits the mean one-qubit linear entropy is then 1/2 - (4/L)|mu|^2.
"""
from typing import List, Optional, Sequence, Union

import numpy as np

from qmoment.config import Tolerances, settings
from qmoment.errors import OutsidePolytopeError, StateValidationError
from qmoment.models import (
    DensityMatrix, LocalOperator, MomentumPoint, PolytopeMembership, PureState, ReducedSpaceCase,
    ReducedSpaceReport, SpectraPoint,
)
from qmoment.numkit import eigh_desc, hermitian_basis
from qmoment.tensor_state import act_on_slot, partial_trace_density, reduced_blocks


def _shift(rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    rho = rho / np.trace(rho).real
    return rho - np.eye(n) / n


def momentum(state: PureState) -> MomentumPoint:
    return MomentumPoint(blocks=[_shift(rho) for rho in reduced_blocks(state)])


def momentum_mixed(rho: DensityMatrix) -> MomentumPoint:
    """Momentum map on the isospectral orbit of a mixed state."""
    return MomentumPoint(blocks=[_shift(partial_trace_density(rho, k).matrix) for k in range(len(rho.dims))])


def norm_mu_squared(state: PureState) -> float:
    return 0.25 * sum(float(np.real(np.trace(m @ m))) for m in momentum(state).blocks)


def mean_linear_entropy(state: PureState) -> float:
    blocks = reduced_blocks(state)
    return float(np.mean([1.0 - np.real(np.trace(rho @ rho)) for rho in blocks]))


def mu_action(state: PureState, point: Optional[MomentumPoint] = None) -> np.ndarray:
    """
    A v with A = sum_k m_k acting on slot k (averaged over slots for identical particles).

    Tangent part of A v is the gradient of |mu|^2 at v.
    """
    point = point or momentum(state)
    tensor = state.tensor
    out = np.zeros_like(tensor)
    if state.sector.indistinguishable:
        for k in range(state.n_slots):
            out += act_on_slot(tensor, point.blocks[0], k)
        out /= state.n_slots
    else:
        for k, m in enumerate(point.blocks):
            out += act_on_slot(tensor, m, k)
    return out.reshape(-1)


def spectra(point: MomentumPoint) -> SpectraPoint:
    return SpectraPoint(lambdas=[eigh_desc(m)[0].tolist() for m in point.blocks])


def psi(state: PureState) -> SpectraPoint:
    """Sorted shifted spectra: the image of the state's orbit in the positive Weyl chamber."""
    return spectra(momentum(state))


# ============================== Kirwan polytope (qubits) ==============================

LambdaLike = Union[SpectraPoint, Sequence[float]]


def _qubit_lambdas(lam: LambdaLike, n_qubits: int) -> np.ndarray:
    values = np.asarray(lam.qubit_lambdas if isinstance(lam, SpectraPoint) else lam, dtype=float)
    if n_qubits < 2 or values.shape != (n_qubits,):
        raise StateValidationError(f"need one lambda per qubit for L={n_qubits} (L >= 2), got {values.shape}")
    return values


def kirwan_inequalities(lam: LambdaLike, n_qubits: int) -> List[float]:
    """
    Slack of every defining inequality; negative means violated.

    Order: lambda_l >= 0 for each l, then 1/2 - lambda_l >= 0, then the polygonal
    inequality sum_{j != l}(1/2 - lambda_j) - (1/2 - lambda_l) >= 0.
    """
    x = _qubit_lambdas(lam, n_qubits)
    gaps = 0.5 - x
    polygon = gaps.sum() - 2 * gaps
    return [*x.tolist(), *gaps.tolist(), *polygon.tolist()]


def kirwan_contains(lam: LambdaLike, n_qubits: int, tol: Optional[Tolerances] = None) -> PolytopeMembership:
    band = (tol or settings.TOLERANCES).boundary_tol
    slack = np.asarray(kirwan_inequalities(lam, n_qubits))
    if np.any(slack < -band):
        return PolytopeMembership.outside
    if np.any(np.abs(slack) <= band):
        return PolytopeMembership.boundary
    return PolytopeMembership.inside


def dim_interior(n_qubits: int) -> int:
    return 2 ** (n_qubits + 1) - 4 * n_qubits - 2


def dim_case_i(n_qubits: int, k: int) -> int:
    """k coordinates at 1/2 (those qubits are pure)."""
    return 2 ** (n_qubits - k + 1) - 4 * (n_qubits - k) - 2


def dim_case_iii(n_qubits: int, k: int) -> int:
    """k coordinates at 0 (those qubits are maximally mixed)."""
    return 2 ** (n_qubits + 1) - 4 * n_qubits - 2 * k - 2


def reduced_space_dim(lam: LambdaLike, n_qubits: int, tol: Optional[Tolerances] = None) -> ReducedSpaceReport:
    """
    Dimension of the reduced space over lambda.

    Boundary cases are checked in the order polygonal equality, saturated 1/2 coordinates,
    zero coordinates. Formula values below zero are reported as 0.

    Raises:
        OutsidePolytopeError: lambda is outside the Kirwan polytope
    """
    band = (tol or settings.TOLERANCES).boundary_tol
    if kirwan_contains(lam, n_qubits, tol) == PolytopeMembership.outside:
        raise OutsidePolytopeError(f"lambda {list(_qubit_lambdas(lam, n_qubits))} is outside the Kirwan polytope")
    x = _qubit_lambdas(lam, n_qubits)
    polygon = np.asarray(kirwan_inequalities(x, n_qubits)[2 * n_qubits:])
    pure = int(np.sum(np.abs(x - 0.5) <= band))
    mixed = int(np.sum(np.abs(x) <= band))
    # the fully separable corner is a polygon equality too; cases (i) and (ii) both give 0 there
    if np.any(np.abs(polygon) <= band):
        return ReducedSpaceReport(case=ReducedSpaceCase.boundary_ii, dim=0)
    if pure:
        return ReducedSpaceReport(case=ReducedSpaceCase.boundary_i, k=pure, dim=max(dim_case_i(n_qubits, pure), 0))
    if mixed:
        return ReducedSpaceReport(
            case=ReducedSpaceCase.boundary_iii, k=mixed, dim=max(dim_case_iii(n_qubits, mixed), 0)
        )
    return ReducedSpaceReport(case=ReducedSpaceCase.interior, dim=max(dim_interior(n_qubits), 0))


# ============================== symplectic structure ==============================


def _anti_hermitian_factors(xi: LocalOperator, state: PureState) -> List[np.ndarray]:
    factors = list(xi.factors)
    if state.sector.indistinguishable and len(factors) == 1:
        factors = factors * state.n_slots
    if tuple(f.shape[0] for f in factors) != state.sector.local_dims:
        raise StateValidationError(f"algebra element dims {xi.dims} do not match {state.sector.local_dims}")
    for f in factors:
        if np.max(np.abs(f + f.conj().T)) > 1e-9:
            raise StateValidationError("algebra elements must be anti-Hermitian")
    return factors


def kks_form_pure(state: PureState, xi1: LocalOperator, xi2: LocalOperator) -> float:
    """
    -i <v|[xi1, xi2] v> / (2 <v|v>) for xi = sum_k xi_k acting on slot k.

    Factors on different slots commute, so the commutator is slot-wise.
    """
    a = _anti_hermitian_factors(xi1, state)
    b = _anti_hermitian_factors(xi2, state)
    tensor = state.tensor
    acted = np.zeros_like(tensor)
    for k, (x, y) in enumerate(zip(a, b)):
        acted += act_on_slot(tensor, x @ y - y @ x, k)
    value = -1j * np.vdot(tensor.reshape(-1), acted.reshape(-1)) / (2 * np.vdot(state.amplitudes, state.amplitudes))
    return float(np.real(value))


# ============================== variance ==============================


def total_variance(state: PureState) -> float:
    """Sum of variances of an orthonormal basis of local traceless Hermitian generators."""
    total = 0.0
    for rho in reduced_blocks(state):
        for x in hermitian_basis(rho.shape[0]):
            mean = np.real(np.trace(rho @ x))
            total += np.real(np.trace(rho @ x @ x)) - mean ** 2
    return float(total)


def variance_constant(state: PureState) -> float:
    """The state-independent value of total_variance + 4|mu|^2 for the state's sector."""
    return float(sum((n * n - 1) / n for n in state.sector.local_dims[: state.sector.n_blocks]))
