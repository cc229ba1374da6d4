"""
Pure and mixed states with tensor structure.

Flattening convention (the wire convention): row-major over the local slots, slot 0 is the
most significant index, so basis state |b_0 b_1 ... b_{L-1}> sits at index
sum_k b_k * prod(N_{k+1} ... N_{L-1}). Identical particles are stored as the embedded
d^L tensor with the appropriate exchange symmetry.
"""
import itertools
import json
from math import factorial, prod, sqrt
from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from qmoment.config import Tolerances, settings
from qmoment.errors import AnnihilationError, SectorMismatchError, StateValidationError
from qmoment.models import (
    DensityFile, DensityMatrix, LocalOperator, PureState, SectorKind, SectorSpec, StateFile,
    pairs_to_complex,
)


def _tol(tol: Optional[Tolerances]) -> Tolerances:
    return tol if tol is not None else settings.TOLERANCES


def _permutation_sign(perm: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def exchange_project(tensor: np.ndarray, kind: SectorKind) -> np.ndarray:
    """Project an L-slot tensor onto its symmetric (bosons) or antisymmetric (fermions) part."""
    n = tensor.ndim
    out = np.zeros_like(tensor)
    for perm in itertools.permutations(range(n)):
        term = np.transpose(tensor, perm)
        if kind == SectorKind.fermionic:
            term = _permutation_sign(perm) * term
        out = out + term
    return out / factorial(n)


def _occupation_basis(sector: SectorSpec) -> List[tuple]:
    d, n = sector.dims
    if sector.kind == SectorKind.fermionic:
        return list(itertools.combinations(range(d), n))
    return list(itertools.combinations_with_replacement(range(d), n))


def _from_occupation(sector: SectorSpec, coeffs: np.ndarray) -> np.ndarray:
    tensor = np.zeros(sector.local_dims, dtype=complex)
    for c, modes in zip(coeffs, _occupation_basis(sector)):
        if c == 0:
            continue
        unit = np.zeros(sector.local_dims, dtype=complex)
        unit[modes] = 1.0
        unit = exchange_project(unit, sector.kind)
        unit /= np.linalg.norm(unit)
        tensor += c * unit
    return tensor.reshape(-1)


def make_state(sector: SectorSpec, amplitudes: Sequence[complex], tol: Optional[Tolerances] = None) -> PureState:
    """
    Build a normalized state.

    For bosons/fermions the amplitudes are either the embedded d^L tensor, which is
    (anti)symmetrized, or coefficients over the occupation basis (sorted mode tuples).

    Raises:
        StateValidationError: wrong length, zero vector, or no (anti)symmetric part
    """
    tol = _tol(tol)
    vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if sector.indistinguishable:
        if vec.size == sector.total_dim and vec.size != sector.embedded_dim:
            vec = _from_occupation(sector, vec)
        elif vec.size == sector.embedded_dim:
            vec = exchange_project(vec.reshape(sector.local_dims), sector.kind).reshape(-1)
        else:
            raise StateValidationError(
                f"expected {sector.embedded_dim} (embedded) or {sector.total_dim} (occupation) amplitudes, got {vec.size}"
            )
    elif vec.size != sector.embedded_dim:
        raise StateValidationError(f"expected {sector.embedded_dim} amplitudes, got {vec.size}")
    if not np.all(np.isfinite(vec)):
        raise StateValidationError("amplitudes must be finite")
    norm = np.linalg.norm(vec)
    if norm <= tol.construct_tol:
        if sector.kind == SectorKind.fermionic:
            raise StateValidationError("input has no antisymmetric component")
        raise StateValidationError("cannot normalize the zero vector")
    return PureState(sector=sector, amplitudes=vec / norm)


def qubits(n: int) -> SectorSpec:
    return SectorSpec(kind=SectorKind.distinguishable, dims=[2] * n)


def basis_state(sector: SectorSpec, digits: Sequence[int]) -> PureState:
    vec = np.zeros(sector.local_dims, dtype=complex)
    vec[tuple(digits)] = 1.0
    return make_state(sector, vec.reshape(-1))


def from_terms(n_qubits: int, terms: dict) -> PureState:
    """Qubit state from {"0110": amplitude, ...}."""
    vec = np.zeros(2 ** n_qubits, dtype=complex)
    for bits, amp in terms.items():
        vec[int(bits, 2)] += amp
    return make_state(qubits(n_qubits), vec)


def _check_slot(state: PureState, k: int) -> None:
    if state.sector.indistinguishable:
        if k != 0:
            raise StateValidationError(f"identical particles have a single reduced matrix, got index {k}")
        return
    if not 0 <= k < state.n_slots:
        raise StateValidationError(f"subsystem index {k} out of range for {state.n_slots} subsystems")


def rdm_array(tensor: np.ndarray, k: int) -> np.ndarray:
    """Partial trace of |v><v| over every slot except k."""
    others = [i for i in range(tensor.ndim) if i != k]
    return np.tensordot(tensor, tensor.conj(), axes=(others, others))


def reduced_density_matrix(state: PureState, k: int) -> DensityMatrix:
    """
    One-particle reduced density matrix of slot k.

    Args:
        state: pure state
        k: subsystem index (0 for bosons/fermions)

    Returns:
        DensityMatrix: trace-one N_k x N_k matrix
    """
    _check_slot(state, k)
    rho = rdm_array(state.tensor, k)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(dims=[state.sector.local_dims[k]], matrix=rho)


def reduced_blocks(state: PureState) -> List[np.ndarray]:
    """All reduced one-particle matrices as raw arrays (one for identical particles)."""
    tensor = state.tensor
    out = []
    for k in range(state.sector.n_blocks):
        rho = rdm_array(tensor, k)
        out.append(0.5 * (rho + rho.conj().T))
    return out


def act_on_slot(tensor: np.ndarray, op: np.ndarray, k: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, tensor, axes=([1], [k])), 0, k)


def _expanded_factors(op: LocalOperator, sector: SectorSpec) -> List[np.ndarray]:
    factors = list(op.factors)
    if sector.indistinguishable and len(factors) == 1:
        factors = factors * sector.n_slots
    if tuple(f.shape[0] for f in factors) != sector.local_dims:
        raise SectorMismatchError(f"operator dims {op.dims} do not match sector dims {sector.local_dims}")
    if sector.indistinguishable and any(np.max(np.abs(f - factors[0])) > 0 for f in factors):
        raise SectorMismatchError("identical particles need the same factor on every slot")
    return factors


def apply_local_array(factors: Sequence[np.ndarray], tensor: np.ndarray) -> np.ndarray:
    out = tensor
    for k, factor in enumerate(factors):
        out = act_on_slot(out, factor, k)
    return out


def apply_local(op: LocalOperator, state: PureState, tol: Optional[Tolerances] = None) -> PureState:
    """Projective action of a product operator, renormalized."""
    factors = _expanded_factors(op, state.sector)
    out = apply_local_array(factors, state.tensor).reshape(-1)
    norm = np.linalg.norm(out)
    if not np.isfinite(norm) or norm < 1e-14:
        raise AnnihilationError(f"local operator annihilates the state (norm {norm:.3e})")
    return PureState(sector=state.sector, amplitudes=out / norm)


def overlap(a: PureState, b: PureState) -> complex:
    if a.sector != b.sector:
        raise SectorMismatchError(f"sectors differ: {a.sector} vs {b.sector}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: PureState, b: PureState) -> float:
    return abs(overlap(a, b)) ** 2


# ============================== mixed states ==============================


def make_density(dims: Sequence[int], matrix: np.ndarray) -> DensityMatrix:
    try:
        return DensityMatrix(dims=list(dims), matrix=matrix)
    except ValidationError as e:
        raise StateValidationError(f"invalid density matrix: {e.errors()[0]['msg']}") from e


def from_pure(state: PureState) -> DensityMatrix:
    if state.sector.indistinguishable:
        raise SectorMismatchError("mixed-state tools take distinguishable subsystems")
    v = state.amplitudes
    return DensityMatrix(dims=list(state.sector.dims), matrix=np.outer(v, v.conj()))


def partial_trace_density(rho: DensityMatrix, k: int) -> DensityMatrix:
    """Reduced block of subsystem k of a mixed state."""
    if not 0 <= k < len(rho.dims):
        raise StateValidationError(f"subsystem index {k} out of range for {len(rho.dims)} subsystems")
    n = len(rho.dims)
    tensor = rho.matrix.reshape(tuple(rho.dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i != k:
            cols[i] = rows[i]
    spec = "".join(rows) + "".join(cols) + "->" + rows[k] + cols[k]
    return DensityMatrix(dims=[rho.dims[k]], matrix=np.einsum(spec, tensor))


def conjugate_local(rho: DensityMatrix, factors: Sequence[np.ndarray]) -> DensityMatrix:
    """U rho U^dagger for a product of local factors."""
    u = factors[0]
    for f in factors[1:]:
        u = np.kron(u, f)
    return DensityMatrix(dims=rho.dims, matrix=u @ rho.matrix @ u.conj().T)


# ============================== random sampling ==============================


def random_state(sector: SectorSpec, rng: np.random.Generator) -> PureState:
    vec = rng.standard_normal(sector.embedded_dim) + 1j * rng.standard_normal(sector.embedded_dim)
    return make_state(sector, vec)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR with phase fix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_invertible(n: int, rng: np.random.Generator, max_cond: float = 1e8) -> np.ndarray:
    """Ginibre matrix, redrawn while nearly singular."""
    while True:
        g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / sqrt(2)
        if np.linalg.cond(g) < max_cond:
            return g


def random_local_unitary(sector: SectorSpec, rng: np.random.Generator) -> LocalOperator:
    if sector.indistinguishable:
        return LocalOperator(factors=[random_unitary(sector.dims[0], rng)])
    return LocalOperator(factors=[random_unitary(n, rng) for n in sector.dims])


def random_density(dims: Sequence[int], rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    size = prod(dims)
    rank = rank or size
    g = rng.standard_normal((size, rank)) + 1j * rng.standard_normal((size, rank))
    rho = g @ g.conj().T
    return DensityMatrix(dims=list(dims), matrix=rho / np.trace(rho).real)


# ============================== wire formats ==============================


def state_from_file(data: StateFile) -> PureState:
    return make_state(data.sector, pairs_to_complex(data.amplitudes))


def density_from_file(data: DensityFile) -> DensityMatrix:
    return make_density(data.dims, pairs_to_complex(data.matrix))


def load_state_json(text: str) -> PureState:
    """Parse a StateFile document; json / pydantic errors propagate with line or field."""
    return state_from_file(StateFile.model_validate(json.loads(text)))


def load_density_json(text: str) -> DensityMatrix:
    return density_from_file(DensityFile.model_validate(json.loads(text)))

