"""
Gradient flow of |mu|^2, null-cone tests along SLOCC orbits, entanglement-polytope
sampling and small-system SLOCC invariants.
"""
import csv
from typing import List, Optional, Sequence, TextIO, Tuple

import numpy as np
import scipy.linalg

from qmoment import logger
from qmoment.config import FlowOptions, Tolerances, settings
from qmoment.critical_atlas import match_beta
from qmoment.errors import (
    BudgetExceededError, OutsidePolytopeError, QMomentError, SectorMismatchError, StateValidationError,
    UnsupportedSizeError,
)
from qmoment.models import (
    LocalOperator, NullConeStatus, NullConeVerdict, PolytopeMembership, PolytopeSample, PureState, Slocc3Class,
    StratumAssignment,
)
from qmoment.momentum_map import kirwan_contains, momentum, mu_action, norm_mu_squared, psi
from qmoment.numkit import numerical_rank, riemannian_descent, tangent_project
from qmoment.tensor_state import (
    apply_local, apply_local_array, from_terms, make_state, random_invertible, reduced_blocks,
)

# Cayley hyperdeterminant of a 2x2x2 tensor as sum_j coeff[j] * prod_r psi[index[r, j]]
_HYPERDET_COEFF = np.array([1, 1, 1, 1, -2, -2, -2, -2, -2, -2, 4, 4], dtype=float)
_HYPERDET_INDEX = np.array([
    [0, 1, 2, 4, 0, 0, 0, 3, 3, 5, 0, 7],
    [0, 1, 2, 4, 7, 7, 7, 4, 4, 2, 6, 1],
    [7, 6, 5, 3, 3, 5, 6, 5, 6, 6, 5, 2],
    [7, 6, 5, 3, 4, 2, 1, 2, 1, 1, 3, 4],
])


def descent_direction(state: PureState) -> np.ndarray:
    """Minus the gradient of |mu|^2 at the state, a tangent vector."""
    v = state.amplitudes
    return -tangent_project(v, mu_action(state))


def _flow_objective(sector):
    def objective(v: np.ndarray) -> Tuple[float, np.ndarray]:
        state = PureState(sector=sector, amplitudes=v)
        point = momentum(state)
        value = 0.25 * sum(float(np.real(np.trace(m @ m))) for m in point.blocks)
        return value, tangent_project(v, mu_action(state, point))

    return objective


def _qubit_match(state: PureState, lambdas: List[float], tol: Tolerances):
    if not state.sector.is_qubits:
        return None
    try:
        return match_beta(lambdas, state.n_slots, tol)
    except UnsupportedSizeError:
        logger.warning(f"no critical atlas for {state.n_slots} qubits, limit left unnamed")
        return None


def flow_to_critical(
    state: PureState,
    opts: Optional[FlowOptions] = None,
    tol: Optional[Tolerances] = None,
    perturb: float = 0.0,
    seed: Optional[int] = None,
    strict: bool = False,
) -> StratumAssignment:
    """
    Follow the descent direction of |mu|^2 to a critical point and name its stratum.

    Args:
        state: starting state
        opts: Armijo parameters and iteration budget
        perturb: size of a seeded random kick applied first, to leave saddles
        seed: seed for the kick
        strict: raise instead of returning an unconverged limit

    Returns:
        StratumAssignment: limit state, its spectra and the matching critical value, if any

    Raises:
        BudgetExceededError: strict and the iteration budget ran out before convergence
    """
    opts = opts or settings.FLOW
    tol = tol or settings.TOLERANCES
    v0 = state.amplitudes
    if perturb > 0:
        rng = np.random.default_rng(settings.SEED if seed is None else seed)
        kick = rng.standard_normal(v0.size) + 1j * rng.standard_normal(v0.size)
        v0 = make_state(state.sector, v0 + perturb * kick / np.linalg.norm(kick)).amplitudes

    result = riemannian_descent(_flow_objective(state.sector), v0, opts=opts, grad_tol=tol.flow_tol)
    if any(b > a + 1e-15 for a, b in zip(result.history, result.history[1:])):
        logger.error("|mu|^2 increased along an accepted flow step")
        raise QMomentError("flow step increased |mu|^2", detail=result.history)
    if not result.converged:
        logger.warning(f"flow stopped after {result.iterations} steps with residual {result.grad_norm:.3e}")

    limit = make_state(state.sector, result.point)
    spectra = psi(limit)
    beta = _qubit_match(limit, spectra.qubit_lambdas, tol)
    if state.sector.is_qubits and beta is None:
        logger.warning(f"flow limit {spectra.qubit_lambdas} matches no critical value")
    semistable = result.value < opts.null_cone_threshold or (beta is not None and beta.norm_sq < tol.match_tol)
    logger.info(f"flow converged={result.converged} in {result.iterations} steps, |mu|^2={result.value:.3e}")
    stratum = StratumAssignment(
        beta=beta,
        matched=beta is not None,
        limit_state=limit,
        limit_spectra=spectra,
        iterations=result.iterations,
        final_norm_mu_sq=result.value,
        residual=result.grad_norm,
        converged=result.converged,
        semistable=semistable,
        trace=result.history,
    )
    if strict and not result.converged:
        raise BudgetExceededError(
            f"flow did not converge within {opts.max_iter} steps (residual {result.grad_norm:.3e})", partial=stratum
        )
    return stratum


# ============================== null cone ==============================


def null_cone_gradient(state: PureState) -> Tuple[float, List[np.ndarray]]:
    """
    |mu|^2 and its gradient with respect to xi_k in v -> exp(xi) v / |exp(xi) v|.

    Each xi_k is Hermitian traceless on slot k; the gradient block is the traceless part of
    Herm(C_k) - lambda rho_k with C_k = V_k (A V)_k^dagger and lambda = <v, A v>.
    """
    if state.sector.indistinguishable:
        raise SectorMismatchError("null-cone descent is implemented for distinguishable subsystems")
    v = state.tensor
    av = mu_action(state).reshape(v.shape)
    lam = float(np.real(np.vdot(v, av)))
    grads = []
    for k, rho in enumerate(reduced_blocks(state)):
        n = v.shape[k]
        vk = np.moveaxis(v, k, 0).reshape(n, -1)
        ak = np.moveaxis(av, k, 0).reshape(n, -1)
        c = vk @ ak.conj().T
        g = 0.5 * (c + c.conj().T) - lam * rho
        grads.append(g - np.trace(g) / n * np.eye(n))
    return norm_mu_squared(state), grads


def null_cone_test(state: PureState, opts: Optional[FlowOptions] = None, tol: Optional[Tolerances] = None) -> NullConeVerdict:
    """
    Minimize |mu|^2 over the positive part of the SLOCC orbit.

    Semistable when the infimum drops below the threshold; otherwise the stratum of the
    K-flow limit of the minimizing point is reported.
    """
    opts = opts or settings.FLOW
    tol = tol or settings.TOLERANCES
    current = state
    value, grads = null_cone_gradient(current)
    iterations = 0
    converged = False
    step = opts.initial_step
    while iterations < opts.max_iter:
        gnorm_sq = sum(float(np.real(np.vdot(g, g))) for g in grads)
        if value < opts.null_cone_threshold or np.sqrt(gnorm_sq) < tol.flow_tol:
            converged = True
            break
        accepted = False
        step = min(step / opts.backtrack, 1e3)
        while step >= opts.min_step:
            factors = [scipy.linalg.expm(-step * g) for g in grads]
            trial = apply_local(LocalOperator(factors=factors), current)
            trial_value, trial_grads = null_cone_gradient(trial)
            if trial_value <= value - opts.armijo_c * step * gnorm_sq:
                accepted = True
                break
            step *= opts.backtrack
        if not accepted:
            break
        current, value, grads = trial, trial_value, trial_grads
        iterations += 1
    if not converged:
        logger.warning(f"null-cone descent stopped after {iterations} steps at |mu|^2={value:.3e}")

    if value < opts.null_cone_threshold:
        logger.info(f"state is semistable, infimum {value:.3e} after {iterations} steps")
        return NullConeVerdict(status=NullConeStatus.semistable, infimum=value, iterations=iterations, converged=converged)

    stratum = flow_to_critical(current, opts, tol)
    beta = stratum.beta.beta if stratum.beta is not None else sorted(stratum.limit_spectra.qubit_lambdas, reverse=True)
    logger.info(f"state is unstable, infimum {value:.3e}, beta {beta}")
    return NullConeVerdict(
        status=NullConeStatus.unstable, infimum=value, iterations=iterations, beta=beta, stratum=stratum, converged=converged
    )


# ============================== entanglement polytopes ==============================


def polytope_sample(state: PureState, n: int, seed: Optional[int] = None) -> PolytopeSample:
    """
    Spectra of n random SLOCC images of the state; the first draw is the state itself.

    For qubits, spectra outside the Kirwan polytope are numerical failures: they are
    dropped from ``points`` and counted in ``rejected``.

    Raises:
        StateValidationError: n < 1
        OutsidePolytopeError: every draw was rejected
    """
    if n < 1:
        raise StateValidationError(f"sample size must be positive, got {n}")
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    dims = state.sector.local_dims
    checked = state.sector.is_qubits and state.n_slots >= 2
    points, rejected = [], 0
    for i in range(n):
        if i == 0:
            image = state
        elif state.sector.indistinguishable:
            image = apply_local(LocalOperator(factors=[random_invertible(dims[0], rng)]), state)
        else:
            image = apply_local(LocalOperator(factors=[random_invertible(d, rng) for d in dims]), state)
        point = psi(image)
        if checked and kirwan_contains(point, state.n_slots) == PolytopeMembership.outside:
            logger.warning(f"draw {i}: spectra {point.qubit_lambdas} fall outside the Kirwan polytope, rejected")
            rejected += 1
            continue
        points.append(point)
    if not points:
        raise OutsidePolytopeError(f"all {n} sampled spectra fall outside the Kirwan polytope")
    return PolytopeSample(points=points, min_norm_sq=min(p.norm_sq for p in points), rejected=rejected)


def write_sample_csv(sample: PolytopeSample, out: TextIO) -> None:
    """One row per sample: the concatenated sorted spectra of every block."""
    writer = csv.writer(out, lineterminator="\n")
    for point in sample.points:
        writer.writerow([format(x, ".17g") for block in point.lambdas for x in block])


# ============================== small-system invariants ==============================


def _w3() -> PureState:
    return from_terms(3, {"011": 1, "101": 1, "110": 1})


def ghz_to_w_demo(a: float) -> float:
    """Fidelity with W3 of A(a)^{x3} GHZ3, A(a) = [[a, a], [-1/a, 1/a]] / sqrt(2)."""
    if not 0 < a <= 1:
        raise StateValidationError(f"a must lie in (0, 1], got {a}")
    op = np.array([[a, a], [-1 / a, 1 / a]]) / np.sqrt(2)
    ghz = from_terms(3, {"000": 1, "111": 1})
    out = apply_local_array([op] * 3, ghz.tensor).reshape(-1)
    norm = np.linalg.norm(out)
    if not np.isfinite(norm) or norm == 0:
        raise QMomentError(f"normalization overflows at a={a}")
    return float(abs(np.vdot(_w3().amplitudes, out / norm)) ** 2)


def _check_bipartition(state: PureState, part: Sequence[int]) -> List[int]:
    if state.sector.indistinguishable:
        raise SectorMismatchError("Schmidt rank needs distinguishable subsystems")
    part = sorted(set(int(k) for k in part))
    if not part or len(part) >= state.n_slots or part[0] < 0 or part[-1] >= state.n_slots:
        raise StateValidationError(f"invalid bipartition {list(part)} of {state.n_slots} subsystems")
    return part


def schmidt_coefficients(state: PureState, part: Sequence[int]) -> np.ndarray:
    """Singular values of the matricization with the slots in ``part`` as rows."""
    part = _check_bipartition(state, part)
    rest = [k for k in range(state.n_slots) if k not in part]
    tensor = np.transpose(state.tensor, part + rest)
    rows = int(np.prod([state.sector.local_dims[k] for k in part]))
    return np.linalg.svd(tensor.reshape(rows, -1), compute_uv=False)


def schmidt_rank(state: PureState, part: Sequence[int], tol: Optional[Tolerances] = None) -> int:
    tol = tol or settings.TOLERANCES
    return int(np.sum(schmidt_coefficients(state, part) > tol.eig_tol))


def _require_three_qubits(state: PureState) -> None:
    if not (state.sector.is_qubits and state.n_slots == 3):
        raise SectorMismatchError("three-qubit state required")


def three_tangle(state: PureState) -> float:
    """4 |hyperdeterminant|, equal to 1 on GHZ3."""
    _require_three_qubits(state)
    v = state.amplitudes
    det = np.prod(v[_HYPERDET_INDEX], axis=0) @ _HYPERDET_COEFF
    return float(4 * abs(det))


def classify_slocc_3qubit(state: PureState, tol: Optional[Tolerances] = None) -> Slocc3Class:
    _require_three_qubits(state)
    ranks = [schmidt_rank(state, [k], tol) for k in range(3)]
    product_cuts = [k for k, r in enumerate(ranks) if r == 1]
    if len(product_cuts) >= 2:
        return Slocc3Class.sep
    if len(product_cuts) == 1:
        return [Slocc3Class.bisep_a, Slocc3Class.bisep_b, Slocc3Class.bisep_c][product_cuts[0]]
    return Slocc3Class.ghz if three_tangle(state) > 1e-8 else Slocc3Class.w


def local_rank_profile(state: PureState, tol: Optional[Tolerances] = None) -> List[int]:
    return [numerical_rank(rho, tol) for rho in reduced_blocks(state)]
