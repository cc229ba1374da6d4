"""
Weights, minimal weight combinations and critical states for L qubits.

Weight convention: basis state |b_0 ... b_{L-1}> has coordinate +1/2 on qubit k when
b_k = 0 and -1/2 when b_k = 1 (slot 0 is the most significant bit). Critical values are
reported up to qubit permutation, canonically as nonincreasing nonnegative vectors.
"""
import itertools
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from qmoment import logger
from qmoment.config import AtlasOptions, Tolerances, WitnessOptions, settings
from qmoment.errors import BudgetExceededError, UnsupportedSizeError
from qmoment.models import CriticalAtlas, CriticalCheck, CriticalValue, PureState, Weight
from qmoment.momentum_map import mu_action, psi
from qmoment.numkit import min_norm_point, riemannian_descent, run_chunks, tangent_project
from qmoment.tensor_state import act_on_slot, make_state, qubits, rdm_array

MAX_QUBITS = 6


def _check_size(n_qubits: int, upper: int = MAX_QUBITS) -> None:
    if not 1 <= n_qubits <= upper:
        raise UnsupportedSizeError(f"qubit count {n_qubits} outside the supported range 1..{upper}")


def weight_matrix(n_qubits: int) -> np.ndarray:
    """Row i is the weight of basis state i."""
    _check_size(n_qubits)
    idx = np.arange(2 ** n_qubits)
    bits = (idx[:, None] >> np.arange(n_qubits - 1, -1, -1)[None, :]) & 1
    return 0.5 - bits.astype(float)


def qubit_weights(n_qubits: int) -> List[Weight]:
    return [Weight(coords=tuple(row), basis_index=i) for i, row in enumerate(weight_matrix(n_qubits))]


def canonical(beta: Sequence[float]) -> Tuple[float, ...]:
    """Weyl reduction (per-qubit sign) followed by sorting nonincreasing."""
    values = -np.sort(-np.abs(np.asarray(beta, dtype=float)))
    return tuple(float(x) + 0.0 for x in values)


def expand_permutations(beta: Sequence[float]) -> List[Tuple[float, ...]]:
    """Distinct qubit placements of a canonical critical value."""
    return sorted(set(itertools.permutations(tuple(float(x) for x in beta))), reverse=True)


def hyperplane_support(beta: Sequence[float], tol: Optional[Tolerances] = None) -> List[int]:
    """Basis indices whose weight w satisfies <w, beta> = |beta|^2."""
    tol = tol or settings.TOLERANCES
    b = np.asarray(beta, dtype=float)
    w = weight_matrix(b.size)
    return np.flatnonzero(np.abs(w @ b - b @ b) <= tol.dedupe_tol).tolist()


def pure_qubit_obstruction(beta: Sequence[float], z_basis: Sequence[int], tol: Optional[Tolerances] = None) -> bool:
    """
    True when some qubit has the same bit on every basis state of Z_beta while beta_k != 1/2.

    Every state in that span has qubit k pure, so mu cannot reach beta.
    """
    tol = tol or settings.TOLERANCES
    b = np.asarray(beta, dtype=float)
    w = weight_matrix(b.size)[list(z_basis)]
    fixed = np.all(w == w[0], axis=0)
    return bool(np.any(fixed & (np.abs(np.abs(b) - 0.5) > tol.dedupe_tol)))


# ============================== enumeration ==============================


def _subset_blocks(n_points: int, size: int, chunk: int, limit: int) -> Iterator[np.ndarray]:
    it = itertools.islice(itertools.combinations(range(n_points), size), limit)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            return
        yield block.reshape(-1, size)


def _scan_block(task: Tuple[int, np.ndarray, float]) -> np.ndarray:
    """Canonical origin projections of the affinely independent subsets in one block."""
    n_qubits, combos, tol = task
    pts = weight_matrix(n_qubits)[combos]
    count, size, _ = pts.shape
    if size > 1:
        lifted = np.concatenate([pts, np.ones((count, size, 1))], axis=2)
        pts = pts[np.linalg.matrix_rank(lifted, tol=1e-9) == size]
    if pts.shape[0] == 0:
        return np.zeros((0, n_qubits))
    bordered = np.zeros((pts.shape[0], size + 1, size + 1))
    bordered[:, 0, 1:] = 1.0
    bordered[:, 1:, 0] = 1.0
    bordered[:, 1:, 1:] = pts @ pts.transpose(0, 2, 1)
    rhs = np.zeros((pts.shape[0], size + 1, 1))
    rhs[:, 0, 0] = 1.0
    coeffs = np.linalg.solve(bordered, rhs)[:, 1:, 0]
    keep = np.all(coeffs >= -tol, axis=1)
    x = np.einsum("ms,msl->ml", coeffs[keep], pts[keep])
    canon = -np.sort(-np.abs(x), axis=1)
    return np.unique(np.round(canon, 9) + 0.0, axis=0)


def _merge(rows: Sequence[Sequence[float]], tol: float) -> List[Tuple[float, ...]]:
    merged: List[np.ndarray] = []
    for row in sorted(map(tuple, rows)):
        r = np.asarray(row)
        if not any(np.max(np.abs(r - m)) <= tol for m in merged):
            merged.append(r)
    return [tuple(float(x) for x in m) for m in merged]


def candidate_betas(
    n_qubits: int, max_size: Optional[int] = None, opts: Optional[AtlasOptions] = None, tol: Optional[Tolerances] = None
) -> Tuple[List[Tuple[float, ...]], int, bool]:
    """
    Origin projections onto affine hulls of affinely independent weight subsets that land in
    their convex hull, Weyl reduced and deduplicated.

    Returns:
        tuple: (canonical betas, subsets checked, whether the enumeration finished)
    """
    opts = opts or settings.ATLAS
    tol = tol or settings.TOLERANCES
    _check_size(n_qubits, 5)
    n_points = 2 ** n_qubits
    top = min(max_size or n_qubits + 1, n_qubits + 1, n_points)
    budget = opts.max_subsets
    checked = 0
    complete = True
    found = []
    for size in range(1, top + 1):
        remaining = budget - checked
        if remaining <= 0:
            complete = False
            break
        total = comb(n_points, size)
        if total > remaining:
            complete = False
        tasks = [(n_qubits, block, tol.dedupe_tol) for block in _subset_blocks(n_points, size, opts.chunk_size, remaining)]
        for rows in run_chunks(_scan_block, tasks, opts.workers):
            found.extend(rows.tolist())
        checked += min(total, remaining)
        logger.info(f"L={n_qubits}: scanned subsets of size {size}, {len(found)} raw candidates so far")
    if not complete:
        logger.warning(f"L={n_qubits}: subset budget {budget} exhausted, atlas is partial")
    unique = np.unique(np.asarray(found).reshape(-1, n_qubits), axis=0) if found else []
    betas = _merge(unique, tol.dedupe_tol)
    betas.sort(key=lambda b: (sum(x * x for x in b), b))
    return betas, checked, complete


def brute_force_betas(n_qubits: int, tol: Optional[Tolerances] = None) -> List[Tuple[float, ...]]:
    """Minimum-norm point of every nonempty weight subset (small L only)."""
    tol = tol or settings.TOLERANCES
    _check_size(n_qubits, 3)
    w = weight_matrix(n_qubits)
    rows = []
    for mask in range(1, 2 ** len(w)):
        subset = w[[i for i in range(len(w)) if mask >> i & 1]]
        beta, _ = min_norm_point(subset)
        rows.append(canonical(beta))
    return _merge(rows, tol.dedupe_tol)


# ============================== witnesses ==============================


class WitnessSearch:
    """
    Multi-start search for a state in Z_beta whose momentum map equals beta.

    Minimizes R(v) = sum_k |m_k - diag(beta_k, -beta_k)|^2 over unit vectors supported on
    Z_beta. Results are cached per (beta, support, options, seed).
    """

    def __init__(self):
        self._cache: Dict[tuple, Tuple[Optional[np.ndarray], float]] = {}

    @staticmethod
    def _objective(beta: np.ndarray, n_qubits: int):
        targets = [np.diag([b, -b]) for b in beta]

        def objective(v: np.ndarray):
            tensor = v.reshape((2,) * n_qubits)
            diffs = [rdm_array(tensor, k) - np.eye(2) / 2 - t for k, t in enumerate(targets)]
            value = float(sum(np.real(np.vdot(d, d)) for d in diffs))
            acted = np.zeros_like(tensor)
            for k, d in enumerate(diffs):
                acted += act_on_slot(tensor, d, k)
            return value, 4 * tangent_project(v, acted.reshape(-1))

        return objective

    def find(
        self,
        beta: Sequence[float],
        z_basis: Sequence[int],
        opts: Optional[WitnessOptions] = None,
        seed: Optional[int] = None,
        tol: Optional[Tolerances] = None,
    ) -> Tuple[Optional[PureState], float]:
        """
        Args:
            beta: target per-qubit values
            z_basis: basis indices spanning Z_beta
            opts: restarts, iteration budget, acceptance threshold
            seed: seeds the restarts

        Returns:
            tuple: (witness or None, best residual |mu(v) - beta|)
        """
        opts = opts or settings.WITNESS
        tol = tol or settings.TOLERANCES
        seed = settings.SEED if seed is None else seed
        b = np.asarray(beta, dtype=float)
        n_qubits = b.size
        cache_key = (tuple(np.round(b, 12)), tuple(z_basis), opts.restarts, opts.max_iter, opts.accept_residual, seed)
        if cache_key in self._cache:
            logger.debug(f"witness cache hit for beta {tuple(b)}")
            vec, residual = self._cache[cache_key]
            return (None if vec is None else make_state(qubits(n_qubits), vec)), residual

        if pure_qubit_obstruction(b, z_basis, tol):
            logger.info(f"beta {tuple(b)}: a qubit is pure on all of Z_beta, no witness")
            self._cache[cache_key] = (None, float("inf"))
            return None, float("inf")

        support = np.zeros(2 ** n_qubits, dtype=bool)
        support[list(z_basis)] = True
        objective = self._objective(b, n_qubits)
        rng = np.random.default_rng([seed, *np.round(b * 1e6).astype(np.int64).tolist()])
        best_vec, best = None, float("inf")
        polish = (opts.accept_residual * 1e-4) ** 2
        for attempt in range(opts.restarts):
            v0 = (rng.standard_normal(support.size) + 1j * rng.standard_normal(support.size)) * support
            result = riemannian_descent(
                objective, v0, grad_tol=1e-12, max_iter=opts.max_iter, target=polish, support=support
            )
            residual = float(np.sqrt(max(result.value, 0.0)))
            if residual < best:
                best_vec, best = result.point, residual
            if residual < opts.accept_residual:
                logger.info(f"beta {tuple(b)}: witness found on attempt {attempt + 1}, residual {residual:.2e}")
                break
            logger.debug(f"beta {tuple(b)}: attempt {attempt + 1} stopped at residual {residual:.3e}")
        else:
            logger.info(f"beta {tuple(b)}: no witness after {opts.restarts} attempts, best residual {best:.3e}")
            best_vec = None

        self._cache[cache_key] = (best_vec, best)
        return (None if best_vec is None else make_state(qubits(n_qubits), best_vec)), best


witness_search = WitnessSearch()


def find_witness(
    value: CriticalValue, opts: Optional[WitnessOptions] = None, seed: Optional[int] = None
) -> Optional[PureState]:
    witness, _ = witness_search.find(value.beta, value.z_basis, opts=opts, seed=seed)
    return witness


def make_critical_value(beta: Sequence[float], tol: Optional[Tolerances] = None) -> CriticalValue:
    b = list(canonical(beta))
    support = hyperplane_support(b, tol)
    return CriticalValue(beta=b, norm_sq=float(sum(x * x for x in b)), support=support, z_basis=support)


def enumerate_B(
    n_qubits: int,
    opts: Optional[AtlasOptions] = None,
    witness_opts: Optional[WitnessOptions] = None,
    tol: Optional[Tolerances] = None,
    seed: Optional[int] = None,
    max_size: Optional[int] = None,
    strict: bool = False,
) -> CriticalAtlas:
    """
    Every Weyl-reduced minimum-norm candidate for L qubits, sorted by |beta|^2.

    With ``opts.find_witnesses`` each value carries a realizability flag and, when
    realizable, a witness state in Z_beta. A spent subset budget gives ``complete=False``,
    or BudgetExceededError carrying that partial atlas when ``strict`` is set.
    """
    opts = opts or settings.ATLAS
    betas, checked, complete = candidate_betas(n_qubits, max_size=max_size, opts=opts, tol=tol)
    values = []
    for beta in betas:
        value = make_critical_value(beta, tol)
        if opts.find_witnesses:
            witness, residual = witness_search.find(value.beta, value.z_basis, opts=witness_opts, seed=seed, tol=tol)
            value.realizable = witness is not None
            value.witness = witness
            value.residual = residual if np.isfinite(residual) else None
        values.append(value)
    logger.info(f"L={n_qubits}: {len(values)} critical candidates from {checked} subsets")
    atlas = CriticalAtlas(n_qubits=n_qubits, values=values, subsets_checked=checked, complete=complete)
    if strict and not complete:
        raise BudgetExceededError(f"subset budget {opts.max_subsets} spent after {checked} subsets", partial=atlas)
    return atlas


_atlas_cache: Dict[tuple, CriticalAtlas] = {}


def candidate_atlas(n_qubits: int) -> CriticalAtlas:
    """Cached witness-free atlas, used to name flow limits."""
    key = (n_qubits, settings.TOLERANCES.dedupe_tol)
    if key not in _atlas_cache:
        _atlas_cache[key] = enumerate_B(n_qubits, opts=settings.ATLAS.model_copy(update={"find_witnesses": False}))
    return _atlas_cache[key]


def match_beta(lambdas: Sequence[float], n_qubits: int, tol: Optional[Tolerances] = None) -> Optional[CriticalValue]:
    """Atlas entry within match_tol of canonical(lambdas), or None."""
    tol = tol or settings.TOLERANCES
    target = np.asarray(canonical(lambdas))
    best, best_dist = None, float("inf")
    for value in candidate_atlas(n_qubits).values:
        dist = float(np.max(np.abs(np.asarray(value.beta) - target)))
        if dist < best_dist:
            best, best_dist = value, dist
    if best is None or best_dist > tol.match_tol:
        return None
    return best


# ============================== criticality ==============================


def is_critical(state: PureState, tol: Optional[Tolerances] = None) -> CriticalCheck:
    """Checks mu([v]).v = lambda v: residual of A v against its projection on v."""
    tol = tol or settings.TOLERANCES
    v = state.amplitudes
    av = mu_action(state)
    eigenvalue = float(np.real(np.vdot(v, av)))
    residual = float(np.linalg.norm(av - eigenvalue * v))
    return CriticalCheck(critical=residual < tol.flow_tol, eigenvalue=eigenvalue, residual=residual)


def witness_matches(value: CriticalValue, tol: float = 1e-7) -> bool:
    """psi(witness) agrees with beta up to qubit placement."""
    if value.witness is None:
        return False
    lam = psi(value.witness).qubit_lambdas
    return bool(np.max(np.abs(np.asarray(canonical(lam)) - np.asarray(value.beta))) < tol)
