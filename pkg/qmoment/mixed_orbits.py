"""
Isospectral orbits of mixed states under products of special unitary groups.

The Lie algebra of K is spanned by anti-Hermitian generalized Gell-Mann matrices on each
full factor, embedded into the total space. All ranks are numerical with the threshold
max(rank_rel_tol * s_max, eig_tol).
"""
from itertools import combinations_with_replacement
from math import factorial, prod
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from qmoment import logger
from qmoment.config import Tolerances, settings
from qmoment.errors import SectorMismatchError
from qmoment.models import DensityMatrix, GroupFactor, GroupSpec, OrbitReport
from qmoment.numkit import eigh_desc, hermitian_basis, numerical_rank, run_chunks
from qmoment.tensor_state import make_density, partial_trace_density


def su_basis(n: int) -> List[np.ndarray]:
    """Anti-Hermitian basis of su(n), orthonormal under -Tr(XY)."""
    return [1j * h for h in hermitian_basis(n)]


def _embed(op: np.ndarray, k: int, dims: Sequence[int]) -> np.ndarray:
    out = np.eye(1)
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == k else np.eye(d))
    return out


def _check(rho: DensityMatrix, group: GroupSpec) -> None:
    if list(rho.dims) != list(group.dims):
        raise SectorMismatchError(f"group dims {group.dims} do not match state dims {rho.dims}")


def k_basis(group: GroupSpec) -> List[np.ndarray]:
    basis = []
    for k, (factor, n) in enumerate(zip(group.factors, group.dims)):
        if factor == GroupFactor.full:
            basis.extend(_embed(x, k, group.dims) for x in su_basis(n))
    return basis


def _real_columns(mats: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in mats]).T


def _stabilizer_basis(rho: DensityMatrix, group: GroupSpec, tol: Tolerances) -> List[np.ndarray]:
    basis = k_basis(group)
    commutators = _real_columns([x @ rho.matrix - rho.matrix @ x for x in basis])
    s = np.linalg.svd(commutators, compute_uv=False)
    cut = max(tol.rank_rel_tol * (s[0] if s.size else 0.0), tol.eig_tol)
    kernel = scipy.linalg.null_space(commutators, rcond=cut / s[0]) if s.size and s[0] > cut else np.eye(len(basis))
    return [sum(c * x for c, x in zip(col, basis)) for col in kernel.T]


def stabilizer_dim(rho: DensityMatrix, group: GroupSpec, tol: Optional[Tolerances] = None) -> int:
    """Real dimension of {xi in k : [xi, rho] = 0}."""
    tol = tol or settings.TOLERANCES
    _check(rho, group)
    basis = k_basis(group)
    commutators = _real_columns([x @ rho.matrix - rho.matrix @ x for x in basis])
    return len(basis) - numerical_rank(commutators, tol)


def orbit_dim(rho: DensityMatrix, group: GroupSpec, tol: Optional[Tolerances] = None) -> int:
    return group.dim - stabilizer_dim(rho, group, tol)


def omega_matrix(rho: DensityMatrix, group: GroupSpec) -> np.ndarray:
    """Omega_ab = -(i/2) Tr(rho [xi_a, xi_b]), real antisymmetric."""
    _check(rho, group)
    basis = k_basis(group)
    size = len(basis)
    omega = np.zeros((size, size))
    for a in range(size):
        for b in range(a + 1, size):
            bracket = basis[a] @ basis[b] - basis[b] @ basis[a]
            omega[a, b] = np.real(-0.5j * np.trace(rho.matrix @ bracket))
            omega[b, a] = -omega[a, b]
    return omega


def omega_rank(rho: DensityMatrix, group: GroupSpec, tol: Optional[Tolerances] = None) -> int:
    return numerical_rank(omega_matrix(rho, group), tol)


def _multiplicities(values: np.ndarray, gap: float) -> List[int]:
    mults = [1]
    for prev, cur in zip(values, values[1:]):
        if abs(prev - cur) <= gap:
            mults[-1] += 1
        else:
            mults.append(1)
    return mults


def degeneracy_D(rho: DensityMatrix, group: GroupSpec, tol: Optional[Tolerances] = None) -> int:
    """dim K.rho minus the dimension of the adjoint orbit of mu(rho)."""
    tol = tol or settings.TOLERANCES
    _check(rho, group)
    adjoint = 0
    for k, (factor, n) in enumerate(zip(group.factors, group.dims)):
        if factor != GroupFactor.full:
            continue
        values = eigh_desc(partial_trace_density(rho, k).matrix)[0]
        adjoint += n * n - sum(m * m for m in _multiplicities(values, tol.dedupe_tol))
    return orbit_dim(rho, group, tol) - adjoint


def _factor_block(x: np.ndarray, k: int, dims: Sequence[int]) -> np.ndarray:
    """Slot-k component of a sum of embedded single-slot operators."""
    n = len(dims)
    tensor = x.reshape(tuple(dims) * 2)
    rows = list(range(n))
    cols = [n + i if i == k else i for i in range(n)]
    block = np.einsum(tensor, rows + cols, [k, n + k])
    return block / prod(d for i, d in enumerate(dims) if i != k)


def _class_sizes(n: int, links: Sequence[tuple]) -> List[int]:
    """Sizes of the classes of {0..n-1} joined by the given pairs."""
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            i = parent[i]
        return i

    for a, b in links:
        parent[find(b)] = find(a)
    sizes: dict = {}
    for i in range(n):
        sizes[find(i)] = sizes.get(find(i), 0) + 1
    return list(sizes.values())


def euler_characteristic(
    rho: DensityMatrix, group: GroupSpec, tol: Optional[Tolerances] = None, seed: Optional[int] = None
) -> int:
    """
    chi(K/K_rho) = |W_K| / |W_{K_rho}| when the stabilizer contains a maximal torus, else 0.

    The torus test compares the centralizer of a random stabilizer element with rank K.
    Root vectors of the stabilizer are read off in the eigenbasis of that element.
    """
    tol = tol or settings.TOLERANCES
    _check(rho, group)
    stab = _stabilizer_basis(rho, group, tol)
    if len(stab) < group.rank:
        return 0
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    x = sum(c * s for c, s in zip(rng.standard_normal(len(stab)), stab))
    centralizer = _real_columns([x @ s - s @ x for s in stab])
    if len(stab) - numerical_rank(centralizer, tol) != group.rank:
        logger.debug("stabilizer has lower rank than K, chi = 0")
        return 0

    dims = group.dims
    frames = []
    for k, (factor, n) in enumerate(zip(group.factors, dims)):
        if factor == GroupFactor.full:
            frames.append(eigh_desc(1j * _factor_block(x, k, dims))[1])
        else:
            frames.append(np.eye(n))
    u = frames[0]
    for f in frames[1:]:
        u = np.kron(u, f)
    rotated = u.conj().T @ rho.matrix @ u
    scale = max(np.linalg.norm(rotated), 1.0)

    w_k, w_stab = 1, 1
    for k, (factor, n) in enumerate(zip(group.factors, dims)):
        if factor != GroupFactor.full:
            continue
        w_k *= factorial(n)
        links = []
        for a in range(n):
            for b in range(a + 1, n):
                e = np.zeros((n, n))
                e[a, b] = 1.0
                root = _embed(e, k, dims)
                if np.linalg.norm(root @ rotated - rotated @ root) <= tol.commute_tol * scale:
                    links.append((a, b))
        w_stab *= prod(factorial(s) for s in _class_sizes(n, links))
    return w_k // w_stab


# ============================== CQ / CC ==============================


def _bipartite(rho: DensityMatrix) -> None:
    if len(rho.dims) != 2:
        raise SectorMismatchError(f"CQ/CC tests take bipartite states, got dims {rho.dims}")


def a_side_family(rho: DensityMatrix) -> List[np.ndarray]:
    """A_m with rho = sum_m A_m (x) Y_m over an orthonormal Hermitian basis Y_m of side B."""
    _bipartite(rho)
    na, nb = rho.dims
    ys = [np.eye(nb) / np.sqrt(nb)] + hermitian_basis(nb)
    tensor = rho.matrix.reshape(na, nb, na, nb)
    return [np.einsum("ajbk,kj->ab", tensor, y) for y in ys]


def is_cq(rho: DensityMatrix, tol: Optional[Tolerances] = None) -> bool:
    """Side A classical: the A_m pairwise commute."""
    tol = tol or settings.TOLERANCES
    family = a_side_family(rho)
    for i in range(len(family)):
        for j in range(i + 1, len(family)):
            if np.linalg.norm(family[i] @ family[j] - family[j] @ family[i]) > tol.commute_tol:
                return False
    return True


def swap_sides(rho: DensityMatrix) -> DensityMatrix:
    _bipartite(rho)
    na, nb = rho.dims
    tensor = rho.matrix.reshape(na, nb, na, nb).transpose(1, 0, 3, 2)
    return DensityMatrix(dims=[nb, na], matrix=tensor.reshape(na * nb, na * nb))


def is_cc(rho: DensityMatrix, tol: Optional[Tolerances] = None) -> bool:
    return is_cq(rho, tol) and is_cq(swap_sides(rho), tol)


def orbit_report(rho: DensityMatrix, group: Optional[GroupSpec] = None, tol: Optional[Tolerances] = None) -> OrbitReport:
    group = group or GroupSpec.full(list(rho.dims))
    dim = orbit_dim(rho, group, tol)
    rank = omega_rank(rho, group, tol)
    bipartite = len(rho.dims) == 2
    return OrbitReport(
        orbit_dim=dim,
        stabilizer_dim=group.dim - dim,
        omega_rank=rank,
        degeneracy_D=degeneracy_D(rho, group, tol),
        euler_chi=euler_characteristic(rho, group, tol),
        is_symplectic=rank == dim,
        is_cq=is_cq(rho, tol) if bipartite else False,
        is_cc=is_cc(rho, tol) if bipartite else False,
    )


# ============================== CC simplex scan ==============================


def cc_state(p: Sequence[float], dims: Sequence[int] = (2, 2)) -> DensityMatrix:
    """Diagonal state sum_ij p_ij |ij><ij|."""
    p = np.asarray(p, dtype=float)
    return make_density(list(dims), np.diag(p / p.sum()).astype(complex))


def simplex_grid(n: int) -> List[tuple]:
    """Compositions of n into four nonnegative parts, divided by n."""
    points = []
    for cuts in combinations_with_replacement(range(n + 1), 3):
        a, b, c = cuts
        points.append((a / n, (b - a) / n, (c - b) / n, (n - c) / n))
    return points


def _scan_rows(points: Sequence[tuple]) -> List[tuple]:
    group = GroupSpec.full([2, 2])
    rows = []
    for p in points:
        rho = cc_state(p)
        rows.append((
            *p,
            orbit_dim(rho, group),
            omega_rank(rho, group),
            degeneracy_D(rho, group),
            euler_characteristic(rho, group),
        ))
    return rows


def cc_simplex_scan(grid: int, workers: int = 1, chunk_size: int = 500) -> List[tuple]:
    """Rows (p00, p01, p10, p11, orbit_dim, omega_rank, D, chi) over the two-qubit CC simplex."""
    points = simplex_grid(grid)
    chunks = [points[i:i + chunk_size] for i in range(0, len(points), chunk_size)]
    rows = [row for part in run_chunks(_scan_rows, chunks, workers) for row in part]
    logger.info(f"scanned {len(rows)} CC states on a grid of {grid}")
    return rows


SCAN_HEADER = ["p00", "p01", "p10", "p11", "orbit_dim", "omega_rank", "D", "chi"]
