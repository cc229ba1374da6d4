"""
Shared numerical kernel: Hermitian spectra, minimum-norm points of convex hulls,
tangent geometry of the unit sphere and a finite-difference oracle.
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from qmoment import logger
from qmoment.config import FlowOptions, Tolerances, settings


class DescentResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    point: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    history: List[float]


class NumKit:
    @staticmethod
    def eigh_desc(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigendecomposition of a Hermitian matrix, eigenvalues nonincreasing.

        Args:
            h: square matrix, symmetrized before decomposition

        Returns:
            tuple: (eigenvalues, eigenvectors as columns)
        """
        h = 0.5 * (h + h.conj().T)
        w, u = np.linalg.eigh(h)
        return w[::-1], u[:, ::-1]

    @staticmethod
    def numerical_rank(matrix: np.ndarray, tol: Optional[Tolerances] = None) -> int:
        tol = tol or settings.TOLERANCES
        if matrix.size == 0:
            return 0
        s = np.linalg.svd(matrix, compute_uv=False)
        if s.size == 0 or s[0] <= tol.eig_tol:
            return 0
        return int(np.sum(s > max(tol.rank_rel_tol * s[0], tol.eig_tol)))

    @staticmethod
    def hermitian_basis(n: int) -> List[np.ndarray]:
        """Traceless Hermitian n x n matrices, orthonormal under Tr(XY) (generalized Gell-Mann)."""
        basis = []
        for a in range(n):
            for b in range(a + 1, n):
                sym = np.zeros((n, n), dtype=complex)
                sym[a, b] = sym[b, a] = 1 / np.sqrt(2)
                anti = np.zeros((n, n), dtype=complex)
                anti[a, b] = -1j / np.sqrt(2)
                anti[b, a] = 1j / np.sqrt(2)
                basis.extend([sym, anti])
        for k in range(1, n):
            diag = np.zeros(n)
            diag[:k] = 1.0
            diag[k] = -k
            basis.append(np.diag(diag / np.sqrt(k * (k + 1))).astype(complex))
        return basis

    # ------------------------------------------------------------------ sphere geometry

    @staticmethod
    def tangent_project(v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """w - <v,w> v, the part of w orthogonal to the unit vector v."""
        return w - np.vdot(v, w) * v

    @staticmethod
    def tangent_frame(v: np.ndarray) -> np.ndarray:
        """Real orthonormal frame of the tangent space at v, as complex column vectors."""
        n = v.size
        cols = []
        for j in range(n):
            e = np.zeros(n, dtype=complex)
            e[j] = 1.0
            for w in (e, 1j * e):
                t = NumKit.tangent_project(v, w)
                cols.append(np.concatenate([t.real, t.imag]))
        real_frame = scipy.linalg.orth(np.array(cols).T)
        return real_frame[:n] + 1j * real_frame[n:]

    @staticmethod
    def fd_gradient(f: Callable[[np.ndarray], float], v: np.ndarray, h: Optional[float] = None) -> np.ndarray:
        """
        Central-difference gradient of f on the unit sphere, as a complex tangent vector.

        The real inner product Re<a, b> is the metric; f must be phase invariant near v.
        """
        h = h or settings.TOLERANCES.fd_step
        frame = NumKit.tangent_frame(v)
        grad = np.zeros_like(v)
        for j in range(frame.shape[1]):
            t = frame[:, j]
            plus = v + h * t
            minus = v - h * t
            df = (f(plus / np.linalg.norm(plus)) - f(minus / np.linalg.norm(minus))) / (2 * h)
            grad = grad + df * t
        return grad

    @staticmethod
    def real_cosine(a: np.ndarray, b: np.ndarray) -> float:
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            return 0.0
        return float(np.real(np.vdot(a, b)) / (na * nb))

    @staticmethod
    def riemannian_descent(
        objective: Callable[[np.ndarray], Tuple[float, np.ndarray]],
        v0: np.ndarray,
        opts: Optional[FlowOptions] = None,
        grad_tol: float = 1e-8,
        max_iter: Optional[int] = None,
        target: Optional[float] = None,
        support: Optional[np.ndarray] = None,
    ) -> DescentResult:
        """
        Projected gradient descent on the unit sphere with retraction by renormalization.

        Args:
            objective: returns (value, tangent gradient) at a unit vector
            v0: starting unit vector
            opts: Armijo and step parameters
            grad_tol: stop once the gradient norm falls below this
            max_iter: iteration budget, defaults to opts.max_iter
            target: stop early once the value falls below this
            support: boolean mask; gradient components outside it are zeroed

        Returns:
            DescentResult: final point, value, gradient norm and the accepted values
        """
        opts = opts or settings.FLOW
        budget = max_iter if max_iter is not None else opts.max_iter
        v = v0 / np.linalg.norm(v0)
        value, grad = objective(v)
        if support is not None:
            grad = np.where(support, grad, 0)
        history = [value]
        prev_v, prev_grad = None, None
        iterations = 0
        converged = False
        while iterations < budget:
            gnorm = np.linalg.norm(grad)
            if gnorm < grad_tol or (target is not None and value < target):
                converged = True
                break
            step = opts.initial_step
            if prev_v is not None:
                s = v - prev_v
                y = grad - prev_grad
                sy = abs(np.real(np.vdot(s, y)))
                if sy > 1e-300:
                    step = min(max(np.real(np.vdot(s, s)) / sy, opts.min_step), 1e6)
            accepted = False
            while step >= opts.min_step:
                trial = v - step * grad
                trial = trial / np.linalg.norm(trial)
                trial_value, trial_grad = objective(trial)
                if trial_value <= value - opts.armijo_c * step * gnorm ** 2:
                    accepted = True
                    break
                step *= opts.backtrack
            if not accepted:
                logger.debug(f"line search stalled at value {value:.3e}, gradient {gnorm:.3e}")
                break
            prev_v, prev_grad = v, grad
            v, value, grad = trial, trial_value, trial_grad
            if support is not None:
                grad = np.where(support, grad, 0)
            history.append(value)
            iterations += 1
        gnorm = float(np.linalg.norm(grad))
        if not converged:
            converged = gnorm < grad_tol or (target is not None and value < target)
        return DescentResult(
            point=v, value=float(value), grad_norm=gnorm, iterations=iterations, converged=converged, history=history
        )

    # ------------------------------------------------------------------ convex geometry

    @staticmethod
    def project_origin_affine(points: np.ndarray, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray, bool]:
        """
        Closest point to the origin on the affine hull of the rows of ``points``.

        Returns:
            tuple: (x, affine coefficients summing to one, whether the rows are affinely independent)
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        lifted = np.hstack([points, np.ones((m, 1))])
        independent = NumKit.numerical_rank(lifted, Tolerances(eig_tol=tol)) == m
        gram = points @ points.T
        bordered = np.zeros((m + 1, m + 1))
        bordered[0, 1:] = 1.0
        bordered[1:, 0] = 1.0
        bordered[1:, 1:] = gram
        rhs = np.zeros(m + 1)
        rhs[0] = 1.0
        sol = np.linalg.lstsq(bordered, rhs, rcond=None)[0]
        coeffs = sol[1:]
        return coeffs @ points, coeffs, independent

    @staticmethod
    def min_norm_point(points: Sequence[Sequence[float]], max_iter: int = 1000, tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
        """
        Wolfe's algorithm for the point of conv(points) closest to the origin.

        Points are visited in lexicographic order so ties break deterministically.

        Args:
            points: nonempty list of real vectors of a common dimension

        Returns:
            tuple: (beta, convex coefficients in the input order)

        Raises:
            ValueError: empty input or ragged dimensions
        """
        if len(points) == 0:
            raise ValueError("min_norm_point needs at least one point")
        raw = np.asarray(points, dtype=float)
        if raw.ndim != 2:
            raise ValueError("points must share one dimension")
        order = np.lexsort(raw.T[::-1])
        pts = raw[order]
        scale = max(1.0, float(np.max(np.sum(pts * pts, axis=1))))

        corral = [int(np.argmin(np.sum(pts * pts, axis=1)))]
        weights = np.array([1.0])
        for _ in range(max_iter):
            x = weights @ pts[corral]
            scores = pts @ x
            j = int(np.argmin(scores))
            if x @ x - scores[j] <= tol * scale or j in corral:
                break
            previous = (list(corral), weights.copy(), float(x @ x))
            corral.append(j)
            weights = np.append(weights, 0.0)
            while True:
                _, coeffs, _ = NumKit.project_origin_affine(pts[corral])
                if np.all(coeffs > tol):
                    weights = coeffs
                    break
                blocking = coeffs <= tol
                ratios = weights[blocking] / np.maximum(weights[blocking] - coeffs[blocking], 1e-300)
                theta = float(np.clip(np.min(ratios), 0.0, 1.0))
                weights = (1 - theta) * weights + theta * coeffs
                keep = weights > tol
                corral = [c for c, k in zip(corral, keep) if k]
                weights = weights[keep]
                weights = weights / weights.sum()
            x_new = weights @ pts[corral]
            if x_new @ x_new >= previous[2] - tol * scale * 1e-3:
                # no progress: roundoff on a degenerate corral
                corral, weights = previous[0], previous[1]
                break
        else:
            logger.warning(f"min_norm_point hit {max_iter} iterations on {len(pts)} points")

        beta = weights @ pts[corral]
        gap = float(np.min(pts @ beta) - beta @ beta)
        if gap < -1e-9:
            logger.warning(f"min_norm_point KKT certificate failed by {-gap:.3e}")
        full = np.zeros(len(pts))
        full[order[corral]] = weights
        return beta, full

    # ------------------------------------------------------------------ fan-out

    @staticmethod
    def run_chunks(fn: Callable, chunks: Iterable, workers: int = 1) -> list:
        """Apply fn to every chunk, in order; a process pool when workers > 1."""
        chunks = list(chunks)
        if workers <= 1 or len(chunks) <= 1:
            return [fn(c) for c in chunks]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, chunks))


eigh_desc = NumKit.eigh_desc
numerical_rank = NumKit.numerical_rank
hermitian_basis = NumKit.hermitian_basis
tangent_project = NumKit.tangent_project
fd_gradient = NumKit.fd_gradient
real_cosine = NumKit.real_cosine
riemannian_descent = NumKit.riemannian_descent
project_origin_affine = NumKit.project_origin_affine
min_norm_point = NumKit.min_norm_point
run_chunks = NumKit.run_chunks
