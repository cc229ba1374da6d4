import numpy as np
import pytest

from qmoment.momentum_map import norm_mu_squared
from qmoment.numkit import (
    NumKit, eigh_desc, fd_gradient, hermitian_basis, min_norm_point, numerical_rank, project_origin_affine,
    real_cosine, riemannian_descent, run_chunks, tangent_project,
)
from qmoment.slocc_flow import descent_direction
from qmoment.tensor_state import make_state, qubits, random_state


def _square(x):
    return x * x


class TestSpectra:
    """Hermitian eigendecomposition and rank"""

    def test_eigh_desc_order(self, rng):
        g = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        w, u = eigh_desc(g + g.conj().T)
        assert np.all(np.diff(w) <= 0)
        np.testing.assert_allclose(u @ np.diag(w) @ u.conj().T, g + g.conj().T, atol=1e-12)

    def test_numerical_rank(self):
        m = np.diag([1.0, 1e-3, 1e-12])
        assert numerical_rank(m) == 2
        assert numerical_rank(np.zeros((3, 3))) == 0
        assert numerical_rank(np.zeros((0, 3))) == 0

    def test_hermitian_basis_orthonormal(self):
        for n in (2, 3, 4):
            basis = hermitian_basis(n)
            assert len(basis) == n * n - 1
            gram = np.array([[np.trace(a @ b) for b in basis] for a in basis])
            np.testing.assert_allclose(gram, np.eye(n * n - 1), atol=1e-14)
            for x in basis:
                assert abs(np.trace(x)) < 1e-15
                np.testing.assert_allclose(x, x.conj().T)


class TestSphereGeometry:
    """Tangent spaces and the finite-difference oracle"""

    def test_tangent_project(self, rng):
        v = random_state(qubits(2), rng).amplitudes
        w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert abs(np.vdot(v, tangent_project(v, w))) < 1e-14

    def test_tangent_frame(self, rng):
        v = random_state(qubits(2), rng).amplitudes
        frame = NumKit.tangent_frame(v)
        # orthogonal to v and i v
        assert frame.shape == (4, 6)
        real_gram = np.real(frame.conj().T @ frame)
        np.testing.assert_allclose(real_gram, np.eye(6), atol=1e-12)

    def test_descent_direction_against_finite_differences(self, rng):
        """The analytic direction is minus the gradient of |mu|^2"""
        for n in (3, 4, 5):
            sector = qubits(n)
            for _ in range(5):
                state = random_state(sector, rng)

                def f(v):
                    return norm_mu_squared(make_state(sector, v))

                grad = fd_gradient(f, state.amplitudes)
                assert real_cosine(descent_direction(state), grad) < -0.999

    def test_real_cosine_zero_vector(self):
        assert real_cosine(np.zeros(2), np.ones(2)) == 0.0


class TestRiemannianDescent:
    """Projected gradient descent on the sphere"""

    def test_minimizes_rayleigh_quotient(self, rng):
        h = np.diag([3.0, 1.0, -2.0, 0.5])

        def objective(v):
            hv = h @ v
            return float(np.real(np.vdot(v, hv))), 2 * tangent_project(v, hv)

        v0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        result = riemannian_descent(objective, v0, grad_tol=1e-10)
        assert result.converged
        assert result.value == pytest.approx(-2.0, abs=1e-9)
        assert all(b <= a for a, b in zip(result.history, result.history[1:]))

    def test_support_mask(self, rng):
        h = np.diag([3.0, 1.0, -2.0, 0.5])
        support = np.array([True, True, False, True])

        def objective(v):
            hv = h @ v
            return float(np.real(np.vdot(v, hv))), 2 * tangent_project(v, hv)

        v0 = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) * support
        result = riemannian_descent(objective, v0, grad_tol=1e-10, support=support)
        assert abs(result.point[2]) < 1e-14
        assert result.value == pytest.approx(0.5, abs=1e-9)


class TestConvexGeometry:
    """Affine projections and Wolfe's minimum-norm point"""

    def test_project_origin_affine(self):
        x, coeffs, independent = project_origin_affine(np.array([[1.0, 1.0], [1.0, -1.0]]))
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(coeffs, [0.5, 0.5], atol=1e-14)
        assert independent

    def test_affinely_dependent(self):
        _, _, independent = project_origin_affine(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))
        assert not independent

    def test_origin_inside(self):
        beta, coeffs = min_norm_point([[1, 0], [-1, 1], [-1, -1]])
        np.testing.assert_allclose(beta, [0, 0], atol=1e-12)
        assert coeffs.sum() == pytest.approx(1.0)
        assert np.all(coeffs >= 0)

    def test_segment(self):
        beta, coeffs = min_norm_point([[2, 1], [2, -1], [3, 0]])
        np.testing.assert_allclose(beta, [2, 0], atol=1e-12)
        np.testing.assert_allclose(coeffs, [0.5, 0.5, 0.0], atol=1e-12)

    def test_single_point(self):
        beta, coeffs = min_norm_point([[0.5, -0.5]])
        np.testing.assert_allclose(beta, [0.5, -0.5])
        np.testing.assert_allclose(coeffs, [1.0])

    def test_kkt_certificate(self, rng):
        for _ in range(30):
            pts = rng.standard_normal((12, 4)) + 1.5
            beta, coeffs = min_norm_point(pts)
            assert np.min(pts @ beta) >= beta @ beta - 1e-9
            np.testing.assert_allclose(coeffs @ pts, beta, atol=1e-9)

    def test_qubit_weights(self):
        """The W3 weights project to (1/6, 1/6, 1/6)"""
        weights = [[0.5, -0.5, -0.5], [-0.5, 0.5, -0.5], [-0.5, -0.5, 0.5]]
        beta, _ = min_norm_point(weights)
        np.testing.assert_allclose(beta, [-1 / 6, -1 / 6, -1 / 6], atol=1e-12)

    def test_duplicates_and_order(self):
        a, _ = min_norm_point([[1, 1], [1, -1], [1, 1]])
        b, _ = min_norm_point([[1, -1], [1, 1]])
        np.testing.assert_allclose(a, b, atol=1e-14)

    def test_permutation_and_hull_points(self, rng):
        for _ in range(10):
            pts = rng.standard_normal((8, 3)) + 1.0
            beta, _ = min_norm_point(pts)
            shuffled, _ = min_norm_point(pts[rng.permutation(len(pts))])
            np.testing.assert_allclose(shuffled, beta, atol=1e-9)
            inner = rng.dirichlet(np.ones(len(pts))) @ pts
            extended, _ = min_norm_point(np.vstack([pts, inner]))
            np.testing.assert_allclose(extended, beta, atol=1e-9)

    def test_empty(self):
        with pytest.raises(ValueError):
            min_norm_point([])


class TestRunChunks:
    def test_sequential(self):
        assert run_chunks(_square, [1, 2, 3]) == [1, 4, 9]

    def test_pool_keeps_order(self):
        assert run_chunks(_square, [1, 2, 3, 4], workers=2) == [1, 4, 9, 16]
