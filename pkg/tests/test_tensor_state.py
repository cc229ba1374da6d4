import json

import numpy as np
import pytest
from pydantic import ValidationError

from qmoment.errors import AnnihilationError, SectorMismatchError, StateValidationError
from qmoment.models import LocalOperator, PureState, SectorKind, SectorSpec
from qmoment.tensor_state import (
    apply_local, basis_state, fidelity, from_pure, from_terms, load_density_json, load_state_json, make_density,
    make_state, partial_trace_density, qubits, random_density, random_local_unitary, random_state, random_unitary,
    reduced_blocks, reduced_density_matrix,
)


class TestMakeState:
    """Construction and validation of pure states"""

    def test_normalizes(self):
        """Amplitudes are divided by their norm"""
        state = make_state(qubits(2), [1, 0, 0, 1])
        np.testing.assert_allclose(state.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2))

    def test_wrong_length(self):
        with pytest.raises(StateValidationError):
            make_state(qubits(2), [1, 0, 0])

    def test_zero_vector(self):
        with pytest.raises(StateValidationError, match="zero vector"):
            make_state(qubits(2), [0, 0, 0, 0])

    def test_non_finite(self):
        with pytest.raises(StateValidationError):
            make_state(qubits(2), [np.nan, 1, 0, 0])

    def test_symmetric_input_has_no_fermionic_part(self):
        """|00> of two fermions in two modes antisymmetrizes to zero"""
        sector = SectorSpec(kind=SectorKind.fermionic, dims=[2, 2])
        with pytest.raises(StateValidationError, match="antisymmetric"):
            make_state(sector, [1, 0, 0, 0])

    def test_fermionic_embedded(self):
        """|01> antisymmetrizes to (|01> - |10>)/sqrt(2)"""
        sector = SectorSpec(kind=SectorKind.fermionic, dims=[2, 2])
        state = make_state(sector, [0, 1, 0, 0])
        np.testing.assert_allclose(state.amplitudes, np.array([0, 1, -1, 0]) / np.sqrt(2), atol=1e-15)

    def test_bosonic_occupation_basis(self):
        """Occupation coefficients over sorted mode tuples (0,0), (0,1), (1,1)"""
        sector = SectorSpec(kind=SectorKind.bosonic, dims=[2, 2])
        state = make_state(sector, [0, 1, 0])
        np.testing.assert_allclose(state.amplitudes, np.array([0, 1, 1, 0]) / np.sqrt(2), atol=1e-15)

    def test_pure_state_rejects_unnormalized(self):
        with pytest.raises(ValidationError):
            PureState(sector=qubits(2), amplitudes=[1, 1, 0, 0])

    def test_pure_state_rejects_missing_symmetry(self):
        sector = SectorSpec(kind=SectorKind.bosonic, dims=[2, 2])
        with pytest.raises(ValidationError, match="exchange symmetry"):
            PureState(sector=sector, amplitudes=[0, 1, 0, 0])

    def test_too_many_fermions(self):
        with pytest.raises(ValidationError):
            SectorSpec(kind=SectorKind.fermionic, dims=[2, 3])

    def test_from_terms_bit_order(self):
        """Slot 0 is the most significant bit"""
        state = from_terms(3, {"100": 1})
        assert state.amplitudes[4] == 1
        np.testing.assert_allclose(state.amplitudes, basis_state(qubits(3), [1, 0, 0]).amplitudes)


class TestReducedDensityMatrix:
    """Partial traces of pure states"""

    def test_bell_is_maximally_mixed(self):
        bell = from_terms(2, {"00": 1, "11": 1})
        for k in range(2):
            np.testing.assert_allclose(reduced_density_matrix(bell, k).matrix, np.eye(2) / 2, atol=1e-15)

    def test_product_state(self):
        state = from_terms(2, {"01": 1})
        np.testing.assert_allclose(reduced_density_matrix(state, 0).matrix, np.diag([1, 0]), atol=1e-15)
        np.testing.assert_allclose(reduced_density_matrix(state, 1).matrix, np.diag([0, 1]), atol=1e-15)

    def test_index_out_of_range(self):
        with pytest.raises(StateValidationError):
            reduced_density_matrix(from_terms(2, {"00": 1}), 2)

    def test_identical_particles_have_one_block(self):
        sector = SectorSpec(kind=SectorKind.fermionic, dims=[4, 2])
        state = make_state(sector, [1, 0, 0, 0, 0, 0])
        assert len(reduced_blocks(state)) == 1
        with pytest.raises(StateValidationError):
            reduced_density_matrix(state, 1)
        # Slater determinant of modes 0 and 1: one-particle matrix diag(1/2, 1/2, 0, 0)
        np.testing.assert_allclose(reduced_blocks(state)[0], np.diag([0.5, 0.5, 0, 0]), atol=1e-15)

    def test_trace_and_hermiticity(self, rng):
        state = random_state(SectorSpec(kind=SectorKind.distinguishable, dims=[2, 3, 4]), rng)
        for k, n in enumerate([2, 3, 4]):
            rho = reduced_density_matrix(state, k).matrix
            assert rho.shape == (n, n)
            assert abs(np.trace(rho) - 1) < 1e-12
            assert np.allclose(rho, rho.conj().T)
            assert np.min(np.linalg.eigvalsh(rho)) > -1e-12

    def test_two_fermions_in_four_modes_pair_up(self, rng):
        """Two-fermion one-particle spectra are doubly degenerate"""
        sector = SectorSpec(kind=SectorKind.fermionic, dims=[4, 2])
        for _ in range(5):
            ev = np.sort(np.linalg.eigvalsh(reduced_blocks(random_state(sector, rng))[0]))
            assert ev[0] == pytest.approx(ev[1], abs=1e-10)
            assert ev[2] == pytest.approx(ev[3], abs=1e-10)

    def test_bipartite_spectra_agree(self, rng):
        state = random_state(SectorSpec(kind=SectorKind.distinguishable, dims=[2, 3]), rng)
        a = np.linalg.eigvalsh(reduced_density_matrix(state, 0).matrix)[::-1]
        b = np.linalg.eigvalsh(reduced_density_matrix(state, 1).matrix)[::-1]
        np.testing.assert_allclose(b[:2], a, atol=1e-12)
        assert b[2] == pytest.approx(0, abs=1e-12)

    def test_phase_and_traced_out_unitaries(self, rng):
        sector = SectorSpec(kind=SectorKind.distinguishable, dims=[2, 3, 4])
        state = random_state(sector, rng)
        rho = reduced_density_matrix(state, 0).matrix
        phased = make_state(sector, np.exp(0.7j) * state.amplitudes)
        np.testing.assert_allclose(reduced_density_matrix(phased, 0).matrix, rho, atol=1e-12)
        others = LocalOperator(factors=[np.eye(2), random_unitary(3, rng), random_unitary(4, rng)])
        np.testing.assert_allclose(reduced_density_matrix(apply_local(others, state), 0).matrix, rho, atol=1e-12)


class TestApplyLocal:
    """Product operators acting on states"""

    def test_unitary_preserves_spectra(self, rng):
        sector = qubits(3)
        state = random_state(sector, rng)
        moved = apply_local(random_local_unitary(sector, rng), state)
        for a, b in zip(reduced_blocks(state), reduced_blocks(moved)):
            np.testing.assert_allclose(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b), atol=1e-12)

    def test_annihilation(self):
        projector = np.diag([0.0, 1.0])
        op = LocalOperator(factors=[projector, np.eye(2)])
        with pytest.raises(AnnihilationError):
            apply_local(op, from_terms(2, {"00": 1}))

    def test_dimension_mismatch(self):
        op = LocalOperator(factors=[np.eye(3), np.eye(2)])
        with pytest.raises(SectorMismatchError):
            apply_local(op, from_terms(2, {"00": 1}))

    def test_identical_particles_take_one_factor(self, rng):
        sector = SectorSpec(kind=SectorKind.bosonic, dims=[3, 2])
        state = random_state(sector, rng)
        moved = apply_local(random_local_unitary(sector, rng), state)
        assert moved.sector == sector

    def test_identical_particles_reject_different_factors(self, rng):
        sector = SectorSpec(kind=SectorKind.bosonic, dims=[2, 2])
        state = random_state(sector, rng)
        with pytest.raises(SectorMismatchError):
            apply_local(LocalOperator(factors=[np.eye(2), np.diag([1.0, 2.0])]), state)

    def test_non_square_factor(self):
        with pytest.raises(ValidationError):
            LocalOperator(factors=[np.ones((2, 3))])

    def test_fidelity_of_phase(self):
        state = from_terms(2, {"00": 1, "11": 1})
        phased = make_state(state.sector, 1j * state.amplitudes)
        assert fidelity(state, phased) == pytest.approx(1.0)


class TestDensityMatrix:
    """Mixed states"""

    def test_partial_trace_of_bell(self):
        rho = from_pure(from_terms(2, {"00": 1, "11": 1}))
        np.testing.assert_allclose(partial_trace_density(rho, 0).matrix, np.eye(2) / 2, atol=1e-15)

    def test_partial_trace_matches_pure_reduction(self, rng):
        state = random_state(SectorSpec(kind=SectorKind.distinguishable, dims=[2, 3, 2]), rng)
        rho = from_pure(state)
        for k in range(3):
            np.testing.assert_allclose(
                partial_trace_density(rho, k).matrix, reduced_density_matrix(state, k).matrix, atol=1e-12
            )

    def test_random_density(self, rng):
        rho = random_density([2, 2], rng, rank=2)
        assert abs(np.trace(rho.matrix) - 1) < 1e-12
        assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == 2

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(StateValidationError, match="negative eigenvalue"):
            make_density([2], np.diag([1.5, -0.5]))

    def test_rejects_wrong_trace(self):
        with pytest.raises(StateValidationError, match="trace"):
            make_density([2], np.diag([0.5, 0.4]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(StateValidationError, match="Hermitian"):
            make_density([2], np.array([[0.5, 0.1], [0.0, 0.5]]))


class TestStateFiles:
    """JSON wire formats"""

    def test_load_state(self):
        text = json.dumps({
            "sector": {"kind": "distinguishable", "dims": [2, 2]},
            "amplitudes": [[1, 0], [0, 0], [0, 0], [0, 1]],
        })
        state = load_state_json(text)
        np.testing.assert_allclose(state.amplitudes, np.array([1, 0, 0, 1j]) / np.sqrt(2))

    def test_round_trip_through_file_model(self, rng):
        state = random_state(qubits(3), rng)
        again = load_state_json(state.to_file().model_dump_json())
        np.testing.assert_allclose(again.amplitudes, state.amplitudes, atol=1e-15)

    def test_malformed_json(self):
        with pytest.raises(json.JSONDecodeError):
            load_state_json('{"sector": ')

    def test_missing_field(self):
        with pytest.raises(ValidationError) as e:
            load_state_json(json.dumps({"sector": {"kind": "distinguishable", "dims": [2]}}))
        assert e.value.errors()[0]["loc"] == ("amplitudes",)

    def test_load_density(self):
        text = json.dumps({"dims": [2], "matrix": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]]})
        np.testing.assert_allclose(load_density_json(text).matrix, np.eye(2) / 2)
