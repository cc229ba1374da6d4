import numpy as np
import pytest

from qmoment.catalog import catalog
from qmoment.errors import SectorMismatchError
from qmoment.lu_equiv import (
    LUMode, counterexample_pair, counterexample_report, lu_decide, lu_equivalent_bipartite,
    lu_equivalent_two_indistinguishable, lu_necessary,
)
from qmoment.models import LUVerdictKind, SectorKind, SectorSpec
from qmoment.tensor_state import apply_local, make_state, qubits, random_local_unitary, random_state


class TestBipartite:
    """Complete test for two distinguishable parties"""

    @pytest.mark.parametrize("dims", [[2, 2], [2, 3], [3, 3]])
    def test_related_pairs(self, rng, dims):
        sector = SectorSpec(kind=SectorKind.distinguishable, dims=dims)
        for _ in range(200):
            a = random_state(sector, rng)
            b = apply_local(random_local_unitary(sector, rng), a)
            assert lu_equivalent_bipartite(a, b).verdict == LUVerdictKind.equivalent

    def test_independent_pairs(self, rng):
        sector = SectorSpec(kind=SectorKind.distinguishable, dims=[3, 3])
        for _ in range(200):
            verdict = lu_equivalent_bipartite(random_state(sector, rng), random_state(sector, rng))
            assert verdict.verdict == LUVerdictKind.not_equivalent

    def test_evidence(self):
        verdict = lu_equivalent_bipartite(catalog.get("bell"), catalog.get("bell"))
        assert verdict.spectra_a == [pytest.approx([0.5, 0.5])]
        assert "agree" in verdict.evidence

    def test_rejects_three_parties(self):
        with pytest.raises(SectorMismatchError):
            lu_equivalent_bipartite(catalog.get("ghz3"), catalog.get("ghz3"))

    def test_rejects_different_dims(self, rng):
        a = random_state(SectorSpec(kind=SectorKind.distinguishable, dims=[2, 3]), rng)
        b = random_state(SectorSpec(kind=SectorKind.distinguishable, dims=[3, 2]), rng)
        with pytest.raises(SectorMismatchError):
            lu_equivalent_bipartite(a, b)


class TestIndistinguishable:
    """Complete test for two bosons or two fermions"""

    @pytest.mark.parametrize("kind", [SectorKind.bosonic, SectorKind.fermionic])
    def test_related_pairs(self, rng, kind):
        sector = SectorSpec(kind=kind, dims=[4, 2])
        for _ in range(200):
            a = random_state(sector, rng)
            b = apply_local(random_local_unitary(sector, rng), a)
            assert lu_equivalent_two_indistinguishable(a, b).verdict == LUVerdictKind.equivalent

    @pytest.mark.parametrize("kind", [SectorKind.bosonic, SectorKind.fermionic])
    def test_independent_pairs(self, rng, kind):
        sector = SectorSpec(kind=kind, dims=[4, 2])
        for _ in range(200):
            verdict = lu_equivalent_two_indistinguishable(random_state(sector, rng), random_state(sector, rng))
            assert verdict.verdict == LUVerdictKind.not_equivalent

    def test_rejects_distinguishable(self):
        with pytest.raises(SectorMismatchError):
            lu_equivalent_two_indistinguishable(catalog.get("bell"), catalog.get("bell"))


class TestNecessary:
    """Spectra comparison for larger systems"""

    def test_spectra_differ(self):
        verdict = lu_necessary(catalog.get("ghz3"), catalog.get("w3"))
        assert verdict.verdict == LUVerdictKind.not_equivalent

    def test_never_claims_equivalence(self, rng):
        a = random_state(qubits(4), rng)
        b = apply_local(random_local_unitary(a.sector, rng), a)
        assert lu_necessary(a, b).verdict == LUVerdictKind.undecided_necessary_passed

    def test_three_tangle_separates(self):
        x1, w_variant, _ = counterexample_pair()
        verdict = lu_necessary(x1, w_variant)
        assert verdict.verdict == LUVerdictKind.not_equivalent
        assert verdict.spectra_a == [pytest.approx(s) for s in verdict.spectra_b]
        assert verdict.invariants["three_tangle"] == pytest.approx([8 / 9, 0.0], abs=1e-12)

    def test_rejects_different_sectors(self):
        with pytest.raises(SectorMismatchError):
            lu_necessary(catalog.get("ghz3"), catalog.get("ghz4"))


class TestDecide:
    """Mode selection"""

    def test_auto_bipartite(self):
        verdict = lu_decide(catalog.get("bell"), catalog.get("bell"))
        assert verdict.verdict == LUVerdictKind.equivalent
        assert "Schmidt" in verdict.evidence

    def test_auto_fermions(self, rng):
        sector = SectorSpec(kind=SectorKind.fermionic, dims=[4, 2])
        a = random_state(sector, rng)
        assert "one-particle" in lu_decide(a, a).evidence

    def test_auto_multipartite(self):
        verdict = lu_decide(catalog.get("ghz3"), catalog.get("ghz3"))
        assert verdict.verdict == LUVerdictKind.undecided_necessary_passed

    @pytest.mark.parametrize("sector", [
        SectorSpec(kind=SectorKind.distinguishable, dims=[2, 3]),
        SectorSpec(kind=SectorKind.fermionic, dims=[4, 2]),
        qubits(3),
    ])
    def test_swap_and_phase(self, rng, sector):
        """The verdict ignores argument order and global phases"""
        for _ in range(20):
            a = random_state(sector, rng)
            for b in (apply_local(random_local_unitary(sector, rng), a), random_state(sector, rng)):
                verdict = lu_decide(a, b).verdict
                assert lu_decide(b, a).verdict == verdict
                assert lu_decide(make_state(sector, np.exp(1.3j) * a.amplitudes), b).verdict == verdict

    def test_forced_mode(self):
        verdict = lu_decide(catalog.get("bell"), catalog.get("bell"), LUMode.necessary)
        assert verdict.verdict == LUVerdictKind.undecided_necessary_passed

    def test_mode_from_string(self):
        assert lu_decide(catalog.get("bell"), catalog.get("bell"), "bipartite").verdict == LUVerdictKind.equivalent


class TestCounterexample:
    """Equal spectra without LU equivalence"""

    def test_report(self):
        report = counterexample_report()
        assert report["verdict"]["verdict"] == "not_equivalent"
        assert report["x1"]["three_tangle"] == pytest.approx(8 / 9)
        assert report["w_variant"]["three_tangle"] == pytest.approx(0.0, abs=1e-15)

    def test_alternative_x2_has_a_pure_qubit(self):
        """(|000>+|010>+|001>)/sqrt(3) does not share x1's spectra"""
        report = counterexample_report()
        assert report["x2_alt"]["spectra"][0] == pytest.approx([0.5, -0.5])
        assert "spectra differ" in report["x2_alt_verdict"]["evidence"]
