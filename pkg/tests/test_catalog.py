from fractions import Fraction

import numpy as np
import pytest

from qmoment.catalog import catalog
from qmoment.critical_atlas import is_critical
from qmoment.errors import UnknownStateError
from qmoment.momentum_map import mean_linear_entropy, momentum, psi
from qmoment.tensor_state import from_terms, reduced_density_matrix


@pytest.fixture(autouse=True)
def restore_catalog():
    """Registrations do not leak between tests"""
    saved = dict(catalog.states)
    yield
    catalog.states = saved


class TestCatalog:
    """Named reference states"""

    def test_names(self):
        names = catalog.names()
        assert names == sorted(names)
        for name in ("bell", "ghz3", "w3", "x1", "x2_alt", "phi2_alt", "zero3"):
            assert name in names

    def test_unknown(self):
        with pytest.raises(UnknownStateError) as e:
            catalog.get("nope")
        assert "ghz3" in str(e.value)

    def test_register(self):
        state = catalog.register("custom", from_terms(2, {"01": 1, "10": 1}))
        assert catalog.get("custom") is state
        assert "custom" in catalog.names()

    def test_registration_is_reset(self):
        assert "custom" not in catalog.names()

    def test_states_are_normalized(self):
        for name in catalog.names():
            assert np.linalg.norm(catalog.get(name).amplitudes) == pytest.approx(1.0, abs=1e-12), name


class TestFourQubitCriticalStates:
    """The nine listed four-qubit critical states"""

    def test_nine_rows(self):
        assert len(catalog.critical_state_rows()) == 9

    @pytest.mark.parametrize("row", catalog.critical_state_rows(), ids=lambda r: r.name)
    def test_diagonals(self, row):
        blocks = momentum(row.state).blocks
        for block, (low, high) in zip(blocks, row.expected_diagonals):
            assert block[0, 0].real == pytest.approx(low, abs=1e-10)
            assert block[1, 1].real == pytest.approx(high, abs=1e-10)
            assert abs(block[0, 1]) < 1e-10

    @pytest.mark.parametrize("row", catalog.critical_state_rows(), ids=lambda r: r.name)
    def test_entropy(self, row):
        num, den = row.expected_entropy
        assert mean_linear_entropy(row.state) == pytest.approx(num / den, abs=1e-12)

    @pytest.mark.parametrize("row", catalog.critical_state_rows(), ids=lambda r: r.name)
    def test_critical(self, row):
        check = is_critical(row.state)
        assert check.critical
        assert check.residual < 1e-10

    def test_entropy_fractions_are_reduced(self):
        for row in catalog.critical_state_rows():
            num, den = row.expected_entropy
            frac = Fraction(num, den)
            assert (frac.numerator, frac.denominator) == (num, den)

    def test_alternative_phi2_differs(self):
        """The alternative phi2 expansion puts 1/6 on qubit 0, not 2/3"""
        rho = reduced_density_matrix(catalog.get("phi2_alt"), 0).matrix
        assert rho[1, 1].real == pytest.approx(1 / 6)
        assert momentum(catalog.get("phi2_alt")).blocks[0][1, 1].real == pytest.approx(-1 / 3)
        assert psi(catalog.get("phi2_alt")).qubit_lambdas != pytest.approx(
            psi(catalog.get("phi2")).qubit_lambdas, abs=1e-6)


class TestThreeQubitStates:
    def test_w_variants_share_spectra(self):
        a = psi(catalog.get("w3")).qubit_lambdas
        b = psi(catalog.get("w3_single")).qubit_lambdas
        assert a == pytest.approx(b)
        assert a == pytest.approx([1 / 6] * 3)

    def test_x1(self):
        assert psi(catalog.get("x1")).qubit_lambdas == pytest.approx([1 / 6] * 3)
