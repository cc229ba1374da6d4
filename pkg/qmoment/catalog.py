from math import sqrt
from typing import Dict, List

from qmoment.errors import UnknownStateError
from qmoment.models import PureState, CriticalStateRow
from qmoment.tensor_state import from_terms


def _ghz(n: int) -> PureState:
    return from_terms(n, {"0" * n: 1, "1" * n: 1})


def _reference_states() -> Dict[str, PureState]:
    s3 = sqrt(3)
    return {
        "bell": from_terms(2, {"00": 1, "11": 1}),
        "ghz3": _ghz(3),
        "ghz4": _ghz(4),
        "w3": from_terms(3, {"011": 1, "101": 1, "110": 1}),
        "w3_single": from_terms(3, {"100": 1, "010": 1, "001": 1}),
        "w4": from_terms(4, {"1110": 1, "1101": 1, "1011": 1, "0111": 1}),
        "x1": from_terms(3, {"000": sqrt(2 / 3), "111": sqrt(1 / 3)}),
        "x2_alt": from_terms(3, {"000": 1, "010": 1, "001": 1}),
        "sep4": from_terms(4, {"1111": 1}),
        "trisep": from_terms(4, {"1100": 1, "1111": 1}),
        "w3_one": from_terms(4, {"1101": 1, "1011": 1, "0111": 1}),
        "bisep": from_terms(4, {"1000": 1, "1111": 1}),
        "phi3": from_terms(4, {"1101": sqrt(3 / 10), "1110": sqrt(3 / 10), "0011": sqrt(2 / 5)}),
        "phi2": from_terms(4, {
            "1100": 0.5, "1010": -0.5, "1101": 1 / (2 * s3), "1011": 1 / (2 * s3), "0111": -1 / s3,
        }),
        "phi2_alt": from_terms(4, {
            "1011": 1 / (2 * s3), "1110": 1 / (2 * s3), "0101": -0.5, "0011": -0.5, "0110": 1 / s3,
        }),
        "phi1": from_terms(4, {
            "0011": sqrt(3 / 14), "0101": sqrt(3 / 14), "1001": sqrt(3 / 14), "1110": sqrt(5 / 14),
        }),
        "zero3": from_terms(3, {"000": 1}),
    }


# (catalog name, shifted-diagonal magnitude per qubit, E as numerator / denominator)
_FOUR_QUBIT_CRITICAL = [
    ("sep4", (1 / 2, 1 / 2, 1 / 2, 1 / 2), (0, 1)),
    ("trisep", (1 / 2, 1 / 2, 0, 0), (1, 4)),
    ("w3_one", (1 / 6, 1 / 6, 1 / 6, 1 / 2), (1, 3)),
    ("bisep", (1 / 2, 0, 0, 0), (3, 8)),
    ("w4", (1 / 4, 1 / 4, 1 / 4, 1 / 4), (3, 8)),
    ("phi3", (1 / 10, 1 / 10, 1 / 5, 1 / 5), (9, 20)),
    ("phi2", (1 / 6, 1 / 6, 1 / 6, 0), (11, 24)),
    ("phi1", (1 / 14, 1 / 14, 1 / 14, 1 / 7), (27, 56)),
    ("ghz4", (0, 0, 0, 0), (1, 2)),
]


class StateCatalog:
    """Named reference states, kept in memory."""

    def __init__(self):
        self.states: Dict[str, PureState] = _reference_states()

    def register(self, name: str, state: PureState) -> PureState:
        self.states[name] = state
        return state

    def get(self, name: str) -> PureState:
        if name not in self.states:
            raise UnknownStateError(f"unknown state '{name}', known: {', '.join(self.names())}")
        return self.states[name]

    def names(self) -> List[str]:
        return sorted(self.states)

    def critical_state_rows(self) -> List[CriticalStateRow]:
        """The nine four-qubit critical states with their listed diagonals diag(-x, x) and E."""
        return [
            CriticalStateRow(
                name=name,
                state=self.get(name),
                expected_diagonals=[(-x, x) for x in magnitudes],
                expected_entropy=entropy,
            )
            for name, magnitudes, entropy in _FOUR_QUBIT_CRITICAL
        ]


# global instance
catalog = StateCatalog()
