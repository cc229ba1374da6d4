import numpy as np
import pytest

from qmoment.config import settings


@pytest.fixture
def rng():
    """Fresh generator on the fixed default seed."""
    return np.random.default_rng(settings.SEED)
