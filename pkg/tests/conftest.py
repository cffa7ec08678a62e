import math

import pytest

from pufsim.rng import Rng


def within_sigma(observed: float, p: float, n: int, k: float = 3.0) -> bool:
    """Is a binomial frequency within ``k`` standard deviations of ``p``?"""
    return abs(observed - p) <= k * math.sqrt(p * (1 - p) / n)


@pytest.fixture
def rng():
    return Rng(20240601)
