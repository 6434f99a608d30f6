"""
Shared fixtures and hypothesis strategies for the test suite
"""
import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from cube_core import Cover, Hyperplane, load_params

if sys.platform == 'win32':
    sys.stdout.reconfigure(encoding='utf-8')

settings.register_profile(
    'repeatable',
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile('repeatable')

DATA_DIR = Path(__file__).parent / 'data'


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: exhaustive sweeps that take several seconds')


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def exaggerated():
    """Parameters with S = 2 and thresholds rescaled for n in the hundreds"""
    return load_params(DATA_DIR / 'params' / 'exaggerated.json')


@st.composite
def rationals(draw, bound=6, max_denominator=4):
    """
    Small exact rationals

    Args:
        bound: Largest absolute numerator
        max_denominator: Largest denominator

    Returns:
        Fraction
    """
    numerator = draw(st.integers(-bound, bound))
    denominator = draw(st.integers(1, max_denominator))
    return Fraction(numerator, denominator)


@st.composite
def hyperplanes(draw, n, bound=3):
    """Hyperplane in R^n with a non-zero integer normal and a rational offset"""
    normal = draw(st.lists(st.integers(-bound, bound), min_size=n, max_size=n)
                  .filter(lambda xs: any(xs)))
    offset = draw(rationals(bound=2 * bound, max_denominator=2))
    return Hyperplane(tuple(Fraction(a) for a in normal), offset)


@st.composite
def covers(draw, min_n=1, max_n=6, max_k=5):
    """
    Arbitrary family of hyperplanes (not necessarily a cover)

    Returns:
        Cover
    """
    n = draw(st.integers(min_n, max_n))
    k = draw(st.integers(1, max_k))
    planes = draw(st.lists(hyperplanes(n), min_size=k, max_size=k))
    return Cover(n, tuple(planes))


def layered_matrix(n=256):
    """
    Three rows in R^n built so every row and column class is populated

    Row 0 is flat, row 1 loses one heavy entry, row 2 loses two scales and
    column 60 is shared by rows 0 and 1.
    """
    rows = [[0] * n for _ in range(3)]
    for j in range(16):
        rows[0][j] = 1
        rows[1][21 + j] = 1
        rows[2][42 + j] = 1
    rows[1][20] = 9
    rows[2][40] = 100
    rows[2][41] = 10
    rows[0][60] = 1
    rows[1][60] = 1
    return rows
