"""
Tests for null-space rounding and the sign sampler
"""
from fractions import Fraction

import numpy as np
import pytest

import kernel_rounding
from kernel_rounding import (
    RoundedPoint,
    RoundingError,
    round_preserving,
    sample_rounding,
    sample_rounding_batch,
)
from rational_linalg import null_space, rank


def _random_case(rng):
    m = int(rng.integers(2, 13))
    k = int(rng.integers(1, min(5, m - 1) + 1))
    rows = [[Fraction(int(rng.integers(-4, 5))) for _ in range(m)] for _ in range(k)]
    z = []
    for _ in range(m):
        roll = rng.random()
        if roll < 0.15:
            z.append(Fraction(1 if rng.random() < 0.5 else -1))
        else:
            z.append(Fraction(int(rng.integers(-12, 13)), 12))
    return rows, z


def _inner(row, x):
    return sum((a * b for a, b in zip(row, x)), Fraction(0))


def test_null_space_is_a_kernel_basis():
    rows = [[1, 2, 3, 4], [2, 4, 6, 8], [0, 1, 1, 0]]
    basis = null_space(rows, 4)
    assert len(basis) == 4 - rank(rows)
    for x in basis:
        assert all(_inner(row, x) == 0 for row in rows)


def test_five_hundred_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(500):
        rows, z = _random_case(rng)
        rounded = round_preserving(rows, z)
        w, fractional = rounded.w, rounded.fractional_coords
        assert all(abs(x) <= 1 for x in w)
        assert len(fractional) <= len(rows)
        assert list(fractional) == [j for j, x in enumerate(w) if abs(x) != 1]
        for row in rows:
            assert _inner(row, w) == _inner(row, z)


def test_already_integral_point_is_untouched():
    rounded = round_preserving([[1, 1, 0]], [1, -1, 1])
    assert rounded == RoundedPoint((1, -1, 1), ())
    assert rounded.to_dict() == {'w': ['1', '-1', '1'], 'fractional_coords': []}


def test_preconditions():
    with pytest.raises(RoundingError):
        round_preserving([[1, 0], [0, 1]], [0, 0])
    with pytest.raises(RoundingError):
        round_preserving([[1, 1, 1]], [Fraction(3, 2), 0, 0])


def test_skipping_the_freeze_is_detected(monkeypatch):
    monkeypatch.setattr(kernel_rounding, '_freeze_saturated', lambda w, free: list(free))
    with pytest.raises(RoundingError):
        round_preserving([[1, 1, 1]], [Fraction(1, 2), 0, 0])


def test_skipping_the_clamp_is_detected(monkeypatch):
    def overshoot(w, direction, free):
        steps = [abs((1 - w[j]) / direction[j]) for j in free if direction[j]]
        return max(steps)

    monkeypatch.setattr(kernel_rounding, '_saturating_step', overshoot)
    with pytest.raises(RoundingError):
        round_preserving([[1, 1, 1]], [Fraction(1, 2), 0, 0])


def test_sampling_keeps_saturated_coordinates():
    w = (Fraction(1), Fraction(-1), Fraction(0), Fraction(1, 2))
    for seed in range(20):
        x = sample_rounding(w, seed)
        assert x[0] == 1 and x[1] == -1
        assert set(x) <= {-1, 1}


def test_sampling_is_seeded():
    w = (Fraction(1, 3),) * 8
    assert sample_rounding(w, 42) == sample_rounding(w, 42)


def test_sampling_mean_matches_the_point():
    w = (Fraction(1, 2), Fraction(-3, 4), Fraction(0))
    draws = sample_rounding_batch(w, 5, 40_000)
    assert draws.mean(axis=0) == pytest.approx([0.5, -0.75, 0.0], abs=0.02)


def test_sampled_marginals_over_many_draws():
    w = (Fraction(1, 2), Fraction(-1, 3), Fraction(0), Fraction(1), Fraction(-1))
    draws = sample_rounding_batch(w, 11, 100_000)
    assert draws.mean(axis=0) == pytest.approx([float(x) for x in w], abs=0.015)
    assert set(np.unique(draws)) <= {-1, 1}


def test_sampled_variance_at_one_half():
    draws = sample_rounding_batch((Fraction(1, 2),), 12, 100_000)[:, 0]
    assert draws.var() == pytest.approx(1 - 0.25, abs=0.01)
