"""
Kernel Rounding Module for Essential Cover Toolkit
Moves a fractional point inside [-1, 1]^m along null-space directions of a
row set until at most k' coordinates remain fractional, then samples signs
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from cube_core import CoverError, DimensionMismatchError, as_rational_matrix, as_rational_vector, make_rng
from rational_linalg import null_vector

logger = logging.getLogger(__name__)


class RoundingError(CoverError):
    """A precondition or output contract of the rounding failed"""


@dataclass(frozen=True)
class RoundedPoint:
    """Rounded point w and the sorted coordinates where |w_j| < 1"""
    w: tuple
    fractional_coords: tuple

    def to_dict(self):
        return {'w': [str(x) for x in self.w], 'fractional_coords': list(self.fractional_coords)}


def _saturating_step(w, direction, free):
    """Largest t keeping every free coordinate of w + t * direction inside [-1, 1]"""
    steps = []
    for j in free:
        d = direction[j]
        if d > 0:
            steps.append((1 - w[j]) / d)
        elif d < 0:
            steps.append((-1 - w[j]) / d)
    return min(steps)


def _freeze_saturated(w, free):
    return [j for j in free if abs(w[j]) != 1]


def _check_contracts(rows, z, w, k):
    fractional = [j for j, x in enumerate(w) if abs(x) != 1]
    if len(fractional) > k:
        raise RoundingError(f"{len(fractional)} fractional coordinates remain, at most {k} allowed")
    if any(abs(x) > 1 for x in w):
        raise RoundingError("Rounded point left [-1, 1]")
    for i, row in enumerate(rows):
        before = sum((a * x for a, x in zip(row, z)), Fraction(0))
        after = sum((a * x for a, x in zip(row, w)), Fraction(0))
        if before != after:
            raise RoundingError(f"Inner product with row {i} changed")


def round_preserving(rows, z):
    """
    Round z towards the cube while keeping every <row, z> fixed

    Args:
        rows: k' x m rational matrix, k' < m
        z: Rational point with |z_j| <= 1

    Returns:
        RoundedPoint
    """
    matrix = as_rational_matrix(rows)
    z = as_rational_vector(z)
    k, m = len(matrix), len(z)
    if any(len(row) != m for row in matrix):
        raise DimensionMismatchError(f"Rows must have {m} entries")
    if k >= m:
        raise RoundingError(f"Need fewer rows than coordinates, got {k} rows for {m}")
    if any(abs(x) > 1 for x in z):
        raise RoundingError("Starting point lies outside [-1, 1]^m")

    w = list(z)
    free = _freeze_saturated(w, range(m))
    # every pass saturates at least one coordinate
    for _ in range(m + 1):
        if len(free) <= k:
            break
        restricted = [[row[j] for j in free] for row in matrix]
        kernel = null_vector(restricted, len(free))
        if kernel is None:
            raise RoundingError("No null-space direction on the free coordinates")
        direction = {j: kernel[pos] for pos, j in enumerate(free)}
        t = _saturating_step(w, direction, free)
        for j in free:
            w[j] += t * direction[j]
        free = _freeze_saturated(w, free)
    else:
        raise RoundingError("Rounding did not converge")
    _check_contracts(matrix, z, w, k)
    return RoundedPoint(tuple(w), tuple(free))


def sample_rounding_batch(w, seed, count):
    """count independent sign vectors with P(x_j = +1) = (1 + w_j) / 2"""
    rng = make_rng(seed)
    probabilities = np.array([float((1 + Fraction(x)) / 2) for x in w])
    draws = rng.random((count, len(probabilities)))
    return np.where(draws < probabilities[None, :], 1, -1).astype(np.int64)


def sample_rounding(w, seed):
    """
    One sign vector with P(x_j = +1) = (1 + w_j) / 2

    Coordinates with w_j = +-1 are returned unchanged.

    Args:
        w: Point of [-1, 1]^m
        seed: 64-bit seed of the PCG64 stream

    Returns:
        tuple of +-1
    """
    return tuple(int(x) for x in sample_rounding_batch(w, seed, 1)[0])
