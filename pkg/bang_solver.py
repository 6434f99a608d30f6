"""
Bang Solver Module for Essential Cover Toolkit
Sign vectors eps with |theta (M eps)_i - gamma_i| >= theta for every i,
found by single-flip ascent on a quadratic objective in exact arithmetic
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from fractions import Fraction

from cube_core import CoverError, CoverFormatError, as_rational_matrix, as_rational_vector, to_rational

logger = logging.getLogger(__name__)


class BangInstanceError(CoverError, ValueError):
    """Matrix not symmetric with unit diagonal, or negative theta"""


class BangSolverError(CoverError):
    """The ascent ran past its step cap"""


@dataclass(frozen=True)
class BangInstance:
    M: tuple
    gamma: tuple
    theta: Fraction

    def __post_init__(self):
        M = tuple(tuple(row) for row in as_rational_matrix(self.M))
        gamma = as_rational_vector(self.gamma)
        theta = to_rational(self.theta)
        k = len(M)
        if k == 0 or any(len(row) != k for row in M):
            raise BangInstanceError("M must be a non-empty square matrix")
        if len(gamma) != k:
            raise BangInstanceError(f"gamma has {len(gamma)} entries, M is {k}x{k}")
        for i in range(k):
            if M[i][i] != 1:
                raise BangInstanceError(f"M[{i}][{i}] = {M[i][i]}, expected 1")
            for j in range(i):
                if M[i][j] != M[j][i]:
                    raise BangInstanceError(f"M is not symmetric at ({i}, {j})")
        if theta < 0:
            raise BangInstanceError(f"theta must be non-negative, got {theta}")
        object.__setattr__(self, 'M', M)
        object.__setattr__(self, 'gamma', gamma)
        object.__setattr__(self, 'theta', theta)

    @property
    def k(self):
        return len(self.M)

    def to_dict(self):
        return {
            'M': [[str(a) for a in row] for row in self.M],
            'gamma': [str(a) for a in self.gamma],
            'theta': str(self.theta),
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or not {'M', 'gamma', 'theta'} <= set(data):
            raise CoverFormatError("Bang instance JSON needs 'M', 'gamma' and 'theta'")
        return cls(data['M'], data['gamma'], data['theta'])


def load_bang_instance(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        raise CoverFormatError(f"Cannot read Bang instance {path}: {exc}") from exc
    return BangInstance.from_dict(data)


@dataclass(frozen=True)
class AscentResult:
    epsilon: tuple
    flips: int
    objectives: tuple


def _matvec(M, eps):
    return [sum((a * e for a, e in zip(row, eps) if a), Fraction(0)) for row in M]


def bang_objective(M, gamma, theta, eps):
    """theta * eps^T M eps - 2 <gamma, eps>"""
    Me = _matvec(M, eps)
    quad = sum((e * v for e, v in zip(eps, Me)), Fraction(0))
    return theta * quad - 2 * sum((g * e for g, e in zip(gamma, eps)), Fraction(0))


def bang_margins(M, gamma, theta, eps):
    """theta (M eps)_i - gamma_i for every i"""
    return [theta * v - g for v, g in zip(_matvec(M, eps), gamma)]


def flip_ascent(M, gamma, theta, max_flips=None):
    """
    Single-flip ascent from the all-ones vector, lowest improving index first

    At the fixed point eps_i (theta (M eps)_i - gamma_i) >= theta M_ii for
    every i, which works for any symmetric M with positive diagonal.

    Args:
        M: Symmetric rational matrix
        gamma: Rational vector
        theta: Non-negative rational
        max_flips: Step cap (default 64 k^2 + 1024)

    Returns:
        AscentResult
    """
    k = len(M)
    theta = Fraction(theta)
    eps = [1] * k
    Me = _matvec(M, eps)
    value = bang_objective(M, gamma, theta, eps)
    objectives = [value]
    cap = max_flips if max_flips is not None else 64 * k * k + 1024
    flips = 0
    while True:
        improved = False
        for i in range(k):
            gain = -4 * eps[i] * (theta * Me[i] - gamma[i]) + 4 * theta * M[i][i]
            if gain > 0:
                for j in range(k):
                    if M[j][i]:
                        Me[j] -= 2 * eps[i] * M[j][i]
                eps[i] = -eps[i]
                value += gain
                objectives.append(value)
                flips += 1
                improved = True
                break
        if not improved:
            break
        if flips > cap:
            raise BangSolverError(f"Flip ascent exceeded {cap} flips for k={k}")
    return AscentResult(tuple(eps), flips, tuple(objectives))


def solve_bang(inst):
    """
    Sign vector meeting every margin of the instance

    Args:
        inst: BangInstance

    Returns:
        tuple of +-1
    """
    result = flip_ascent(inst.M, inst.gamma, inst.theta)
    logger.debug("Bang ascent finished after %d flips", result.flips)
    return result.epsilon


def verify_bang(inst, eps):
    """True iff |theta (M eps)_i - gamma_i| >= theta for every i"""
    if len(eps) != inst.k or any(e not in (-1, 1) for e in eps):
        return False
    return all(abs(m) >= inst.theta for m in bang_margins(inst.M, inst.gamma, inst.theta, eps))
