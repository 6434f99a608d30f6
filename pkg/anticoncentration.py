"""
Anti-concentration Module for Essential Cover Toolkit
Exact laws of <x, v> for x drawn from product measures on the cube:
Littlewood-Offord checks, level-set antichains and their mass, and the
decay of small-window probabilities as vectors gain scales
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import pandas as pd
from tqdm import tqdm

from cube_core import (
    DEFAULT_ENUMERATION_GUARD,
    CoverError,
    Hyperplane,
    IntegerSystem,
    as_rational_vector,
    check_guard,
    exact_constant,
    make_rng,
    sign_block,
    to_rational,
)
from matrix_decomposition import find_scales

logger = logging.getLogger(__name__)

DP_RANGE_LIMIT = 1_000_000


@dataclass(frozen=True)
class ProductMeasure:
    """Independent coordinates with P(x_j = +1) = marginals[j]"""
    n: int
    marginals: tuple

    def __post_init__(self):
        marginals = as_rational_vector(self.marginals)
        if len(marginals) != self.n:
            raise ValueError(f"{len(marginals)} marginals for n={self.n}")
        if any(not 0 <= q <= 1 for q in marginals):
            raise ValueError("Marginals must lie in [0, 1]")
        object.__setattr__(self, 'marginals', marginals)

    @classmethod
    def uniform(cls, n):
        return cls(n, tuple(Fraction(1, 2) for _ in range(n)))

    @property
    def sigma_squared(self):
        return sum((4 * q * (1 - q) for q in self.marginals), Fraction(0))

    @property
    def sigma(self):
        return math.sqrt(self.sigma_squared)

    def flipped(self, signs):
        """Law of s * x for x drawn from this measure"""
        return ProductMeasure(self.n, tuple(q if s == 1 else 1 - q
                                            for q, s in zip(self.marginals, signs)))


def _integer_data(v):
    values = as_rational_vector(v)
    scale = math.lcm(*(a.denominator for a in values))
    return [int(a * scale) for a in values], scale


def sum_distribution(v, P=None, guard=DEFAULT_ENUMERATION_GUARD):
    """
    Exact law of <x, v>

    Args:
        v: Rational vector
        P: ProductMeasure (uniform by default)
        guard: Largest n for the enumeration path

    Returns:
        dict value -> probability, both Fractions
    """
    values = as_rational_vector(v)
    P = P or ProductMeasure.uniform(len(values))
    if P.n != len(values):
        raise ValueError(f"Measure has n={P.n}, vector has {len(values)} entries")
    ints, scale = _integer_data(values)
    if sum(abs(a) for a in ints) <= DP_RANGE_LIMIT:
        law = {0: Fraction(1)}
        for a, q in zip(ints, P.marginals):
            step = defaultdict(Fraction)
            for total, mass in law.items():
                if q:
                    step[total + a] += mass * q
                if q != 1:
                    step[total - a] += mass * (1 - q)
            law = step
        return {Fraction(total, scale): mass for total, mass in law.items() if mass}
    return _enumerated_distribution(values, P, guard)


def _enumerated_distribution(values, P, guard):
    n = len(values)
    check_guard(n, guard)
    law = defaultdict(Fraction)
    for row in sign_block(n, 0, 1 << n).tolist():
        mass = Fraction(1)
        for s, q in zip(row, P.marginals):
            mass *= q if s == 1 else 1 - q
        if mass:
            law[sum((a * s for a, s in zip(values, row)), Fraction(0))] += mass
    return dict(law)


def atom_probability(v, a, P=None, guard=DEFAULT_ENUMERATION_GUARD):
    """P(<x, v> = a) exactly"""
    return sum_distribution(v, P, guard).get(to_rational(a), Fraction(0))


def window_probability(v, a, radius, P=None, guard=DEFAULT_ENUMERATION_GUARD):
    """P(|<x, v> - a| <= radius) exactly"""
    a, radius = to_rational(a), to_rational(radius)
    law = sum_distribution(v, P, guard)
    return sum((mass for value, mass in law.items() if abs(value - a) <= radius), Fraction(0))


@dataclass(frozen=True)
class LOCheck:
    probability: Fraction
    support: int
    bound: float
    holds: bool

    def to_dict(self):
        return {'probability': str(self.probability), 'probability_decimal': float(self.probability),
                'support': self.support, 'bound': self.bound, 'holds': self.holds}


def lo_check(v, a):
    """
    Compare P(<x, v> = a) under the uniform measure with 1 / sqrt(|v|_0)

    The comparison is exact: probability**2 * |v|_0 <= 1.
    """
    values = as_rational_vector(v)
    support = sum(1 for x in values if x != 0)
    if support == 0:
        raise ValueError("The zero vector has no Littlewood-Offord bound")
    probability = atom_probability(values, a)
    return LOCheck(probability, support, 1 / math.sqrt(support),
                   probability * probability * support <= 1)


def lo_sweep(max_n, values=(1, 2, 3), show_progress=False):
    """
    Largest atom of <x, v> for every vector with entries in +-values, n <= max_n

    Sign flips and permutations of v leave the law of <x, v> unchanged under
    the uniform measure, so one multiset of magnitudes per class is checked.

    Returns:
        pandas.DataFrame with columns n, vector, max_probability, bound, holds
    """
    records = []
    classes = [(n, combo) for n in range(1, max_n + 1)
               for combo in combinations_with_replacement(sorted(values), n)]
    for n, combo in tqdm(classes, desc="   LO sweep", disable=not show_progress, leave=False):
        law = sum_distribution(combo)
        peak = max(law.values())
        records.append({
            'n': n,
            'vector': ' '.join(str(x) for x in combo),
            'max_probability': str(peak),
            'max_probability_decimal': float(peak),
            'bound': 1 / math.sqrt(n),
            'holds': peak * peak * n <= 1,
        })
    return pd.DataFrame.from_records(records)


# ─── Antichains ───

@dataclass(frozen=True)
class AntichainCertificate:
    vertices: tuple
    sign_flip: tuple
    is_antichain: bool
    comparable_pair: tuple | None = None

    @property
    def size(self):
        return len(self.vertices)

    def to_dict(self):
        return {
            'size': self.size,
            'sign_flip': list(self.sign_flip),
            'is_antichain': self.is_antichain,
            'comparable_pair': [list(x) for x in self.comparable_pair] if self.comparable_pair else None,
            'vertices': [list(x) for x in self.vertices],
        }


def antichain_of_level_set(v, mu, guard=DEFAULT_ENUMERATION_GUARD):
    """
    Level set of <x, v * s> = mu with s the sign pattern of v, plus a
    pairwise incomparability certificate

    Args:
        v: Rational vector with no zero entry
        mu: Level

    Returns:
        AntichainCertificate

    Raises:
        ValueError: If some entry of v is zero
    """
    values = as_rational_vector(v)
    mu = to_rational(mu)
    n = len(values)
    if n == 0 or any(a == 0 for a in values):
        raise ValueError("Level-set antichains need a fully supported vector")
    check_guard(n, guard)
    signs = tuple(-1 if a < 0 else 1 for a in values)
    level = IntegerSystem([Hyperplane(tuple(a * s for a, s in zip(values, signs)), mu)])
    cube = sign_block(n, 0, 1 << n)
    members = cube[level.zero_mask(cube)[:, 0]]
    pair = None
    for r in range(members.shape[0]):
        dominated = np.flatnonzero((members >= members[r]).all(axis=1))
        others = dominated[dominated != r]
        if others.size:
            pair = (tuple(members[r].tolist()), tuple(members[others[0]].tolist()))
            break
    vertices = tuple(tuple(row) for row in members.tolist())
    return AntichainCertificate(vertices, signs, pair is None, pair)


def reduce_frozen(P, v, mu):
    """Drop coordinates with marginal 0 or 1, moving their contribution into mu"""
    values = as_rational_vector(v)
    mu = to_rational(mu)
    keep, shift = [], Fraction(0)
    for j, q in enumerate(P.marginals):
        if q == 1:
            shift += values[j]
        elif q == 0:
            shift -= values[j]
        else:
            keep.append(j)
    reduced = ProductMeasure(len(keep), tuple(P.marginals[j] for j in keep))
    return reduced, tuple(values[j] for j in keep), mu - shift


@dataclass
class AntichainReport:
    table: pd.DataFrame
    sigma: float
    max_mass_sigma: float

    def to_dict(self):
        return {'sigma': self.sigma, 'max_mass_sigma': self.max_mass_sigma,
                'trials': self.table.to_dict(orient='records')}


def antichain_mass_experiment(P, trials, seed=0, values=(1, 2, 3), show_progress=False):
    """
    Largest level-set mass times sigma_P over random full-support vectors

    Trial 0 is the all-ones vector; later trials draw magnitudes from
    `values` with random signs. The level is the most likely value of
    <x, v>, whose level set is the heaviest antichain of that vector.

    Returns:
        AntichainReport
    """
    if P.sigma_squared == 0:
        raise ValueError("Degenerate measure: every coordinate is frozen, sigma is 0")
    rng = make_rng(seed, 'antichain')
    sigma = P.sigma
    records = []
    for trial in tqdm(range(max(trials, 1)), desc="   Antichain trials",
                      disable=not show_progress, leave=False):
        if trial == 0:
            v = [1] * P.n
        else:
            v = [int(rng.choice(values)) * (1 if rng.random() < 0.5 else -1) for _ in range(P.n)]
        law = sum_distribution(v, P)
        level, mass = max(law.items(), key=lambda item: (item[1], -abs(item[0]), item[0]))
        records.append({
            'trial': trial,
            'vector': ' '.join(str(x) for x in v),
            'level': str(level),
            'mass': str(mass),
            'mass_decimal': float(mass),
            'mass_sigma': float(mass) * sigma,
        })
    table = pd.DataFrame.from_records(records)
    return AntichainReport(table, sigma, float(table['mass_sigma'].max()))


def marginal_sweep(n, ps, v=None):
    """Heaviest atom of <x, v> under the constant-marginal measure, per p"""
    v = v or [1] * n
    records = []
    for q in ps:
        P = ProductMeasure(n, tuple(to_rational(q) for _ in range(n)))
        mass = max(sum_distribution(v, P).values())
        records.append({'p': str(to_rational(q)), 'sigma': P.sigma,
                        'mass': float(mass), 'mass_sigma': float(mass) * P.sigma})
    return pd.DataFrame.from_records(records)


# ─── Scales ───

def scaled_vector(S, c0, delta, group_size=4, rng=None):
    """
    Vector with S groups of equal entries whose norms decay by 2 * ceil(c0)

    The smallest group has norm delta. With an rng, entries get random signs
    and a jitter of at most 10%, which keeps the decay above c0.

    Returns:
        tuple of Fractions
    """
    root = math.isqrt(group_size)
    if root * root != group_size:
        raise ValueError("group_size must be a perfect square")
    ratio = 2 * math.ceil(exact_constant(c0))
    entry = to_rational(delta) / root
    entries = []
    for s in range(S):
        level = entry * ratio ** (S - 1 - s)
        for _ in range(group_size):
            if rng is None:
                entries.append(level)
            else:
                jitter = Fraction(int(rng.integers(-10, 11)), 100)
                sign = 1 if rng.random() < 0.5 else -1
                entries.append(sign * level * (1 + jitter))
    vector = tuple(entries)
    if find_scales(vector, S, c0) is None:
        raise CoverError(f"Generated vector does not have {S} scales")
    return vector


@dataclass
class ScalesReport:
    table: pd.DataFrame
    summary: pd.DataFrame
    monotone: bool

    def to_dict(self):
        return {'monotone': self.monotone,
                'summary': self.summary.to_dict(orient='records'),
                'trials': self.table.to_dict(orient='records')}


def scales_decay_experiment(S_values, c0, delta, b, trials, seed=0, group_size=4,
                            a=0, show_progress=False):
    """
    P(|<x, v> - a| <= b * delta) for vectors with S scales and smallest scale delta

    Trial 0 uses the unperturbed vector; the monotone flag states that its
    probability does not increase with S.

    Returns:
        ScalesReport
    """
    radius = to_rational(b) * to_rational(delta)
    a = to_rational(a)
    records = []
    for S in tqdm(sorted(S_values), desc="   Scale counts", disable=not show_progress, leave=False):
        for trial in range(max(trials, 1)):
            rng = None if trial == 0 else make_rng(seed, 'scales', S, trial)
            v = scaled_vector(S, c0, delta, group_size, rng)
            probability = window_probability(v, a, radius)
            records.append({'S': S, 'trial': trial, 'n': len(v),
                            'probability': str(probability),
                            'probability_decimal': float(probability)})
    table = pd.DataFrame.from_records(records)
    summary = (table.groupby('S')['probability_decimal']
               .agg(['mean', 'max']).reset_index())
    baseline = [Fraction(x) for x in table[table['trial'] == 0]
                .sort_values('S')['probability']]
    monotone = all(earlier >= later for earlier, later in zip(baseline, baseline[1:]))
    return ScalesReport(table, summary, monotone)


def plot_report(table, x, y, path, title=''):
    """Save a line plot of two report columns"""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(table[x], table[y], marker='o')
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info("✓ Plot saved to %s", path)
