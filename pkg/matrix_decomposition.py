"""
Matrix Decomposition Module for Essential Cover Toolkit
Scale detection, the two-way mass/drop decomposition and the nested four-way
row/column decomposition of a cover's normal matrix, each with an
independent checker
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from cube_core import (
    CoverError,
    PremiseViolation,
    as_rational_matrix,
    exact_constant,
    power_threshold,
)

logger = logging.getLogger(__name__)

EXHAUSTIVE_SCALE_LIMIT = 10


class DecompositionError(CoverError):
    """An internal invariant of the decomposition loop was broken"""


# ─── Scales ───

@dataclass(frozen=True)
class ScalePartition:
    """
    Groups of coordinates with geometrically decaying norms, largest first

    Positions in the last group that carry zeros are allowed; they only
    record where the smallest scale sits.
    """
    groups: tuple
    norms_squared: tuple

    @property
    def count(self):
        return len(self.groups)

    @property
    def norms(self):
        return tuple(math.sqrt(q) for q in self.norms_squared)

    @property
    def smallest_scale(self):
        return math.sqrt(self.norms_squared[-1])

    @property
    def smallest_scale_coords(self):
        return self.groups[-1]

    def to_dict(self):
        return {
            'groups': [list(g) for g in self.groups],
            'norms_squared': [str(q) for q in self.norms_squared],
            'norms': list(self.norms),
            'smallest_scale': self.smallest_scale,
        }


def _partition_from(values, groups):
    return ScalePartition(
        tuple(tuple(sorted(g)) for g in groups),
        tuple(sum((values[j] ** 2 for j in g), Fraction(0)) for g in groups),
    )


def _greedy_groups(order, mass, S, ratio):
    # build groups S, S-1, ..., 2 from the light end, each as small as the decay allows
    groups = []
    end = len(order)
    need = Fraction(0)
    for _ in range(S - 1):
        acc = Fraction(0)
        start = end
        while start > 0 and (acc == 0 or acc < need):
            start -= 1
            acc += mass[order[start]]
        if acc == 0 or acc < need:
            return None
        groups.append(order[start:end])
        need = ratio * acc
        end = start
    head = order[:end]
    if not head or sum((mass[j] for j in head), Fraction(0)) < need:
        return None
    groups.append(head)
    return groups[::-1]


def _search_groups(order, mass, S, ratio):
    m = len(order)
    sums = [Fraction(0)] * (1 << m)
    for mask in range(1, 1 << m):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + mass[order[low.bit_length() - 1]]

    def build(remaining, groups_left, need):
        if groups_left == 1:
            return [remaining] if remaining and sums[remaining] >= need else None
        sub = remaining
        while sub:
            rest = remaining & ~sub
            if rest and sums[sub] >= need and sums[rest] >= ratio * sums[sub]:
                tail = build(rest, groups_left - 1, ratio * sums[sub])
                if tail is not None:
                    return [sub] + tail
            sub = (sub - 1) & remaining
        return None

    masks = build((1 << m) - 1, S, Fraction(0))
    if masks is None:
        return None
    return [[order[b] for b in range(m) if mask >> b & 1] for mask in reversed(masks)]


def find_scales(v, S, c0, pad=(), exhaustive_limit=EXHAUSTIVE_SCALE_LIMIT):
    """
    Split the support of v into S groups with norms decaying by c0

    Args:
        v: Vector of rationals
        S: Number of groups (>= 1)
        c0: Decay ratio (> 1)
        pad: Zero positions to attach to the smallest group
        exhaustive_limit: Support size up to which a failed greedy pass is
            retried by exact search

    Returns:
        ScalePartition or None
    """
    if S < 1:
        raise ValueError(f"S must be at least 1, got {S}")
    ratio = exact_constant(c0) ** 2
    if ratio <= 1:
        raise ValueError(f"c0 must exceed 1, got {c0}")
    values = [Fraction(a) for a in v]
    support = [j for j, a in enumerate(values) if a != 0]
    if len(support) < S:
        return None
    if any(values[j] != 0 for j in pad):
        raise ValueError("pad positions must carry zeros")
    mass = {j: values[j] ** 2 for j in support}
    order = sorted(support, key=lambda j: (-mass[j], j))
    groups = _greedy_groups(order, mass, S, ratio)
    if groups is None and len(support) <= exhaustive_limit:
        groups = _search_groups(order, mass, S, ratio)
    if groups is None:
        return None
    groups[-1] = list(groups[-1]) + [j for j in pad if j not in groups[-1]]
    return _partition_from(values, groups)


def scale_violations(values, partition, S, c0, support, must_contain=()):
    """
    Independent validation of a scale partition

    Args:
        values: Mapping position -> rational entry
        partition: ScalePartition to check
        S: Required number of groups
        c0: Decay ratio
        support: Positions that must be covered
        must_contain: Positions the smallest group has to include

    Returns:
        list of violation messages (empty when valid)
    """
    problems = []
    ratio = exact_constant(c0) ** 2
    if partition.count != S:
        problems.append(f"{partition.count} groups, expected {S}")
    seen = set()
    for g in partition.groups:
        overlap = seen & set(g)
        if overlap:
            problems.append(f"positions {sorted(overlap)} in two groups")
        seen |= set(g)
    outside = seen - set(values)
    if outside:
        problems.append(f"positions {sorted(outside)} outside the row")
    missing = set(support) - seen
    if missing:
        problems.append(f"support positions {sorted(missing)} not grouped")
    masses = [sum((Fraction(values.get(j, 0)) ** 2 for j in g), Fraction(0))
              for g in partition.groups]
    for s in range(len(masses) - 1):
        if masses[s] < ratio * masses[s + 1]:
            problems.append(f"groups {s} and {s + 1} do not decay by c0")
    if masses and masses[-1] == 0:
        problems.append("smallest scale is zero")
    absent = set(must_contain) - set(partition.groups[-1] if partition.groups else ())
    if absent:
        problems.append(f"smallest group misses positions {sorted(absent)}")
    return problems


# ─── Check reports ───

@dataclass
class CheckReport:
    """Violations per checked item; an item with no violations passed"""
    items: dict = field(default_factory=dict)

    def record(self, item, problems):
        self.items.setdefault(item, []).extend(problems)

    @property
    def passed(self):
        return all(not problems for problems in self.items.values())

    def failed_items(self):
        return sorted(item for item, problems in self.items.items() if problems)

    def to_dict(self):
        return {
            'passed': self.passed,
            'items': {item: {'passed': not problems, 'violations': list(problems)}
                      for item, problems in sorted(self.items.items())},
        }


def _nnz(row, columns):
    return sum(1 for j in columns if row[j] != 0)


def _sq_norm(row, columns):
    return sum((row[j] ** 2 for j in columns), Fraction(0))


# ─── Two-way decomposition ───

@dataclass(frozen=True)
class TwoWayDecomposition:
    """Row split L1/L2 and column split M1/M2 of a (sub)matrix"""
    L1: tuple
    L2: tuple
    M1: tuple
    M2: tuple
    row_norms: dict
    scales: dict
    drops: dict
    moves: int
    move_bound: int

    def to_dict(self):
        return {
            'L1': list(self.L1), 'L2': list(self.L2),
            'M1': list(self.M1), 'M2': list(self.M2),
            'row_norms_squared': {str(i): str(q) for i, q in sorted(self.row_norms.items())},
            'scales': {str(i): s.to_dict() for i, s in sorted(self.scales.items())},
            'drops': {str(i): d for i, d in sorted(self.drops.items())},
            'moves': self.moves,
            'move_bound': self.move_bound,
        }


def _evicted_partition(row, periods, remainder, current, S):
    groups = [list(chunk) for chunk in periods]
    if current > 0:
        groups.append(list(remainder))
    else:
        groups[-1] = groups[-1] + list(remainder)
    while len(groups) > S:
        groups[0:2] = [groups[0] + groups[1]]
    return _partition_from(row, groups)


def decompose_two_way(V, p, rows=None, columns=None, n=None, enforce_premise=True):
    """
    Move heavy columns into M2 until every remaining column is light

    Rows are normalised on M1; a row whose remaining mass falls below tau of
    its last normalisation records a drop and is renormalised. A row with S
    drops leaves L1 for L2, carrying the scale partition its drops produced.

    Args:
        V: Matrix as a list of rows
        p: ParamSet
        rows: Row indices of the submatrix (default all)
        columns: Column indices of the submatrix (default all)
        n: Dimension used for the thresholds (default the column count)
        enforce_premise: Raise PremiseViolation when k > n**alpha

    Returns:
        TwoWayDecomposition
    """
    matrix = as_rational_matrix(V)
    width = len(matrix[0]) if matrix else 0
    rows = tuple(sorted(range(len(matrix)) if rows is None else rows))
    columns = tuple(sorted(range(width) if columns is None else columns))
    n = n or max(len(columns), 1)
    k = len(rows)
    if enforce_premise and k > float(n) ** p.alpha:
        raise PremiseViolation(f"k={k} exceeds n**alpha={float(n) ** p.alpha:.3f}")

    S = p.scale_count(n)
    tau = p.tau()
    stale_threshold = power_threshold(n, -p.col_mass_exp_pre, upper=False)
    fresh_threshold = power_threshold(n, -p.col_mass_exp, upper=False)
    move_bound = math.ceil(S * k / min(stale_threshold, tau * fresh_threshold))

    M1 = list(columns)
    M2 = []
    L1 = set(rows)
    L2 = []
    reference = {i: _sq_norm(matrix[i], M1) for i in rows}
    current = dict(reference)
    drops = {i: 0 for i in rows}
    period_start = {i: 0 for i in rows}
    periods = {i: [] for i in rows}
    scales = {}
    moves = 0
    carriers = {j: [i for i in rows if matrix[i][j] != 0] for j in columns}

    def column_masses(j):
        stale = fresh = Fraction(0)
        for i in carriers[j]:
            if i not in L1 or current[i] == 0:
                continue
            x = matrix[i][j]
            stale += x * x / reference[i]
            fresh += x * x / current[i]
        return stale, fresh

    while True:
        heavy = None
        for j in M1:
            if not carriers[j]:
                continue
            stale, fresh = column_masses(j)
            if stale >= stale_threshold or fresh >= fresh_threshold:
                heavy = j
                break
        if heavy is None:
            break
        M1.remove(heavy)
        M2.append(heavy)
        moves += 1
        if moves > move_bound:
            raise DecompositionError(f"Moved {moves} columns, bound is {move_bound}")
        for i in carriers[heavy]:
            if i not in L1:
                continue
            x = matrix[i][heavy]
            current[i] -= x * x
            if current[i] >= tau * reference[i]:
                continue
            drops[i] += 1
            periods[i].append(M2[period_start[i]:])
            period_start[i] = len(M2)
            if drops[i] >= S:
                L1.discard(i)
                L2.append(i)
                scales[i] = _evicted_partition(matrix[i], periods[i], M1, current[i], S)
                logger.debug("Row %d evicted to L2 after %d drops", i, drops[i])
            elif current[i] > 0:
                reference[i] = current[i]

    row_norms = {i: current[i] for i in L1 if current[i] > 0}
    logger.debug("Two-way split: |L1|=%d |L2|=%d |M1|=%d |M2|=%d after %d moves",
                 len(L1), len(L2), len(M1), len(M2), moves)
    return TwoWayDecomposition(
        L1=tuple(sorted(L1)), L2=tuple(sorted(L2)),
        M1=tuple(M1), M2=tuple(sorted(M2)),
        row_norms=row_norms, scales=scales, drops=drops,
        moves=moves, move_bound=move_bound,
    )


def check_two_way(V, d, p, rows=None, columns=None, n=None):
    """Recheck a two-way decomposition from the matrix alone"""
    matrix = as_rational_matrix(V)
    width = len(matrix[0]) if matrix else 0
    rows = set(range(len(matrix)) if rows is None else rows)
    columns = set(range(width) if columns is None else columns)
    n = n or max(len(columns), 1)
    report = CheckReport()

    problems = []
    if set(d.L1) & set(d.L2) or set(d.L1) | set(d.L2) != rows:
        problems.append("L1, L2 do not partition the rows")
    if set(d.M1) & set(d.M2) or set(d.M1) | set(d.M2) != columns:
        problems.append("M1, M2 do not partition the columns")
    report.record('partition', problems)

    threshold = power_threshold(n, -p.col_mass_exp, upper=False)
    norms = {i: _sq_norm(matrix[i], d.M1) for i in d.L1}
    problems = []
    for j in d.M1:
        mass = sum((matrix[i][j] ** 2 / norms[i] for i in d.L1 if norms[i] and matrix[i][j]),
                   Fraction(0))
        if mass >= threshold:
            problems.append(f"column {j} has normalised mass {float(mass):.4f}")
    report.record('column_mass', problems)

    S = p.scale_count(n)
    problems = []
    for i in d.L2:
        partition = d.scales.get(i)
        if partition is None:
            problems.append(f"row {i} has no scale partition")
            continue
        values = {j: matrix[i][j] for j in columns}
        support = [j for j in columns if matrix[i][j] != 0]
        problems.extend(f"row {i}: {msg}" for msg in
                        scale_violations(values, partition, S, p.c0, support, d.M1))
    report.record('l2_scales', problems)

    bound = float(n) ** p.m2_exp
    report.record('m2_size', [] if len(d.M2) <= bound else
                  [f"|M2|={len(d.M2)} exceeds n**m2_exp={bound:.2f}"])
    return report


# ─── Four-way decomposition ───

@dataclass(frozen=True)
class IterationRecord:
    step: int
    rows: tuple
    columns: tuple
    k_t: int
    n_t: int
    branch: str
    i_star: int | None = None

    def to_dict(self):
        return {
            'step': self.step, 'rows': len(self.rows), 'columns': len(self.columns),
            'k_t': self.k_t, 'n_t': self.n_t, 'branch': self.branch, 'i_star': self.i_star,
        }


@dataclass(frozen=True)
class FourWayDecomposition:
    """
    Row classes K1..K4 and column classes N1..N3 of a normal matrix

    N4 lists the dense columns removed before the nested iteration; they are
    part of N3. phi_squared maps each K3 row to 1 / |v_i restricted to N1|^2.
    """
    n: int
    k: int
    K1: tuple
    K2: tuple
    K3: tuple
    K4: tuple
    N1: tuple
    N2: tuple
    N3: tuple
    N4: tuple
    phi_squared: dict
    scales: dict
    history: tuple = ()
    flags: tuple = ()

    @property
    def phi(self):
        return {i: 1 / math.sqrt(q) for i, q in self.phi_squared.items()}

    def to_dict(self):
        return {
            'n': self.n, 'k': self.k,
            'K1': list(self.K1), 'K2': list(self.K2), 'K3': list(self.K3), 'K4': list(self.K4),
            'N1': list(self.N1), 'N2': list(self.N2), 'N3': list(self.N3), 'N4': list(self.N4),
            'phi': {str(i): v for i, v in sorted(self.phi.items())},
            'phi_squared': {str(i): str(q) for i, q in sorted(self.phi_squared.items())},
            'scales': {str(i): s.to_dict() for i, s in sorted(self.scales.items())},
            'history': [r.to_dict() for r in self.history],
            'flags': list(self.flags),
        }


def decompose_four_way(V, p, enforce_premise=True):
    """
    Nested decomposition of the normal matrix into the four row classes

    Dense columns go to N3 first. The two-way split is then applied to a
    shrinking submatrix: when many rows vanish on M1 they are dropped, or
    when one such row is sparse on M2 it is dropped together with its
    support; otherwise the current split is final.

    Args:
        V: k x n matrix of rationals
        p: ParamSet
        enforce_premise: Raise PremiseViolation when k > n**alpha / divisor

    Returns:
        FourWayDecomposition
    """
    matrix = as_rational_matrix(V)
    k = len(matrix)
    n = len(matrix[0]) if matrix else 0
    if k == 0 or n == 0:
        raise PremiseViolation("The normal matrix is empty")
    flags = []
    if k > p.premise_bound(n):
        if enforce_premise:
            raise PremiseViolation(
                f"k={k} exceeds n**alpha/divisor={p.premise_bound(n):.3f}")
        flags.append('premise_unmet')

    dense_limit = power_threshold(n, p.sparsity_exp, upper=False)
    N4 = tuple(j for j in range(n) if _nnz([row[j] for row in matrix], range(k)) > dense_limit)
    rows = tuple(range(k))
    columns = tuple(j for j in range(n) if j not in set(N4))
    history = []

    for step in range(k + 1):
        two = decompose_two_way(matrix, p, rows, columns, n=n, enforce_premise=False)
        Z = tuple(i for i in rows if all(matrix[i][j] == 0 for j in two.M1))
        k_t, n_t = len(Z), len(two.M2)
        if k_t > float(n_t) ** p.cond1_exp:
            history.append(IterationRecord(step, rows, columns, k_t, n_t, 'cond1'))
            rows = tuple(i for i in rows if i not in set(Z))
            columns = two.M1
            continue
        sparse = [i for i in Z if _nnz(matrix[i], two.M2) <= p.cond2_factor * k_t ** 2]
        if sparse:
            i_star = sparse[0]
            history.append(IterationRecord(step, rows, columns, k_t, n_t, 'cond2', i_star))
            rows = tuple(i for i in rows if i != i_star)
            columns = tuple(j for j in columns if matrix[i_star][j] == 0)
            continue
        history.append(IterationRecord(step, rows, columns, k_t, n_t, 'stop'))
        break
    else:
        raise DecompositionError("Nested decomposition did not terminate")

    zero_rows = set(Z)
    kept = set(rows)
    decomposition = FourWayDecomposition(
        n=n, k=k,
        K1=tuple(i for i in range(k) if i not in kept),
        K2=Z,
        K3=tuple(i for i in two.L1 if i not in zero_rows),
        K4=tuple(i for i in two.L2 if i not in zero_rows),
        N1=two.M1,
        N2=two.M2,
        N3=tuple(j for j in range(n) if j not in set(columns)),
        N4=N4,
        phi_squared={i: 1 / two.row_norms[i] for i in two.L1 if i not in zero_rows},
        scales={i: two.scales[i] for i in two.L2 if i not in zero_rows},
        history=tuple(history),
        flags=tuple(flags),
    )
    if not decomposition.K3:
        flags.append('empty_k3')
    if 2 * len(decomposition.N1) < n:
        flags.append('n1_below_half')
    decomposition = replace(decomposition, flags=tuple(flags))
    logger.info("✓ Decomposed %dx%d: |K1..K4|=%d/%d/%d/%d |N1..N3|=%d/%d/%d in %d step(s)",
                k, n, len(decomposition.K1), len(decomposition.K2), len(decomposition.K3),
                len(decomposition.K4), len(decomposition.N1), len(decomposition.N2),
                len(decomposition.N3), len(history))
    return decomposition


def check_four_way(V, d, p):
    """
    Recheck every structural claim of a four-way decomposition

    Items: partition, size, sparse_columns, k1_vanish, k2_structure,
    k3_column_mass, k3_linf, k4_scales. Only the matrix and the reported
    classes are used; the construction is not replayed.

    Returns:
        CheckReport
    """
    matrix = as_rational_matrix(V)
    k = len(matrix)
    n = len(matrix[0]) if matrix else 0
    report = CheckReport()
    N12 = tuple(d.N1) + tuple(d.N2)

    problems = []
    row_classes = [d.K1, d.K2, d.K3, d.K4]
    listed = [i for part in row_classes for i in part]
    if sorted(listed) != list(range(k)):
        problems.append("K1..K4 do not partition the rows")
    col_classes = [d.N1, d.N2, d.N3]
    listed = [j for part in col_classes for j in part]
    if sorted(listed) != list(range(n)):
        problems.append("N1..N3 do not partition the columns")
    report.record('partition', problems)
    if problems:
        return report

    report.record('size', [] if 2 * len(d.N1) >= n else
                  [f"|N1|={len(d.N1)} is below n/2={n / 2}"])

    dense_limit = power_threshold(n, p.sparsity_exp, upper=False)
    report.record('sparse_columns', [
        f"column {j} has {_nnz([row[j] for row in matrix], range(k))} non-zeros"
        for j in N12 if _nnz([row[j] for row in matrix], range(k)) > dense_limit
    ])

    report.record('k1_vanish', [f"row {i} is non-zero on N1 or N2"
                                for i in d.K1 if _nnz(matrix[i], N12) > 0])

    problems = []
    need = p.cond2_factor * len(d.K2) ** 2
    for i in d.K2:
        if _nnz(matrix[i], d.N1) > 0:
            problems.append(f"row {i} is non-zero on N1")
        if _nnz(matrix[i], d.N2) < need:
            problems.append(f"row {i} has {_nnz(matrix[i], d.N2)} non-zeros on N2, needs {need}")
    report.record('k2_structure', problems)

    mass_limit = power_threshold(n, -p.col_mass_exp, upper=False)
    linf_limit = power_threshold(n, p.sparsity_exp - p.col_mass_exp, upper=False)
    norms = {i: _sq_norm(matrix[i], d.N1) for i in d.K3}
    mass_problems, linf_problems = [], []
    for i in d.K3:
        if norms[i] == 0:
            mass_problems.append(f"row {i} vanishes on N1")
        elif d.phi_squared.get(i) != 1 / norms[i]:
            mass_problems.append(f"row {i} has an inconsistent normaliser")
    for j in d.N1:
        contributions = [matrix[i][j] ** 2 / norms[i] for i in d.K3 if norms[i] and matrix[i][j]]
        mass = sum(contributions, Fraction(0))
        if mass >= mass_limit:
            mass_problems.append(f"column {j} has normalised mass {float(mass):.4f}")
        if len(contributions) * mass >= linf_limit:
            linf_problems.append(f"column {j} exceeds the sum-of-magnitudes bound")
    report.record('k3_column_mass', mass_problems)
    report.record('k3_linf', linf_problems)

    S = p.scale_count(n)
    problems = []
    for i in d.K4:
        partition = d.scales.get(i)
        if partition is None:
            problems.append(f"row {i} has no scale partition")
            continue
        values = {j: matrix[i][j] for j in N12}
        support = [j for j in N12 if matrix[i][j] != 0]
        problems.extend(f"row {i}: {msg}" for msg in
                        scale_violations(values, partition, S, p.c0, support, d.N1))
    report.record('k4_scales', problems)
    return report
