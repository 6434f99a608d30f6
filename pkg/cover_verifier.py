"""
Cover Verifier Module for Essential Cover Toolkit
Exhaustive checks of the cover property, variable usage and plane essentiality
Sweeps are split into index ranges that worker threads evaluate as numpy blocks
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from cube_core import (
    DEFAULT_ENUMERATION_GUARD,
    IntegerSystem,
    check_guard,
    cube_size,
    evaluate,
    index_ranges,
    iter_blocks,
    vertex_from_index,
)

logger = logging.getLogger(__name__)


@dataclass
class EssentialityReport:
    """Outcome of check_essential; variable and plane indices are 0-based"""
    n: int
    k: int
    e1_holds: bool
    e1_witness: object
    uncovered_count: int
    e2_holds: bool
    missing_variables: list
    e3_holds: bool
    private_witnesses: list
    sparsity_ok: bool
    sparsity_violations: list = field(default_factory=list)

    @property
    def is_essential(self):
        return self.e1_holds and self.e2_holds and self.e3_holds

    def to_dict(self):
        return {
            'n': self.n,
            'k': self.k,
            'essential': self.is_essential,
            'e1_holds': self.e1_holds,
            'e1_witness': self.e1_witness.to_list() if self.e1_witness else None,
            'uncovered_count': self.uncovered_count,
            'e2_holds': self.e2_holds,
            'missing_variables': list(self.missing_variables),
            'e3_holds': self.e3_holds,
            'private_witnesses': [w.to_list() if w else None for w in self.private_witnesses],
            'sparsity_ok': self.sparsity_ok,
            'sparsity_violations': list(self.sparsity_violations),
        }


@dataclass
class _ScanResult:
    uncovered: list
    uncovered_count: int
    private_first: list


def _scan_range(system, n, start, stop, limit, progress=None):
    uncovered, count = [], 0
    private_first = [None] * system.k
    for offset, signs in iter_blocks(n, start, stop):
        zero = system.zero_mask(signs)
        hits = zero.sum(axis=1)
        empty = np.flatnonzero(hits == 0)
        count += int(empty.size)
        if len(uncovered) < limit and empty.size:
            uncovered.extend(int(offset + r) for r in empty[:limit - len(uncovered)])
        single = hits == 1
        for i in range(system.k):
            if private_first[i] is None:
                rows = np.flatnonzero(single & zero[:, i])
                if rows.size:
                    private_first[i] = int(offset + rows[0])
        if progress is not None:
            progress.update(signs.shape[0])
    return _ScanResult(uncovered, count, private_first)


def _scan(c, limit, guard, threads, show_progress=False):
    check_guard(c.n, guard)
    system = IntegerSystem(c.planes)
    total = cube_size(c.n)
    ranges = index_ranges(total, max(1, threads))
    with tqdm(total=total, desc="   Sweeping cube", disable=not show_progress,
              leave=False) as progress:
        if len(ranges) == 1:
            parts = [_scan_range(system, c.n, 0, total, limit, progress)]
        else:
            with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
                futures = [pool.submit(_scan_range, system, c.n, start, stop, limit)
                           for start, stop in ranges]
                parts = [f.result() for f in futures]
    # merge in index order so the outcome is independent of the thread count
    merged = _ScanResult([], 0, [None] * c.k)
    for part in parts:
        merged.uncovered_count += part.uncovered_count
        room = limit - len(merged.uncovered)
        merged.uncovered.extend(part.uncovered[:max(room, 0)])
        for i, index in enumerate(part.private_first):
            if merged.private_first[i] is None:
                merged.private_first[i] = index
    return merged


def plane_evaluations(c, x):
    """Exact <x, v_i> - mu_i for every plane of the cover"""
    return [evaluate(plane, x) for plane in c.planes]


def is_uncovered(c, x):
    return all(value != 0 for value in plane_evaluations(c, x))


def uncovered_vertices(c, limit=16, guard=DEFAULT_ENUMERATION_GUARD, threads=1):
    """
    Uncovered vertices of the cube in lexicographic order

    Args:
        c: Cover
        limit: Maximum number of vertices returned
        guard: Largest n allowed for the exhaustive sweep
        threads: Worker threads for the sweep

    Returns:
        list of Vertex
    """
    scan = _scan(c, limit, guard, threads)
    return [vertex_from_index(c.n, index) for index in scan.uncovered]


def sparsity_law_violations(c):
    """Planes whose normal has at least 2k non-zero coordinates"""
    return [i for i, plane in enumerate(c.planes) if plane.sparsity >= 2 * c.k]


def check_essential(c, guard=DEFAULT_ENUMERATION_GUARD, threads=1, show_progress=False):
    """
    Decide whether a family of hyperplanes is an essential cover

    Args:
        c: Cover
        guard: Largest n allowed for the exhaustive sweep
        threads: Worker threads for the sweep
        show_progress: Draw a tqdm bar on stderr

    Returns:
        EssentialityReport
    """
    logger.info("Checking essentiality of n=%d, k=%d ...", c.n, c.k)
    scan = _scan(c, 1, guard, threads, show_progress)
    e1_holds = scan.uncovered_count == 0
    witness = None if e1_holds else vertex_from_index(c.n, scan.uncovered[0])
    missing = [j for j in range(c.n) if all(plane.normal[j] == 0 for plane in c.planes)]
    privates = [None if index is None else vertex_from_index(c.n, index)
                for index in scan.private_first]
    violations = sparsity_law_violations(c)
    report = EssentialityReport(
        n=c.n,
        k=c.k,
        e1_holds=e1_holds,
        e1_witness=witness,
        uncovered_count=scan.uncovered_count,
        e2_holds=not missing,
        missing_variables=missing,
        e3_holds=all(w is not None for w in privates),
        private_witnesses=privates,
        sparsity_ok=not violations,
        sparsity_violations=violations,
    )
    mark = "✓" if report.is_essential else "✗"
    logger.info("   %s E1=%s E2=%s E3=%s", mark, report.e1_holds, report.e2_holds, report.e3_holds)
    if report.is_essential and not report.sparsity_ok:
        logger.error("Essential cover breaks the sparsity law at planes %s", violations)
    return report


def coverage_counts(c, guard=DEFAULT_ENUMERATION_GUARD):
    """Number of planes through every vertex, keyed by Vertex"""
    check_guard(c.n, guard)
    system = IntegerSystem(c.planes)
    counts = {}
    for offset, signs in iter_blocks(c.n, 0, cube_size(c.n)):
        hits = system.zero_mask(signs).sum(axis=1)
        for r, value in enumerate(hits.tolist()):
            counts[vertex_from_index(c.n, offset + r)] = int(value)
    return counts
