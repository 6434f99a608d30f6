"""
Vertex Finder Module for Essential Cover Toolkit
Three-phase construction of a vertex that no plane of a family covers.
Dense and vanishing rows are handled on N3, scale rows on N2, the remaining
planes on N1 through a Bang sign vector and kernel rounding; every success
is certified by evaluating all planes
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from bang_solver import BangSolverError, bang_margins, flip_ascent
from cover_verifier import plane_evaluations, uncovered_vertices
from cube_core import (
    DEFAULT_ENUMERATION_GUARD,
    CoverError,
    Hyperplane,
    IntegerSystem,
    ParamSet,
    Vertex,
    derive_seed,
    iter_blocks,
    make_rng,
    power_threshold,
    vertex_from_index,
)
from kernel_rounding import RoundedPoint, RoundingError, round_preserving, sample_rounding
from matrix_decomposition import DecompositionError, decompose_four_way

logger = logging.getLogger(__name__)

PHASE1_EXHAUSTIVE_LIMIT = 20
_NORMALISER_SCALE = 1 << 48

FOUND = 'found'
PHASE_FAILURE = 'phase_failure'
PREMISE_FAILURE = 'premise_failure'


class FinderError(CoverError):
    """Structured failure of one phase; diagnostics travel with it"""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PhaseFailure(FinderError):
    """A Las Vegas phase ran out of tries"""


class PremiseFailure(FinderError):
    """The instance is outside the regime the phase is built for"""


@dataclass(frozen=True)
class PartialVertex:
    n: int
    assigned: dict = field(default_factory=dict)
    phase_tags: dict = field(default_factory=dict)

    def extend(self, values, tag):
        """New partial vertex with `values` (coordinate -> +-1) fixed in phase `tag`"""
        overlap = set(values) & set(self.assigned)
        if overlap:
            raise ValueError(f"Coordinates {sorted(overlap)} already fixed")
        if any(s not in (-1, 1) for s in values.values()):
            raise ValueError("Assigned values must be +-1")
        assigned = dict(self.assigned)
        assigned.update(values)
        tags = dict(self.phase_tags)
        tags.update({j: tag for j in values})
        return PartialVertex(self.n, assigned, tags)

    def value(self, j):
        return self.assigned[j]

    def complete(self):
        if set(self.assigned) != set(range(self.n)):
            missing = sorted(set(range(self.n)) - set(self.assigned))
            raise ValueError(f"Coordinates {missing} are not fixed")
        return Vertex(tuple(self.assigned[j] for j in range(self.n)))


@dataclass
class FinderOutcome:
    status: str
    vertex: Vertex | None = None
    certificate: list | None = None
    diagnostics: dict = field(default_factory=dict)
    method: str = 'pipeline'

    def to_dict(self):
        return {
            'status': self.status,
            'method': self.method,
            'vertex': self.vertex.to_list() if self.vertex else None,
            'certificate': [str(v) for v in self.certificate] if self.certificate else None,
            'diagnostics': self.diagnostics,
        }


def _partial_sum(row, u, columns):
    return sum((row[j] * u.value(j) for j in columns if row[j] != 0), Fraction(0))


def _fixed_residual(plane, u, columns):
    """mu_i minus the contribution of the already fixed coordinates"""
    return plane.offset - _partial_sum(plane.normal, u, columns)


# ─── Phase I ───

def phase1(c, d, p=None):
    """
    Fix the N3 coordinates so that no K1 plane can pass through the vertex

    Args:
        c: Cover
        d: FourWayDecomposition of c
        p: ParamSet (seed and tries for the sampling branch)

    Returns:
        PartialVertex with exactly N3 assigned
    """
    p = p or ParamSet()
    N3 = tuple(d.N3)
    outside = set(range(c.n)) - set(N3)
    planes = [c.planes[i] for i in d.K1]
    for i in d.K1:
        if any(c.planes[i].normal[j] != 0 for j in outside):
            raise PremiseFailure(f"K1 plane {i} is non-zero outside N3", {'phase': 'I'})
    relevant = sorted({j for plane in planes for j in plane.support()})
    filler = {j: -1 for j in N3 if j not in set(relevant)}
    base = PartialVertex(c.n)
    if not planes:
        return base.extend(filler, 'I')

    restricted = [Hyperplane(tuple(plane.normal[j] for j in relevant), plane.offset)
                  for plane in planes]
    if len(relevant) <= PHASE1_EXHAUSTIVE_LIMIT:
        system = IntegerSystem(restricted)
        for offset, signs in iter_blocks(len(relevant), 0, 1 << len(relevant)):
            clear = np.flatnonzero(~system.zero_mask(signs).any(axis=1))
            if clear.size:
                x = vertex_from_index(len(relevant), int(offset + clear[0]))
                values = dict(zip(relevant, x.signs))
                logger.debug("Phase I: exhaustive search fixed %d coordinates", len(values))
                return base.extend({**values, **filler}, 'I')
        raise PremiseFailure("Every N3 assignment lies on some K1 plane",
                             {'phase': 'I', 'searched': 'exhaustive', 'coordinates': len(relevant)})

    for attempt in range(p.max_tries):
        rng = make_rng(p.seed, 'phase1', attempt)
        signs = rng.integers(0, 2, size=len(relevant)) * 2 - 1
        if all(sum((a * int(s) for a, s in zip(h.normal, signs) if a), Fraction(0)) != h.offset
               for h in restricted):
            return base.extend({**dict(zip(relevant, (int(s) for s in signs))), **filler}, 'I')
    raise PremiseFailure("No avoiding N3 assignment sampled",
                         {'phase': 'I', 'searched': 'sampling', 'tries': p.max_tries})


# ─── Phase II ───

def phase2(c, d, u1, p=None):
    """
    Fix the N2 coordinates by rejection sampling

    K2 planes must evaluate non-zero (their N1 block is zero). For K4 planes
    the residual after fixing N2 and N3 must exceed the l1 norm of the N1
    block, so no choice on N1 can bring them to zero.

    Returns:
        PartialVertex with N2 and N3 assigned
    """
    p = p or ParamSet()
    N1, N2, N3 = tuple(d.N1), tuple(d.N2), tuple(d.N3)
    k2 = [(i, _fixed_residual(c.planes[i], u1, N3)) for i in d.K2]
    k4 = []
    for i in d.K4:
        normal = c.planes[i].normal
        reach = sum((abs(normal[j]) for j in N1), Fraction(0))
        k4.append((i, _fixed_residual(c.planes[i], u1, N3), reach))
    if not N2:
        clear = all(r != 0 for _, r in k2) and all(abs(r) > reach for _, r, reach in k4)
        if clear:
            return u1.extend({}, 'II')
        raise PhaseFailure("N2 is empty and a K2/K4 plane is not avoided", {'phase': 'II'})

    rejections = {'K2': 0, 'K4': 0}
    for attempt in range(p.max_tries):
        rng = make_rng(p.seed, 'phase2', attempt)
        draw = [int(s) for s in rng.integers(0, 2, size=len(N2)) * 2 - 1]
        values = dict(zip(N2, draw))
        sums = {}
        for i in list(d.K2) + list(d.K4):
            normal = c.planes[i].normal
            sums[i] = sum((normal[j] * values[j] for j in N2 if normal[j] != 0), Fraction(0))
        if any(sums[i] == r for i, r in k2):
            rejections['K2'] += 1
            continue
        if any(abs(r - sums[i]) <= reach for i, r, reach in k4):
            rejections['K4'] += 1
            continue
        logger.debug("Phase II accepted attempt %d", attempt)
        return u1.extend(values, 'II')
    raise PhaseFailure(f"No N2 assignment accepted in {p.max_tries} tries",
                       {'phase': 'II', 'tries': p.max_tries, 'rejections': rejections})


# ─── Phase III ───

def _normaliser(norm_squared):
    """Rational phi with phi**2 * norm_squared >= 1, within 2**-48 relative"""
    phi = Fraction(math.ceil(_NORMALISER_SCALE / math.sqrt(norm_squared) * (1 + 1e-12)),
                   _NORMALISER_SCALE)
    while phi * phi * norm_squared < 1:
        phi += Fraction(1, _NORMALISER_SCALE)
    return phi


def plank_point(rows, gamma, theta):
    """
    Bang step of Phase III

    Args:
        rows: Scaled rows phi_i v'_i
        gamma: Targets gamma_i
        theta: Margin

    Returns:
        tuple: (epsilon, z = theta * rows^T epsilon, margins <rows_i, z> - gamma_i)
    """
    k = len(rows)
    M = [[sum((a * b for a, b in zip(rows[i], rows[l]) if a and b), Fraction(0))
          for l in range(k)] for i in range(k)]
    eps = flip_ascent(M, gamma, theta).epsilon
    m = len(rows[0]) if rows else 0
    z = [theta * sum((eps[i] * rows[i][j] for i in range(k) if rows[i][j]), Fraction(0))
         for j in range(m)]
    return eps, z, bang_margins(M, gamma, theta, eps)


def phase3(c, d, u12, p=None):
    """
    Fix the N1 coordinates so that every K3 plane is avoided

    Targets gamma_i = phi_i (mu_i - fixed part) feed a Bang instance with
    M = V'V'^T and theta = n**theta_exp; z = theta V'^T eps stays inside the
    cube, is rounded with the inner products <phi_i v'_i, z> held fixed, and
    the leftover fractional coordinates are sampled until every K3 plane
    evaluates non-zero.

    Returns:
        tuple: (PartialVertex with every coordinate assigned, diagnostics dict)
    """
    p = p or ParamSet()
    N1 = tuple(d.N1)
    fixed_columns = tuple(d.N2) + tuple(d.N3)
    K3 = tuple(d.K3)
    if not N1:
        return u12.extend({}, 'III'), {'phase3': 'no N1 coordinates'}
    if not K3:
        return u12.extend({j: 1 for j in N1}, 'III'), {'phase3': 'K3 empty'}

    n = c.n
    theta = power_threshold(n, p.theta_exp, upper=False)
    blocks, rows, gamma = [], [], []
    for i in K3:
        normal = c.planes[i].normal
        block = [normal[j] for j in N1]
        norm_squared = sum((a * a for a in block), Fraction(0))
        if norm_squared == 0:
            raise PremiseFailure(f"K3 plane {i} vanishes on N1", {'phase': 'III'})
        phi = _normaliser(norm_squared)
        blocks.append(block)
        rows.append([phi * a for a in block])
        gamma.append(phi * _fixed_residual(c.planes[i], u12, fixed_columns))

    eps, z, margins = plank_point(rows, gamma, theta)
    diagnostics = {
        'theta': float(theta),
        'bang_margin_ok': all(abs(m) >= theta for m in margins),
        'z_linf': float(max(abs(x) for x in z)),
    }
    if any(abs(x) > 1 for x in z):
        raise PremiseFailure("Bang point z leaves the cube; parameters outside the regime",
                             {'phase': 'III', **diagnostics})

    if len(K3) < len(N1):
        rounded = round_preserving(rows, z)
    else:
        rounded = RoundedPoint(tuple(z), tuple(j for j, x in enumerate(z) if abs(x) != 1))
    w, fractional = rounded.w, rounded.fractional_coords
    variance_cut = float(n) ** p.variance_cut_exp
    sigma = [float(sum(((1 - x * x) * a * a for x, a in zip(w, row)), Fraction(0)))
             for row in rows]
    diagnostics.update({
        'fractional_coordinates': len(fractional),
        'sigma_squared': sigma,
        'low_variance_rows': sum(1 for s in sigma if s <= variance_cut),
    })

    def avoids(signs):
        for i, block in zip(K3, blocks):
            total = sum((a * s for a, s in zip(block, signs) if a), Fraction(0))
            if total == _fixed_residual(c.planes[i], u12, fixed_columns):
                return False
        return True

    if not fractional:
        signs = tuple(int(x) for x in w)
        if avoids(signs):
            diagnostics['rounding'] = 'deterministic'
            return u12.extend(dict(zip(N1, signs)), 'III'), diagnostics
        raise PhaseFailure("Rounded point lies on a K3 plane", {'phase': 'III', **diagnostics})

    for attempt in range(p.max_tries):
        signs = sample_rounding(w, derive_seed(p.seed, 'phase3', attempt))
        if avoids(signs):
            diagnostics['rounding'] = f'sampled after {attempt + 1} draw(s)'
            return u12.extend(dict(zip(N1, signs)), 'III'), diagnostics
    raise PhaseFailure(f"No N1 sample avoided every K3 plane in {p.max_tries} tries",
                       {'phase': 'III', 'tries': p.max_tries, **diagnostics})


# ─── Assembly ───

def _exhaustive(c, outcome, guard):
    if c.n > guard:
        outcome.diagnostics['fallback'] = f'skipped, n={c.n} exceeds the guard'
        return outcome
    found = uncovered_vertices(c, limit=1, guard=guard)
    if not found:
        outcome.diagnostics['fallback'] = 'exhaustive search: every vertex is covered'
        return outcome
    vertex = found[0]
    return FinderOutcome(FOUND, vertex, plane_evaluations(c, vertex),
                         {**outcome.diagnostics, 'fallback': 'used'}, method='exhaustive')


def find_uncovered(c, p=None, fallback_exhaustive=False, guard=DEFAULT_ENUMERATION_GUARD):
    """
    Construct a vertex that no plane of c passes through

    Args:
        c: Cover (any family of hyperplanes)
        p: ParamSet
        fallback_exhaustive: Sweep the cube when the pipeline fails
        guard: Largest n for the fallback sweep

    Returns:
        FinderOutcome; status 'found' always comes with a full certificate
    """
    p = p or ParamSet()
    diagnostics = {'n': c.n, 'k': c.k, 'premise_bound': p.premise_bound(c.n)}
    if c.k > p.premise_bound(c.n):
        diagnostics['premise_note'] = 'k exceeds n**alpha/divisor; running uncertified regime'
    try:
        d = decompose_four_way(c.normal_matrix(), p, enforce_premise=False)
        diagnostics['classes'] = {name: len(getattr(d, name))
                                  for name in ('K1', 'K2', 'K3', 'K4', 'N1', 'N2', 'N3')}
        diagnostics['flags'] = list(d.flags)
        u = phase1(c, d, p)
        u = phase2(c, d, u, p)
        u, phase3_info = phase3(c, d, u, p)
        diagnostics.update(phase3_info)
        vertex = u.complete()
    except PremiseFailure as exc:
        outcome = FinderOutcome(PREMISE_FAILURE, diagnostics={**diagnostics, **exc.diagnostics,
                                                             'reason': str(exc)})
    except PhaseFailure as exc:
        outcome = FinderOutcome(PHASE_FAILURE, diagnostics={**diagnostics, **exc.diagnostics,
                                                           'reason': str(exc)})
    except (BangSolverError, RoundingError) as exc:
        outcome = FinderOutcome(PHASE_FAILURE, diagnostics={**diagnostics, 'reason': str(exc)})
    except DecompositionError as exc:
        outcome = FinderOutcome(PREMISE_FAILURE, diagnostics={**diagnostics, 'reason': str(exc)})
    else:
        certificate = plane_evaluations(c, vertex)
        if all(value != 0 for value in certificate):
            logger.info("✓ Uncovered vertex certified against all %d planes", c.k)
            return FinderOutcome(FOUND, vertex, certificate, diagnostics)
        outcome = FinderOutcome(PHASE_FAILURE, diagnostics={
            **diagnostics, 'reason': 'assembled vertex failed certification',
            'covered_by': [i for i, v in enumerate(certificate) if v == 0]})
    logger.info("✗ Pipeline ended with %s: %s", outcome.status, outcome.diagnostics.get('reason'))
    if fallback_exhaustive:
        return _exhaustive(c, outcome, guard)
    return outcome
