"""
Cover Constructors Module for Essential Cover Toolkit
Reference covers, published size bounds, coplanar vertex sets of small cubes
and an exact branch-and-bound search for the minimum essential cover size
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from tqdm import tqdm

from cube_core import Cover, CoverError, Hyperplane, ParamSet, Vertex, enumerate_cube
from rational_linalg import affine_rank, null_space, primitive

logger = logging.getLogger(__name__)

ATOM_DIMENSION_LIMIT = 4
DEFAULT_MAX_NODES = 5_000_000


class OracleBudgetExceeded(CoverError):
    """The set-cover search visited more nodes than allowed"""


# ─── Reference covers ───

def degenerate_cover(n):
    """
    The pair z_1 = 1, z_1 = -1: covers the cube, uses one variable

    Args:
        n: Dimension (>= 1)

    Returns:
        Cover (essential only when n = 1)
    """
    if n < 1:
        raise ValueError(f"Dimension must be positive, got {n}")
    unit = tuple(Fraction(1 if j == 0 else 0) for j in range(n))
    return Cover(n, (Hyperplane(unit, Fraction(1)), Hyperplane(unit, Fraction(-1))))


def level_set_cover(n):
    """The n + 1 planes sum(z) = n - 2t, t = 0..n; an essential cover for every n"""
    ones = tuple(Fraction(1) for _ in range(n))
    return Cover(n, tuple(Hyperplane(ones, Fraction(n - 2 * t)) for t in range(n + 1)))


# ─── Bounds ───

@dataclass(frozen=True)
class BoundEstimate:
    value: float
    asymptotic: bool
    note: str = ''

    def to_dict(self):
        return {'value': self.value, 'asymptotic': self.asymptotic, 'note': self.note}


def lr_lower_bound(n):
    """Exact lower bound (sqrt(4n + 1) + 1) / 2 on the essential cover size"""
    if n < 1:
        raise ValueError(f"Dimension must be positive, got {n}")
    return 0.5 * (math.sqrt(4 * n + 1) + 1)


def yy_lower_bound(n, p=None):
    """n**alpha / divisor; only meaningful for large n, flagged asymptotic"""
    p = p or ParamSet()
    return BoundEstimate(float(n) ** p.alpha / p.divisor, True,
                         'holds for all sufficiently large n')


def lr_upper_bound(n):
    """ceil(n / 2), the best known construction size; value only"""
    return BoundEstimate(float(math.ceil(n / 2)), True, 'construction not provided')


# ─── Coplanar atoms ───

@dataclass(frozen=True)
class CoplanarAtom:
    """
    Cube vertices cut out by an affine flat

    normal_space_basis spans the normals of every hyperplane containing the
    flat; its length is n - affine_dim.
    """
    vertex_set: frozenset
    affine_dim: int
    normal_space_basis: tuple

    @property
    def size(self):
        return len(self.vertex_set)

    def hyperplane(self, n, max_trials=1000):
        """Hyperplane through exactly these vertices with the largest possible support"""
        basis = self.normal_space_basis
        anchor = next(iter(self.vertex_set))
        wanted = {j for b in basis for j, a in enumerate(b) if a != 0}
        outside = [x for x in enumerate_cube(n) if x not in self.vertex_set]
        for t in range(1, max_trials + 1):
            normal = [sum((Fraction(t) ** i * b[j] for i, b in enumerate(basis)), Fraction(0))
                      for j in range(n)]
            support = {j for j, a in enumerate(normal) if a != 0}
            if support != wanted:
                continue
            offset = sum((a * x for a, x in zip(normal, anchor)), Fraction(0))
            if any(sum((a * x for a, x in zip(normal, y)), Fraction(0)) == offset
                   for y in outside):
                continue
            scaled = primitive(normal)
            lead = next(j for j in range(n) if normal[j] != 0)
            return Hyperplane(scaled, offset * scaled[lead] / normal[lead])
        raise CoverError(f"No generic normal found for atom of size {self.size}")

    def sorted_vertices(self):
        return sorted(self.vertex_set, key=Vertex.index)


def _closure(points, vertices, n):
    """Cube vertices on the affine hull of `points`"""
    base = points[0]
    differences = [[Fraction(a - b) for a, b in zip(p, base)] for p in points[1:]]
    if differences:
        basis = null_space(differences, n)
    else:
        basis = [tuple(Fraction(1 if i == j else 0) for i in range(n)) for j in range(n)]
    level = [sum((a * x for a, x in zip(b, base)), Fraction(0)) for b in basis]
    members = frozenset(
        x for x in vertices
        if all(sum((a * xj for a, xj in zip(b, x)), Fraction(0)) == c for b, c in zip(basis, level))
    )
    return members, tuple(basis)


def enumerate_coplanar_atoms(n, maximal_only=True):
    """
    Vertex sets of the n-cube cut out by affine flats

    Args:
        n: Dimension, at most 4
        maximal_only: Keep only sets that no further vertex can join while
            staying inside a hyperplane; otherwise every closed section of
            affine dimension <= n - 1 is returned

    Returns:
        list of CoplanarAtom, largest first, then by sorted vertex indices
    """
    if not 1 <= n <= ATOM_DIMENSION_LIMIT:
        raise CoverError(f"Coplanar atoms are enumerated for 1 <= n <= {ATOM_DIMENSION_LIMIT}")
    vertices = list(enumerate_cube(n))
    sizes = [n] if maximal_only else range(1, n + 1)
    atoms = {}
    for size in sizes:
        for subset in combinations(vertices, size):
            if affine_rank(subset) != size - 1:
                continue
            members, basis = _closure(list(subset), vertices, n)
            if members in atoms:
                continue
            dim = affine_rank(list(members))
            if dim <= n - 1:
                atoms[members] = CoplanarAtom(members, dim, basis)
    ordered = sorted(atoms.values(),
                     key=lambda a: (-a.size, sorted(x.index() for x in a.vertex_set)))
    logger.info("✓ Enumerated %d coplanar atoms for n=%d", len(ordered), n)
    return ordered


# ─── Minimum essential cover ───

@dataclass(frozen=True)
class OracleResult:
    n: int
    size: int
    witness: Cover
    nodes: int

    def to_dict(self):
        return {'n': self.n, 'e': self.size, 'nodes': self.nodes, 'witness_cover': self.witness.to_dict()}


class EssentialCoverSearch:
    """
    Branch and bound over families of closed sections of the cube

    Each section stands for the hyperplane through exactly its vertices with
    the largest normal support, so a family is an essential cover iff it
    covers every vertex, every section keeps a private vertex and the
    supports together use every variable.
    """

    def __init__(self, n, max_nodes=DEFAULT_MAX_NODES, show_progress=False):
        self.n = n
        self.max_nodes = max_nodes
        self.show_progress = show_progress
        self.atoms = enumerate_coplanar_atoms(n, maximal_only=False)
        self.masks = [sum(1 << x.index() for x in atom.vertex_set) for atom in self.atoms]
        self.supports = [sum(1 << j for b in atom.normal_space_basis
                             for j, a in enumerate(b) if a != 0) for atom in self.atoms]
        self.full = (1 << (1 << n)) - 1
        self.all_variables = (1 << n) - 1
        self.largest = max(atom.size for atom in self.atoms)
        self.by_vertex = {
            v: [a for a, mask in enumerate(self.masks) if mask >> v & 1]
            for v in range(1 << n)
        }
        self.nodes = 0

    def bound(self, covered, slots):
        uncovered = bin(self.full & ~covered).count('1')
        return uncovered > slots * self.largest

    def branch(self, chosen, privates, covered, slots):
        self.nodes += 1
        if self.nodes > self.max_nodes:
            raise OracleBudgetExceeded(
                f"Search for n={self.n} exceeded {self.max_nodes} nodes")
        if covered == self.full:
            support = 0
            for a in chosen:
                support |= self.supports[a]
            return list(chosen) if support == self.all_variables else None
        if slots == 0 or self.bound(covered, slots):
            return None
        low = (self.full & ~covered)
        vertex = (low & -low).bit_length() - 1
        for a in self.by_vertex[vertex]:
            mask = self.masks[a]
            updated = [p & ~mask for p in privates]
            if any(p == 0 for p in updated):
                continue
            found = self.branch(chosen + [a], updated + [mask & ~covered],
                                covered | mask, slots - 1)
            if found is not None:
                return found
        return None

    def run(self):
        for size in tqdm(range(1, (1 << self.n) + 1), desc="   Family size",
                         disable=not self.show_progress, leave=False):
            family = self.branch([], [], 0, size)
            if family is not None:
                planes = tuple(self.atoms[a].hyperplane(self.n) for a in family)
                return OracleResult(self.n, size, Cover(self.n, planes), self.nodes)
        raise CoverError(f"No essential cover found for n={self.n}")


def minimum_essential_cover_size(n, max_nodes=DEFAULT_MAX_NODES, show_progress=False):
    """
    Exact minimum essential cover size e(n) with a witness

    Args:
        n: Dimension, at most 4
        max_nodes: Search budget

    Returns:
        OracleResult
    """
    search = EssentialCoverSearch(n, max_nodes=max_nodes, show_progress=show_progress)
    result = search.run()
    logger.info("✓ e(%d) = %d after %d nodes", n, result.size, result.nodes)
    return result
