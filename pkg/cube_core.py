"""
Cube Core Module for Essential Cover Toolkit
Exact rationals, hypercube vertices, hyperplanes, covers and the shared
parameter set, plus JSON loading/saving and vertex enumeration
"""

from __future__ import annotations

import json
import logging
import math
import numbers
import os
import re
import zlib
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

Rat = Fraction

DEFAULT_ENUMERATION_GUARD = 30
BLOCK_ROWS = 1 << 15

_RATIONAL_TOKEN = re.compile(r'^\s*([+-]?\d+)(?:\s*/\s*([+-]?\d+))?\s*$')
_THRESHOLD_SCALE = 1 << 48
_INT64_SAFE = 1 << 62


# ─── Errors ───

class CoverError(Exception):
    """Base class for every error raised by the toolkit"""


class CoverFormatError(CoverError, ValueError):
    """Input that is not a well-formed cover, rational or parameter file"""


class DimensionMismatchError(CoverError, ValueError):
    """Vectors or planes of inconsistent length"""


class EnumerationGuardError(CoverError):
    """Dimension above the exhaustive enumeration guard"""


class PremiseViolation(CoverError):
    """Input outside the regime a construction is stated for"""


# ─── Rationals ───

def parse_rational(token):
    """
    Parse a "p/q" or "p" string into an exact rational

    Args:
        token: String such as "3", "-7/2"

    Returns:
        Fraction
    """
    match = _RATIONAL_TOKEN.match(token)
    if not match:
        raise CoverFormatError(f"Not an exact rational: {token!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise CoverFormatError(f"Zero denominator in {token!r}")
    return Fraction(numerator, denominator)


def to_rational(value):
    """Coerce ints, Fractions and rational strings; floats are rejected"""
    if isinstance(value, bool):
        raise CoverFormatError(f"Booleans are not rationals: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, numbers.Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_rational(value)
    raise CoverFormatError(f"Not an exact rational: {value!r}")


def format_rational(value):
    """Render as "p" or "p/q" """
    return str(Fraction(value))


def exact_constant(value):
    """Exact rational for a configuration constant given as int, Fraction or decimal float"""
    if isinstance(value, (Fraction, numbers.Integral)):
        return Fraction(value)
    return Fraction(repr(float(value)))


def power_threshold(n, exponent, upper):
    """
    Rational bracket of n**exponent

    Args:
        n: Positive base
        exponent: Real exponent
        upper: True for a value >= n**exponent, False for a value <= it

    Returns:
        Fraction
    """
    value = float(n) ** exponent
    scaled = value * _THRESHOLD_SCALE
    slack = 1 + 1e-12
    if upper:
        return Fraction(math.ceil(scaled * slack) + 1, _THRESHOLD_SCALE)
    return Fraction(max(math.floor(scaled / slack) - 1, 0), _THRESHOLD_SCALE)


# ─── Cube objects ───

@dataclass(frozen=True)
class Vertex:
    """A point of {-1, +1}^n"""
    signs: tuple

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (-1, 1) for s in signs):
            raise CoverFormatError(f"Vertex coordinates must be +-1: {self.signs!r}")
        object.__setattr__(self, 'signs', signs)

    @property
    def n(self):
        return len(self.signs)

    def __len__(self):
        return len(self.signs)

    def __iter__(self):
        return iter(self.signs)

    def __getitem__(self, j):
        return self.signs[j]

    def index(self):
        """Position in lexicographic order with -1 < +1"""
        value = 0
        for s in self.signs:
            value = (value << 1) | (1 if s == 1 else 0)
        return value

    def to_list(self):
        return list(self.signs)


def vertex_from_index(n, index):
    """Inverse of Vertex.index"""
    if not 0 <= index < (1 << n):
        raise ValueError(f"Index {index} outside the {n}-cube")
    return Vertex(tuple(1 if (index >> (n - 1 - j)) & 1 else -1 for j in range(n)))


@dataclass(frozen=True)
class Hyperplane:
    """The set {x : <x, normal> = offset}; normal must be non-zero"""
    normal: tuple
    offset: Fraction

    def __post_init__(self):
        normal = tuple(to_rational(a) for a in self.normal)
        offset = to_rational(self.offset)
        if not normal:
            raise CoverFormatError("Hyperplane normal is empty")
        if all(a == 0 for a in normal):
            raise CoverFormatError("Hyperplane normal is the zero vector")
        object.__setattr__(self, 'normal', normal)
        object.__setattr__(self, 'offset', offset)

    @property
    def n(self):
        return len(self.normal)

    @property
    def sparsity(self):
        return sparsity(self.normal)

    def support(self):
        return tuple(j for j, a in enumerate(self.normal) if a != 0)

    def integer_form(self):
        """Normal and offset scaled by the common denominator"""
        scale = math.lcm(*(a.denominator for a in self.normal), self.offset.denominator)
        return tuple(int(a * scale) for a in self.normal), int(self.offset * scale)

    def to_dict(self):
        return {
            'normal': [format_rational(a) for a in self.normal],
            'offset': format_rational(self.offset),
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or 'normal' not in data or 'offset' not in data:
            raise CoverFormatError(f"Plane entry needs 'normal' and 'offset': {data!r}")
        if not isinstance(data['normal'], list):
            raise CoverFormatError("Plane 'normal' must be a list")
        return cls(tuple(to_rational(a) for a in data['normal']), to_rational(data['offset']))


@dataclass(frozen=True)
class Cover:
    """An ordered family of hyperplanes in R^n"""
    n: int
    planes: tuple

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, numbers.Integral) or self.n < 1:
            raise CoverFormatError(f"Dimension must be a positive integer: {self.n!r}")
        planes = tuple(self.planes)
        if not planes:
            raise CoverFormatError("A cover needs at least one plane")
        for i, plane in enumerate(planes):
            if plane.n != self.n:
                raise DimensionMismatchError(
                    f"Plane {i} has {plane.n} coordinates, expected {self.n}")
        object.__setattr__(self, 'n', int(self.n))
        object.__setattr__(self, 'planes', planes)

    @property
    def k(self):
        return len(self.planes)

    def normal_matrix(self):
        """Rows are the plane normals"""
        return [list(plane.normal) for plane in self.planes]

    def offsets(self):
        return [plane.offset for plane in self.planes]

    def without(self, i):
        """Copy with plane i removed"""
        return Cover(self.n, self.planes[:i] + self.planes[i + 1:])

    def to_dict(self):
        return {'n': self.n, 'planes': [plane.to_dict() for plane in self.planes]}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict) or 'n' not in data or 'planes' not in data:
            raise CoverFormatError("Cover JSON needs 'n' and 'planes'")
        if not isinstance(data['planes'], list):
            raise CoverFormatError("'planes' must be a list")
        return cls(data['n'], tuple(Hyperplane.from_dict(p) for p in data['planes']))


def load_cover(path):
    """Read a cover JSON file"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise CoverFormatError(f"Cover file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CoverFormatError(f"Cover file is not valid JSON: {path} ({exc})") from exc
    cover = Cover.from_dict(data)
    logger.info("✓ Loaded cover with n=%d, k=%d from %s", cover.n, cover.k, path)
    return cover


def save_cover(cover, path):
    """Write a cover JSON file"""
    parent = os.path.dirname(str(path))
    if parent:
        Path(parent).mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(cover.to_dict(), f, indent=2, ensure_ascii=False)


# ─── Parameters ───

_EXPONENT_FIELDS = (
    'alpha', 'sparsity_exp', 'col_mass_exp', 'col_mass_exp_pre', 'cond1_exp',
    'theta_exp', 'm2_exp', 'variance_cut_exp', 'scale_count_exp',
)


@dataclass(frozen=True)
class ParamSet:
    """Exponents and constants of the uncovered-vertex construction"""
    alpha: float = 0.52
    divisor: float = 10.0
    sparsity_exp: float = 0.04
    col_mass_exp: float = 0.196
    col_mass_exp_pre: float = 0.1961
    cond1_exp: float = 0.332
    cond2_factor: float = 4.0
    theta_exp: float = 0.078
    m2_exp: float = 0.7171
    variance_cut_exp: float = 0.151
    scale_count_exp: float = 0.001
    scale_count_override: int | None = None
    c0: float = 2.0
    seed: int = 0
    max_tries: int = 200

    def __post_init__(self):
        for name in _EXPONENT_FIELDS:
            value = getattr(self, name)
            if not 0 < value < 1:
                raise CoverFormatError(f"Exponent {name}={value} must lie in (0, 1)")
        if self.divisor <= 0:
            raise CoverFormatError(f"divisor must be positive, got {self.divisor}")
        if self.cond2_factor <= 0:
            raise CoverFormatError(f"cond2_factor must be positive, got {self.cond2_factor}")
        if self.c0 <= 1:
            raise CoverFormatError(f"c0 must exceed 1, got {self.c0}")
        if self.scale_count_override is not None and self.scale_count_override < 2:
            raise CoverFormatError("scale_count_override must be at least 2")
        if not 0 <= self.seed < (1 << 64):
            raise CoverFormatError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.max_tries < 1:
            raise CoverFormatError(f"max_tries must be positive, got {self.max_tries}")

    def scale_count(self, n):
        """Number of scales S used for a problem of dimension n"""
        if self.scale_count_override is not None:
            return self.scale_count_override
        return max(1, math.floor(float(n) ** self.scale_count_exp))

    def c0_exact(self):
        return exact_constant(self.c0)

    def tau(self):
        """Drop threshold with (1 - tau) / tau = c0**2"""
        return 1 / (1 + self.c0_exact() ** 2)

    def premise_bound(self, n):
        return float(n) ** self.alpha / self.divisor

    def with_overrides(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise CoverFormatError("Params JSON must be an object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise CoverFormatError(f"Unknown parameter(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise CoverFormatError(f"Invalid parameter value: {exc}") from exc


def load_params(path=None):
    """Read a params JSON file; None gives the defaults"""
    if path is None:
        return ParamSet()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise CoverFormatError(f"Params file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CoverFormatError(f"Params file is not valid JSON: {path} ({exc})") from exc
    return ParamSet.from_dict(data)


# ─── Evaluation ───

def evaluate(h, x):
    """
    Exact value of <x, normal> - offset

    Args:
        h: Hyperplane
        x: Vertex or sequence of rationals of the same length

    Returns:
        Fraction (zero iff x lies on h)
    """
    values = tuple(x)
    if len(values) != h.n:
        raise DimensionMismatchError(f"Point has {len(values)} coordinates, plane has {h.n}")
    return sum((a * xj for a, xj in zip(h.normal, values) if a != 0), Fraction(0)) - h.offset


def sparsity(v):
    """Number of non-zero coordinates"""
    return sum(1 for a in v if a != 0)


# ─── Enumeration ───

def check_guard(n, guard=DEFAULT_ENUMERATION_GUARD):
    if n > guard:
        raise EnumerationGuardError(
            f"Exhaustive enumeration of the {n}-cube exceeds the guard n <= {guard}")


def cube_size(n):
    return 1 << n


def enumerate_cube(n, guard=DEFAULT_ENUMERATION_GUARD, start=0, stop=None):
    """
    Yield the vertices of {-1,+1}^n in lexicographic order (-1 < +1)

    Args:
        n: Dimension
        guard: Largest n accepted
        start, stop: Index range, for splitting a sweep across workers

    Returns:
        Iterator of Vertex
    """
    check_guard(n, guard)
    stop = cube_size(n) if stop is None else min(stop, cube_size(n))
    for index in range(start, stop):
        yield vertex_from_index(n, index)


def index_ranges(total, parts):
    """Split range(total) into at most `parts` contiguous (start, stop) pieces"""
    parts = max(1, min(parts, total)) if total else 1
    step, extra = divmod(total, parts)
    ranges, start = [], 0
    for p in range(parts):
        stop = start + step + (1 if p < extra else 0)
        ranges.append((start, stop))
        start = stop
    return ranges


def sign_block(n, start, stop):
    """Rows start..stop-1 of the cube in lexicographic order as an int64 array"""
    indices = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (indices[:, None] >> shifts[None, :]) & 1
    return 2 * bits - 1


def iter_blocks(n, start, stop, block_rows=BLOCK_ROWS):
    """Yield (offset, sign rows) blocks covering the index range"""
    for offset in range(start, stop, block_rows):
        yield offset, sign_block(n, offset, min(stop, offset + block_rows))


class IntegerSystem:
    """
    Planes scaled to integer coefficients so numpy can test whole blocks

    The zero pattern of <x, a> - b is unchanged by scaling, so membership
    tests stay exact as long as every sum fits in int64.
    """

    def __init__(self, planes):
        rows, offsets = zip(*(plane.integer_form() for plane in planes))
        self.k = len(rows)
        self.n = len(rows[0])
        self.fits = all(sum(abs(a) for a in row) + abs(b) < _INT64_SAFE
                        for row, b in zip(rows, offsets))
        self._planes = tuple(planes)
        if self.fits:
            self.normals = np.array(rows, dtype=np.int64)
            self.offsets = np.array(offsets, dtype=np.int64)

    def zero_mask(self, signs):
        """Boolean (rows x k) array: vertex row lies on plane column"""
        if self.fits:
            return signs @ self.normals.T == self.offsets[None, :]
        mask = np.zeros((signs.shape[0], self.k), dtype=bool)
        for r, row in enumerate(signs.tolist()):
            for i, plane in enumerate(self._planes):
                mask[r, i] = evaluate(plane, row) == 0
        return mask


# ─── Seeds ───

def _seed_word(label):
    if isinstance(label, str):
        return zlib.crc32(label.encode('utf-8'))
    if isinstance(label, numbers.Integral) and label >= 0:
        return int(label)
    raise ValueError(f"Seed labels must be strings or non-negative integers: {label!r}")


def derive_seed(seed, *labels):
    """Child seed for a labelled sub-task, stable across runs and platforms"""
    words = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF]
    words.extend(_seed_word(label) for label in labels)
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint64)
    return int(state[0])


def make_rng(seed, *labels):
    """PCG64 generator for the labelled sub-task"""
    child = derive_seed(seed, *labels) if labels else seed
    return np.random.Generator(np.random.PCG64(child))


def as_rational_vector(values):
    return tuple(to_rational(a) for a in values)


def as_rational_matrix(rows: Sequence) -> list:
    """Copy of a matrix with every entry an exact rational"""
    matrix = [list(as_rational_vector(row)) for row in rows]
    if matrix and any(len(row) != len(matrix[0]) for row in matrix):
        raise DimensionMismatchError("Matrix rows have different lengths")
    return matrix
