"""
Tests for rationals, cube objects, parameters and enumeration
"""
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cube_core import (
    Cover,
    CoverFormatError,
    DimensionMismatchError,
    EnumerationGuardError,
    Hyperplane,
    IntegerSystem,
    ParamSet,
    Vertex,
    derive_seed,
    enumerate_cube,
    evaluate,
    format_rational,
    index_ranges,
    load_cover,
    load_params,
    make_rng,
    parse_rational,
    power_threshold,
    save_cover,
    sign_block,
    sparsity,
    to_rational,
    vertex_from_index,
)
from conftest import covers, hyperplanes, rationals


# ─── Rationals ───

@pytest.mark.parametrize('token, expected', [
    ('3', Fraction(3)),
    ('-7/2', Fraction(-7, 2)),
    (' 4 / 6 ', Fraction(2, 3)),
    ('+5', Fraction(5)),
])
def test_parse_rational(token, expected):
    assert parse_rational(token) == expected


@pytest.mark.parametrize('token', ['1.5', '1/0', 'abc', '', '1/2/3', '1e3'])
def test_parse_rational_rejects(token):
    with pytest.raises(CoverFormatError):
        parse_rational(token)


def test_to_rational_rejects_floats_and_booleans():
    with pytest.raises(CoverFormatError):
        to_rational(0.5)
    with pytest.raises(CoverFormatError):
        to_rational(True)
    assert to_rational(np.int64(4)) == 4
    assert to_rational('2/4') == Fraction(1, 2)


@given(st.fractions(max_denominator=10 ** 12))
def test_rational_text_round_trip(q):
    assert parse_rational(format_rational(q)) == q
    assert to_rational(format_rational(q)) == q


@pytest.mark.parametrize('n, exponent', [(2, 0.078), (256, -0.2), (10_000, 0.52), (7, 0.5)])
def test_power_threshold_brackets(n, exponent):
    lower = power_threshold(n, exponent, upper=False)
    upper = power_threshold(n, exponent, upper=True)
    assert lower < upper
    assert float(lower) <= n ** exponent <= float(upper)
    assert float(upper - lower) < 1e-9 * max(1.0, n ** exponent)


# ─── Cube objects ───

def test_vertex_rejects_non_signs():
    with pytest.raises(CoverFormatError):
        Vertex((1, 0, -1))


@given(st.integers(1, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))))
def test_vertex_index_inverse(case):
    n, index = case
    assert vertex_from_index(n, index).index() == index


def test_enumeration_order_small_cube():
    assert [x.to_list() for x in enumerate_cube(2)] == [[-1, -1], [-1, 1], [1, -1], [1, 1]]


def test_enumeration_guard():
    with pytest.raises(EnumerationGuardError):
        next(enumerate_cube(31))
    assert next(enumerate_cube(31, guard=31)).to_list() == [-1] * 31


@pytest.mark.parametrize('n', [1, 5, 10, 16])
def test_enumeration_yields_every_vertex_once(n):
    vertices = [x.signs for x in enumerate_cube(n)]
    assert len(vertices) == 1 << n
    assert len(set(vertices)) == 1 << n


@pytest.mark.slow
def test_twenty_cube_count():
    seen = np.zeros(1 << 20, dtype=bool)
    count = 0
    for x in enumerate_cube(20):
        seen[x.index()] = True
        count += 1
    assert count == 1 << 20
    assert seen.all()


@pytest.mark.parametrize('parts', [1, 3, 4, 7])
def test_split_ranges_reassemble_the_sweep(parts):
    ranges = index_ranges(1 << 5, parts)
    pieces = [x for start, stop in ranges for x in enumerate_cube(5, start=start, stop=stop)]
    assert pieces == list(enumerate_cube(5))


def test_sign_block_matches_enumeration():
    block = sign_block(4, 0, 16)
    assert block.dtype == np.int64
    assert block.tolist() == [x.to_list() for x in enumerate_cube(4)]


def test_hyperplane_validation():
    with pytest.raises(CoverFormatError):
        Hyperplane((0, 0), 1)
    with pytest.raises(CoverFormatError):
        Hyperplane((1, 0.5), 0)
    h = Hyperplane(('1/2', '-1/3'), '1')
    assert h.integer_form() == ((3, -2), 6)
    assert h.support() == (0, 1)


def test_cover_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        Cover(2, (Hyperplane((1, 0), 0), Hyperplane((1, 0, 1), 0)))
    with pytest.raises(CoverFormatError):
        Cover(2, ())


def test_evaluate_exact():
    h = Hyperplane((1, 1), 0)
    assert evaluate(h, Vertex((1, 1))) == 2
    assert evaluate(h, Vertex((1, -1))) == 0
    assert evaluate(Hyperplane(('1/3', '1/3', '1/3'), 0), (1, 1, -1)) == Fraction(1, 3)
    with pytest.raises(DimensionMismatchError):
        evaluate(h, (1, 1, 1))


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(
    hyperplanes(n),
    st.lists(rationals(), min_size=n, max_size=n),
    st.lists(rationals(), min_size=n, max_size=n),
    rationals(),
    rationals(),
)))
def test_evaluate_is_affine(case):
    h, x, y, a, b = case
    direct = sum((Fraction(c.numerator, c.denominator) * xj for c, xj in zip(h.normal, x)),
                 Fraction(0)) - h.offset
    assert evaluate(h, x) == direct
    combined = [a * xj + b * yj for xj, yj in zip(x, y)]
    linear = [evaluate(h, point) + h.offset for point in (x, y, combined)]
    assert linear[2] == a * linear[0] + b * linear[1]


def test_sparsity():
    assert sparsity([0, Fraction(1, 2), 0, -3]) == 2
    assert sparsity([0, 0]) == 0


def test_float_entries_rejected_on_load(data_dir):
    with pytest.raises(CoverFormatError):
        load_cover(data_dir / 'covers' / 'float_entry.json')


def test_missing_file_is_format_error(tmp_path):
    with pytest.raises(CoverFormatError):
        load_cover(tmp_path / 'absent.json')


def test_save_then_load(tmp_path, data_dir):
    cover = load_cover(data_dir / 'covers' / 'diagonals2.json')
    target = tmp_path / 'nested' / 'cover.json'
    save_cover(cover, target)
    assert load_cover(target) == cover
    assert json.loads(target.read_text())['planes'][1]['normal'] == ['1', '-1']


@given(covers(max_n=8))
def test_integer_system_agrees_with_exact_evaluation(c):
    signs = sign_block(c.n, 0, 1 << c.n)
    mask = IntegerSystem(c.planes).zero_mask(signs)
    for r, row in enumerate(signs.tolist()):
        assert mask[r].tolist() == [evaluate(h, row) == 0 for h in c.planes]


def test_integer_system_exact_fallback():
    huge = 1 << 70
    planes = (Hyperplane((huge, 1), huge + 1), Hyperplane((1, 0), 1))
    system = IntegerSystem(planes)
    assert not system.fits
    mask = system.zero_mask(sign_block(2, 0, 4))
    assert mask.tolist() == [[False, False], [False, False], [False, True], [True, True]]


# ─── Parameters ───

def test_param_defaults():
    p = ParamSet()
    assert p.alpha == 0.52 and p.c0 == 2.0 and p.seed == 0
    assert p.scale_count(10_000) == 1
    assert p.tau() == Fraction(1, 5)


@pytest.mark.parametrize('changes', [
    {'alpha': 1.2},
    {'theta_exp': 0},
    {'c0': 1.0},
    {'divisor': -1},
    {'scale_count_override': 1},
    {'seed': -3},
    {'seed': 1 << 64},
    {'max_tries': 0},
])
def test_param_validation(changes):
    with pytest.raises(CoverFormatError):
        ParamSet(**changes)


def test_params_file(exaggerated, tmp_path):
    assert exaggerated.scale_count(256) == 2
    assert exaggerated.seed == 7
    assert exaggerated.with_overrides(seed=None).seed == 7
    assert exaggerated.with_overrides(seed=3).seed == 3
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'alpha': 0.5, 'colour': 'blue'}))
    with pytest.raises(CoverFormatError, match='colour'):
        load_params(bad)
    assert load_params(None) == ParamSet()


# ─── Seeds ───

def test_derive_seed_is_stable_and_label_sensitive():
    assert derive_seed(0, 'phase2', 3) == derive_seed(0, 'phase2', 3)
    assert derive_seed(0, 'phase2', 3) != derive_seed(0, 'phase2', 4)
    assert derive_seed(0, 'phase2') != derive_seed(0, 'phase3')
    assert derive_seed(1, 'phase2') != derive_seed(0, 'phase2')
    assert 0 <= derive_seed(2 ** 64 - 1, 'x') < 2 ** 64


def test_make_rng_streams_repeat():
    a = make_rng(11, 'scales', 2).integers(0, 1000, size=5)
    b = make_rng(11, 'scales', 2).integers(0, 1000, size=5)
    assert a.tolist() == b.tolist()
