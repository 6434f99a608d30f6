"""
Tests for the three-phase uncovered-vertex construction
"""
import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import layered_matrix
from cover_constructors import level_set_cover
from cover_verifier import check_essential, is_uncovered, uncovered_vertices
from cube_core import Cover, Hyperplane, ParamSet, load_cover, sign_block
from matrix_decomposition import decompose_four_way
from vertex_finder import (
    FOUND,
    PHASE_FAILURE,
    PREMISE_FAILURE,
    PartialVertex,
    PremiseFailure,
    find_uncovered,
    phase1,
    phase2,
    phase3,
    plank_point,
)


def _layered_cover():
    return Cover(256, tuple(Hyperplane(tuple(row), 0) for row in layered_matrix()))


def _random_family(rng, n, k):
    planes = []
    for _ in range(k):
        support = rng.choice(n, size=int(rng.integers(1, min(n, 6) + 1)), replace=False)
        normal = [0] * n
        for j in support:
            normal[int(j)] = int(rng.integers(1, 4)) * (1 if rng.random() < 0.5 else -1)
        planes.append(Hyperplane(tuple(normal), int(rng.integers(-3, 4))))
    return Cover(n, tuple(planes))


def _non_cover_corpus():
    rng = np.random.default_rng(31)
    corpus = []
    for n in (3, 5, 8, 12, 16, 20):
        corpus.append(level_set_cover(n).without(int(rng.integers(0, n + 1))))
    while len(corpus) < 50:
        c = _random_family(rng, int(rng.integers(2, 15)), int(rng.integers(1, 5)))
        if uncovered_vertices(c, limit=1):
            corpus.append(c)
    return corpus


# ─── Partial vertices ───

def test_partial_vertex_extension():
    u = PartialVertex(3).extend({0: 1}, 'I').extend({2: -1}, 'II')
    assert u.phase_tags == {0: 'I', 2: 'II'}
    with pytest.raises(ValueError):
        u.extend({0: -1}, 'III')
    with pytest.raises(ValueError):
        u.extend({1: 0}, 'III')
    with pytest.raises(ValueError):
        u.complete()
    assert u.extend({1: 1}, 'III').complete().to_list() == [1, 1, -1]


# ─── Phases ───

def test_phase1_avoids_vanishing_planes():
    c = level_set_cover(6).without(2)
    d = decompose_four_way(c.normal_matrix(), ParamSet(), enforce_premise=False)
    assert set(d.K1) == set(range(c.k))
    u = phase1(c, d)
    assert set(u.assigned) == set(d.N3)
    assert is_uncovered(c, u.complete())


def test_phase1_reports_unavoidable_planes(data_dir):
    c = load_cover(data_dir / 'covers' / 'diagonals2.json')
    d = decompose_four_way(c.normal_matrix(), ParamSet(), enforce_premise=False)
    with pytest.raises(PremiseFailure):
        phase1(c, d)


def test_plank_point_margins():
    rows = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
    theta = Fraction(1, 2)
    eps, z, margins = plank_point(rows, [Fraction(0), Fraction(1, 2)], theta)
    assert all(abs(m) >= theta for m in margins)
    assert z == [theta * eps[0], theta * eps[1]]


def test_phases_on_layered_cover(exaggerated):
    c = _layered_cover()
    d = decompose_four_way(c.normal_matrix(), exaggerated)
    u1 = phase1(c, d, exaggerated)
    assert u1.assigned == {60: -1}
    u2 = phase2(c, d, u1, exaggerated)
    assert set(u2.assigned) == {20, 40, 41, 60}
    u3, info = phase3(c, d, u2, exaggerated)
    assert info['bang_margin_ok']
    assert info['z_linf'] <= 1
    assert info['fractional_coordinates'] <= len(d.K3)
    assert len(info['sigma_squared']) == len(d.K3)
    assert is_uncovered(c, u3.complete())



def test_fixed_coordinates_keep_k4_off_for_every_completion(exaggerated):
    c = _layered_cover()
    d = decompose_four_way(c.normal_matrix(), exaggerated)
    u2 = phase2(c, d, phase1(c, d, exaggerated), exaggerated)
    assert d.K4
    for i in d.K2 + d.K4:
        plane = c.planes[i]
        free = [j for j in d.N1 if plane.normal[j]]
        fixed = sum((plane.normal[j] * s for j, s in u2.assigned.items()), Fraction(0)) - plane.offset
        assert fixed.denominator == 1 and len(free) <= 16
        weights = np.array([int(plane.normal[j]) for j in free], dtype=np.int64)
        totals = sign_block(len(free), 0, 1 << len(free)) @ weights + int(fixed)
        assert (totals != 0).all()


# ─── Assembly ───

def test_layered_cover_found_by_the_pipeline(exaggerated):
    outcome = find_uncovered(_layered_cover(), exaggerated)
    assert outcome.status == FOUND
    assert outcome.method == 'pipeline'
    assert all(value != 0 for value in outcome.certificate)
    assert outcome.diagnostics['classes']['K3'] == 2
    json.dumps(outcome.to_dict())


def test_half_plane_found(data_dir):
    c = load_cover(data_dir / 'covers' / 'half_plane.json')
    outcome = find_uncovered(c)
    assert outcome.status == FOUND
    assert is_uncovered(c, outcome.vertex)
    assert 'premise_note' in outcome.diagnostics


def test_essential_cover_is_never_found(data_dir):
    c = load_cover(data_dir / 'covers' / 'diagonals2.json')
    assert check_essential(c).is_essential
    outcome = find_uncovered(c)
    assert outcome.status in (PHASE_FAILURE, PREMISE_FAILURE)
    assert outcome.vertex is None
    assert 'reason' in outcome.diagnostics
    fallback = find_uncovered(c, fallback_exhaustive=True)
    assert fallback.status != FOUND
    assert 'every vertex is covered' in fallback.diagnostics['fallback']


@pytest.mark.parametrize('n', [2, 4, 7, 10])
def test_level_sets_minus_one_plane(n):
    for i in range(n + 1):
        c = level_set_cover(n).without(i)
        outcome = find_uncovered(c)
        assert outcome.status == FOUND
        assert sum(outcome.vertex) == n - 2 * i


@pytest.mark.slow
def test_corpus_with_fallback_is_complete():
    for c in _non_cover_corpus():
        outcome = find_uncovered(c, fallback_exhaustive=True)
        assert outcome.status == FOUND
        assert is_uncovered(c, outcome.vertex)


@pytest.mark.slow
def test_corpus_without_fallback_has_no_false_positive():
    for c in _non_cover_corpus():
        outcome = find_uncovered(c)
        if outcome.status == FOUND:
            assert is_uncovered(c, outcome.vertex)
            assert outcome.method == 'pipeline'
        else:
            assert outcome.status in (PHASE_FAILURE, PREMISE_FAILURE)
            assert outcome.diagnostics['reason']
        json.dumps(outcome.to_dict())


def test_outcome_is_seed_stable(data_dir):
    c = load_cover(data_dir / 'covers' / 'half_plane.json')
    p = ParamSet(seed=9)
    assert find_uncovered(c, p).to_dict() == find_uncovered(c, p).to_dict()
