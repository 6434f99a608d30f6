"""
Tests for reference covers, bound calculators and the minimum-cover oracle
"""
import math

import pytest

from cover_constructors import (
    OracleBudgetExceeded,
    degenerate_cover,
    enumerate_coplanar_atoms,
    level_set_cover,
    lr_lower_bound,
    lr_upper_bound,
    minimum_essential_cover_size,
    yy_lower_bound,
)
from cover_verifier import check_essential
from cube_core import CoverError, ParamSet, enumerate_cube, evaluate
from rational_linalg import affine_rank


def test_lr_lower_bound_anchors():
    assert lr_lower_bound(2) == 2.0
    assert lr_lower_bound(6) == 3.0
    assert lr_lower_bound(3) == pytest.approx(0.5 * (math.sqrt(13) + 1))
    with pytest.raises(ValueError):
        lr_lower_bound(0)


def test_yy_lower_bound_is_flagged_asymptotic():
    estimate = yy_lower_bound(10 ** 4)
    assert estimate.asymptotic
    assert estimate.value == pytest.approx(12.02, abs=0.01)
    assert yy_lower_bound(10 ** 4, ParamSet(divisor=1.0)).value == pytest.approx(120.2, abs=0.1)


def test_lr_upper_bound_value_only():
    assert lr_upper_bound(5).value == 3.0
    assert lr_upper_bound(6).value == 3.0
    assert lr_upper_bound(5).asymptotic


def test_reference_covers():
    assert degenerate_cover(4).k == 2
    assert level_set_cover(4).k == 5
    with pytest.raises(ValueError):
        degenerate_cover(0)


def test_square_atoms():
    atoms = enumerate_coplanar_atoms(2)
    assert len(atoms) == 6
    assert all(atom.size == 2 and atom.affine_dim == 1 for atom in atoms)
    sets = {frozenset(x.to_list()[0] * 2 + x.to_list()[1] for x in atom.vertex_set)
            for atom in atoms}
    # diagonals {(1,1),(-1,-1)} and {(1,-1),(-1,1)} are among them
    assert frozenset({3, -3}) in sets
    assert frozenset({1, -1}) in sets


def test_cube_atoms_are_maximal_sections():
    vertices = list(enumerate_cube(3))
    for atom in enumerate_coplanar_atoms(3):
        assert atom.affine_dim == 2
        assert len(atom.normal_space_basis) == 3 - atom.affine_dim
        for y in vertices:
            if y not in atom.vertex_set:
                assert affine_rank(list(atom.vertex_set) + [y]) == 3


@pytest.mark.parametrize('n', [2, 3])
def test_atom_hyperplanes_cut_out_exactly_their_vertices(n):
    for atom in enumerate_coplanar_atoms(n, maximal_only=False):
        h = atom.hyperplane(n)
        on_plane = {x for x in enumerate_cube(n) if evaluate(h, x) == 0}
        assert on_plane == set(atom.vertex_set)


def test_atom_dimension_limit():
    with pytest.raises(CoverError):
        enumerate_coplanar_atoms(5)


@pytest.mark.parametrize('n, expected', [(1, 2), (2, 2), (3, 3)])
def test_oracle_small_cubes(n, expected):
    result = minimum_essential_cover_size(n)
    assert result.size == expected
    assert result.size >= math.ceil(lr_lower_bound(n) - 1e-9)
    report = check_essential(result.witness)
    assert report.is_essential
    assert report.sparsity_ok
    assert result.witness.k == expected


def test_oracle_witness_document():
    payload = minimum_essential_cover_size(2).to_dict()
    assert payload['e'] == 2
    assert len(payload['witness_cover']['planes']) == 2


def test_oracle_budget():
    with pytest.raises(OracleBudgetExceeded):
        minimum_essential_cover_size(3, max_nodes=5)
