"""
Exact Linear Algebra Module for Essential Cover Toolkit
Fraction-free Gaussian elimination over the rationals: echelon form, rank,
null space and affine rank of point sets
"""

from __future__ import annotations

import math
from fractions import Fraction


def integer_rows(rows):
    """Scale each rational row by its common denominator"""
    out = []
    for row in rows:
        values = [Fraction(a) for a in row]
        scale = math.lcm(*(a.denominator for a in values)) if values else 1
        out.append([int(a * scale) for a in values])
    return out


def _remove_content(row):
    g = 0
    for a in row:
        g = math.gcd(g, a)
    return [a // g for a in row] if g > 1 else row


def echelon_form(rows, ncols):
    """
    Fraction-free (Bareiss) row echelon form

    Args:
        rows: Rational matrix as a list of rows
        ncols: Number of columns (rows may be empty)

    Returns:
        tuple: (integer echelon rows, pivot columns)
    """
    m = integer_rows(rows)
    pivots = []
    r = 0
    previous = 1
    for col in range(ncols):
        if r == len(m):
            break
        pivot_row = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if pivot_row is None:
            continue
        m[r], m[pivot_row] = m[pivot_row], m[r]
        p = m[r][col]
        for i in range(r + 1, len(m)):
            factor = m[i][col]
            for j in range(col + 1, ncols):
                m[i][j] = (p * m[i][j] - factor * m[r][j]) // previous
            m[i][col] = 0
        previous = p
        pivots.append(col)
        r += 1
    return [_remove_content(row) for row in m[:r]], pivots


def rank(rows, ncols=None):
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    return len(echelon_form(rows, ncols)[1])


def primitive(vector):
    """Coprime integer multiple with positive leading entry"""
    values = [Fraction(a) for a in vector]
    scale = math.lcm(*(a.denominator for a in values)) if values else 1
    ints = _remove_content([int(a * scale) for a in values])
    lead = next((a for a in ints if a != 0), 0)
    if lead < 0:
        ints = [-a for a in ints]
    return tuple(Fraction(a) for a in ints)


def _kernel_vector(echelon, pivots, free, ncols):
    x = [Fraction(0)] * ncols
    x[free] = Fraction(1)
    for r in range(len(pivots) - 1, -1, -1):
        col = pivots[r]
        row = echelon[r]
        acc = sum((row[j] * x[j] for j in range(col + 1, ncols) if row[j]), Fraction(0))
        x[col] = -acc / row[col]
    return primitive(x)


def null_space(rows, ncols):
    """
    Basis of {x : A x = 0}, one primitive vector per free column

    Args:
        rows: Rational matrix
        ncols: Number of columns

    Returns:
        list of tuples of Fractions
    """
    echelon, pivots = echelon_form(rows, ncols)
    pivot_set = set(pivots)
    return [_kernel_vector(echelon, pivots, free, ncols)
            for free in range(ncols) if free not in pivot_set]


def null_vector(rows, ncols):
    """Kernel vector of the first free column, or None when the kernel is trivial"""
    echelon, pivots = echelon_form(rows, ncols)
    pivot_set = set(pivots)
    free = next((j for j in range(ncols) if j not in pivot_set), None)
    if free is None:
        return None
    return _kernel_vector(echelon, pivots, free, ncols)


def affine_rank(points):
    """Dimension of the affine hull of a non-empty point set"""
    points = [tuple(p) for p in points]
    if not points:
        raise ValueError("affine_rank needs at least one point")
    base = points[0]
    differences = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    return rank(differences, len(base)) if differences else 0
