import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from bifurclab.divisors import (normalized_l1, trace_divisor_measure, trace_zero_count,
                                zero_counts_on_grid)
from bifurclab.errors import BoundaryZero, DegenerateLevel, ValidationError
from bifurclab.grid import ScanGrid
from bifurclab.walk import Word


def _cell_of(z, g):
    i = math.floor((z.real - g.re0) / g.hx)
    j = math.floor((z.imag - g.im0) / g.hy)
    if 0 <= i < g.nx and 0 <= j < g.ny:
        return j, i
    return None


def _near_edge(z, g, tol=1e-6):
    fx = (z.real - g.re0) / g.hx
    fy = (z.imag - g.im0) / g.hy
    return abs(fx - round(fx)) * g.hx < tol or abs(fy - round(fy)) * g.hy < tol


def _oracle_counts(roots, g):
    counts = np.zeros(g.shape, dtype=int)
    for z in roots:
        c = _cell_of(z, g)
        if c is not None:
            counts[c] += 1
    return counts


def test_single_cell_counts_power_roots(load):
    fam, _ = load("symmetric_z")
    # tr(a^k) − t = λ^k + λ^{−k} − t; zeros are the k-th roots of the roots of x² − t x + 1
    for k in (1, 2, 3):
        assert trace_zero_count(fam, Word((1,) * k), 2.5, (1.5, 2.5, -0.5, 0.5)) == (1 if k == 1 else 0)
    assert trace_zero_count(fam, Word((1, 1)), 2.5, (0.5, 1.6, -0.5, 0.5)) == 2  # √2 and 1/√2
    assert trace_zero_count(fam, Word((1,) * 3), 2.5, (0.5, 4, -2, 2)) == 2


def test_boundary_zero_is_reported(load):
    fam, _ = load("symmetric_z")
    with pytest.raises(BoundaryZero):
        trace_zero_count(fam, Word((1,)), 2.5, (2, 2.2, -0.2, 0.2))


@pytest.mark.parametrize("k", [1, 2, 4, 5])
def test_power_words_match_companion_roots(load, k):
    fam, _ = load("symmetric_z")
    t = 2.5 + 0.1j
    g = ScanGrid(0.55, 1.95, -0.7, 0.7, 14, 14)
    # λ^{2k} − t λ^k + 1 = 0
    coeffs = np.zeros(2 * k + 1, dtype=complex)
    coeffs[0], coeffs[k], coeffs[2 * k] = 1, -t, 1
    roots = P.polyroots(coeffs)
    assert not any(_near_edge(z, g) for z in roots)
    counts, masked = zero_counts_on_grid(fam, Word((1,) * k), t, g)
    assert not masked.any()
    np.testing.assert_array_equal(counts, _oracle_counts(roots, g))


_A = {1: [[[1], [2]], [[0], [1]]], -1: [[[1], [-2]], [[0], [1]]],
      2: [[[1], [0]], [[0, 1], [1]]], -2: [[[1], [0]], [[0, -1], [1]]]}


def _trace_poly(letters):
    M = [[np.array([1.0 + 0j]), np.array([0j])], [np.array([0j]), np.array([1.0 + 0j])]]
    for l in letters:
        G = [[np.array(c, dtype=complex) for c in row] for row in _A[l]]
        M = [[P.polyadd(P.polymul(M[i][0], G[0][j]), P.polymul(M[i][1], G[1][j]))
              for j in range(2)] for i in range(2)]
    return P.polyadd(M[0][0], M[1][1])


@settings(max_examples=25)
@given(st.lists(st.sampled_from([1, -1, 2, -2]), min_size=1, max_size=8))
def test_word_traces_match_polynomial_roots(letters):
    from bifurclab.families import load
    fam, _ = load("riley")
    t = 0.7 + 0.3j
    g = ScanGrid(-1.5, 1.5, -1.5, 1.5, 12, 12)
    poly = P.polysub(_trace_poly(letters), [t])
    poly = np.trim_zeros(poly, "b") if np.abs(poly).max() > 0 else poly
    if poly.size <= 1:
        return  # constant trace, e.g. powers of a
    roots = P.polyroots(poly)
    if any(_near_edge(z, g, 1e-4) for z in roots):
        return
    counts, masked = zero_counts_on_grid(fam, Word(tuple(letters)), t, g)
    assert not masked.any()
    np.testing.assert_array_equal(counts, _oracle_counts(roots, g))


def test_constant_family_has_no_zeros(load):
    fam, _ = load("su2")
    counts, masked = zero_counts_on_grid(fam, Word((1, 2, -1)), 0.3, ScanGrid(-1, 1, -1, 1, 8, 8))
    assert counts.sum() == 0 and not masked.any()


def test_identically_vanishing_level_is_degenerate(load):
    fam, _ = load("identity")
    with pytest.raises(DegenerateLevel):
        zero_counts_on_grid(fam, Word((1, 1)), 2, ScanGrid(-1, 1, -1, 1, 8, 8))


def test_counts_are_additive(load):
    fam, _ = load("riley")
    word = Word((1, 2, 1, -2, 2))
    t = 0.4 - 0.2j
    cell = (-1.5, 1.5, -1.5, 1.5)
    g = ScanGrid(*cell, 9, 9)
    counts, masked = zero_counts_on_grid(fam, word, t, g)
    assert not masked.any()
    assert counts.sum() == trace_zero_count(fam, word, t, cell)
    # merging a 3×3 block of cells gives the count of the merged rectangle
    block = (g.re0 + 3 * g.hx, g.re0 + 6 * g.hx, g.im0 + 3 * g.hy, g.im0 + 6 * g.hy)
    assert counts[3:6, 3:6].sum() == trace_zero_count(fam, word, t, block)


def test_divisor_measure_skips_degenerate_words(load):
    fam, mu = load("riley")
    g = ScanGrid(-1, 1, -1, 1, 9, 9)  # λ = 0 (a common zero) sits at a cell centre
    # length-one words are parabolic: trace 2 everywhere
    res = trace_divisor_measure(fam, mu, 2.0, g, 1, 4, 0)
    assert res.cloud.meta["degenerate_words"] == [0, 1, 2, 3]
    assert res.density.mask.all()
    res = trace_divisor_measure(fam, mu, 2.0, g, 4, 8, 0)
    assert res.masked_cells == 0
    used = 8 - len(res.cloud.meta["degenerate_words"])
    total = res.density.values.sum() * g.cell_area
    assert total == pytest.approx(res.cloud.total_multiplicity / (4 * used))


def test_divisor_measure_is_deterministic(load):
    fam, mu = load("riley")
    g = ScanGrid(-1, 1, -1, 1, 8, 8)
    a = trace_divisor_measure(fam, mu, 2.0, g, 3, 4, 7)
    b = trace_divisor_measure(fam, mu, 2.0, g, 3, 4, 7)
    np.testing.assert_array_equal(a.density.values, b.density.values)
    assert normalized_l1(a.density, b.density) == 0.0


def test_asymmetric_measure_is_refused(load):
    fam, mu = load("biased_z")
    with pytest.raises(ValidationError):
        trace_divisor_measure(fam, mu, 2.0, ScanGrid(0.5, 2, -1, 1, 8, 8), 2, 2, 0)
