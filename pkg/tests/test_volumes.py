import math

import numpy as np
import pytest
from scipy import integrate

from bifurclab.errors import ValidationError, VolumeUnreliable
from bifurclab.grid import ScanGrid
from bifurclab.volumes import fit_slope, graph_volume, mean_graph_volume
from bifurclab.walk import Word

L0 = 0.2 + 0.1j


def _fs_mass(x0, x1, y0, y1):
    # dd^c ½log(1 + |λ − λ₀|²) = (1/π)(1 + |λ − λ₀|²)^{-2} dA
    f = lambda y, x: 1 / (math.pi * (1 + (x - L0.real) ** 2 + (y - L0.imag) ** 2) ** 2)
    return integrate.dblquad(f, x0, x1, y0, y1, epsabs=1e-12)[0]


def _interior(g):
    return g.re0 + g.hx, g.re1 - g.hx, g.im0 + g.hy, g.im1 - g.hy


def test_empty_word_has_flat_graph(load):
    fam, _ = load("linear")
    g = ScanGrid(-1, 1, -1, 1, 20, 20)
    rec = graph_volume(fam, Word(()), [1, 0], g)
    assert rec.mass == pytest.approx(0, abs=1e-12)
    x0, x1, y0, y1 = _interior(g)
    assert rec.vol_u == pytest.approx((x1 - x0) * (y1 - y0))


@pytest.mark.parametrize("n", [40, 80])
def test_degree_one_graph_matches_quadrature(load, n):
    fam, _ = load("linear")
    g = ScanGrid(-1, 1, -1, 1, n, n)
    rec = graph_volume(fam, Word((1,)), [0, 1], g)
    # the cells of the interior nodes tile the grid rectangle minus a one-cell ring
    exact = _fs_mass(*_interior(g))
    assert rec.mass == pytest.approx(exact, rel=0.02)


def test_eigenvector_start_gives_zero_mass(load):
    # e₁ is fixed by the unipotent generator: constant graph
    fam, _ = load("linear")
    rec = graph_volume(fam, Word((1, 1, -1)), [1, 0], ScanGrid(-1, 1, -1, 1, 16, 16))
    assert abs(rec.mass) < 1e-12


def test_volume_is_refinement_stable(load):
    fam, _ = load("riley")
    word = Word((1, 2, -1, 2))
    vals = [graph_volume(fam, word, [1, 0], ScanGrid(-1, 1, -1, 1, n, n)).total for n in (48, 96)]
    assert abs(vals[1] - vals[0]) <= 0.05 * vals[1]


def test_bad_start_vector(load):
    fam, _ = load("riley")
    g = ScanGrid(-1, 1, -1, 1, 8, 8)
    with pytest.raises(ValidationError):
        graph_volume(fam, Word((1,)), [0, 0], g)
    with pytest.raises(ValidationError):
        graph_volume(fam, Word((1,)), [1, 0, 0], g)


def test_masked_grid_is_unreliable(load):
    fam, _ = load("symmetric_z")
    # the pole at 0 sits in a grid of which it poisons too few nodes, so widen the mask
    g = ScanGrid(-1, 1, -1, 1, 8, 8)
    fam2 = type(fam)(fam.dimension, fam.generators, fam.entries, tuple(g.nodes().ravel()[:16]), fam.domain)
    with pytest.raises(VolumeUnreliable):
        graph_volume(fam2, Word((1,)), [1, 1], g)


def test_fit_slope_recovers_a_line():
    ns = np.array([0, 4, 8, 12])
    slope, se, icpt = fit_slope(ns, 3 + 0.5 * ns, np.ones(4))
    assert slope == pytest.approx(0.5) and icpt == pytest.approx(3)
    assert se == pytest.approx(1 / math.sqrt(80))


def test_mean_volume_growth_and_determinism(load):
    fam, mu = load("riley")
    g = ScanGrid(-1, 1, -1, 1, 12, 12)
    a = mean_graph_volume(fam, mu, [1, 0], g, [2, 4, 6], 6, 3)
    b = mean_graph_volume(fam, mu, [1, 0], g, [2, 4, 6], 6, 3)
    assert a.as_dict() == b.as_dict()
    assert a.slope > 0 and a.ci_half_width > 0
    assert len(a.records) == 18
    d = mean_graph_volume(fam, mu, [1, 0], g, [2, 4], 4, 3, dual=True, reference_mass=1.0)
    assert d.meta["dual"] and d.relative_error is not None
    with pytest.raises(ValueError):
        mean_graph_volume(fam, mu, [1, 0], g, [2], 4, 3)
