import math
import warnings

import numpy as np
import pytest

from bifurclab.dsl import family_from_dict
from bifurclab.errors import ChartDegenerate, ValidationError
from bifurclab.linalg import word_product
from bifurclab.measures import (PointCloud, furstenberg_check, hyperplane_mass, kernel_means,
                                limit_set_render, push_forward, sphere_coordinates,
                                stationarity_check, stationary_sample)
from bifurclab.walk import StepMeasure, Word

# fixed points of a^{±1} and b^{±1} in the Schottky family
SCHOTTKY_FIXED = np.array([[1, 0], [0, 1], [1, 1], [1, -1]]) / np.array([1, 1, 2 ** 0.5, 2 ** 0.5])[:, None]


def _fs(P, Q):
    P = P / np.linalg.norm(P, axis=-1, keepdims=True)
    Q = Q / np.linalg.norm(Q, axis=-1, keepdims=True)
    return np.arccos(np.clip(np.abs(P @ Q.conj().T), 0, 1))


def _cloud(points):
    pts = np.asarray(points, dtype=complex)
    return PointCloud(pts, np.zeros(len(pts), dtype=int), 1, 1, 0, 1.0)


@pytest.fixture(scope="module")
def schottky(load):
    fam, mu = load("schottky")
    return fam, mu, stationary_sample(fam, 3.0, mu, count=2048, seed=0)


def test_single_contraction_converges_to_its_attractor():
    fam = family_from_dict({"dimension": 2, "generators": {"a": [["2", "1"], ["0", "1/2"]]}})
    mu = StepMeasure((Word((1,)),), (1.0,))
    cloud = stationary_sample(fam, 0.0, mu, count=64, seed=0, start=[0.3, 1.0])
    assert _fs(cloud.points, np.array([[1, 0]])).max() < 1e-3


@pytest.mark.parametrize("lam", [3.0, 6.0])
def test_schottky_cloud_lies_in_ping_pong_disks(load, lam):
    # a maps the complement of the ball of radius r about e₂ into the ball about e₁ when tan r = 1/λ
    fam, mu = load("schottky")
    cloud = stationary_sample(fam, lam, mu, count=2048, seed=1)
    d = _fs(cloud.points, SCHOTTKY_FIXED)
    assert d.min(axis=1).max() <= math.atan(1 / lam)
    share = np.bincount(d.argmin(axis=1), minlength=4) / len(d)
    assert np.all(np.abs(share - 0.25) < 0.05)


def test_trivial_family_warns_and_stays_put(load):
    fam, mu = load("identity")
    with pytest.warns(RuntimeWarning):
        cloud = stationary_sample(fam, 0.0, mu, count=32, burn_in=10, start=[1, 2j])
    assert _fs(cloud.points, np.array([[1, 2j]])).max() < 1e-12


def test_chain_layout_and_determinism(schottky):
    fam, mu, cloud = schottky
    assert cloud.count == 2048 and cloud.meta["chains"] == 16
    assert np.all(np.bincount(cloud.chain) == 128)
    np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 1)
    again = stationary_sample(fam, 3.0, mu, count=2048, seed=0)
    np.testing.assert_array_equal(cloud.points, again.points)
    with pytest.raises(ValidationError):
        stationary_sample(fam, 3.0, mu, count=0)


def test_furstenberg_formula(schottky, load):
    fam, mu, cloud = schottky
    rep = furstenberg_check(fam, 3.0, mu, cloud, n=1000, trials=100, seed=2)
    assert rep.passed, rep.as_dict()
    fam, mu = load("biased_z")
    cloud = stationary_sample(fam, 2.0, mu, count=1024, seed=0)
    rep = furstenberg_check(fam, 2.0, mu, cloud, n=1000, trials=100, seed=2)
    assert rep.passed, rep.as_dict()


def test_dual_cloud_furstenberg(schottky):
    fam, mu, _ = schottky
    dual = stationary_sample(fam, 3.0, mu, count=1024, seed=0, dual=True)
    assert dual.dual
    assert furstenberg_check(fam, 3.0, mu, dual, n=1000, trials=100, seed=3).passed


def test_stationarity_and_properness(schottky):
    fam, mu, cloud = schottky
    assert stationarity_check(fam, 3.0, mu, cloud).passed
    hm = hyperplane_mass(cloud)
    assert hm["decreasing"]
    assert hm["max_fraction"][-1] < 0.01


def test_two_starting_points_agree(schottky):
    fam, mu, cloud = schottky
    other = stationary_sample(fam, 3.0, mu, count=2048, seed=0, start=[0.2, 1 + 0.5j])
    m1, s1 = kernel_means(cloud)
    m2, s2 = kernel_means(other)
    assert np.all(np.abs(m1 - m2) <= 3 * np.hypot(s1, s2) + 1e-12)


def test_support_is_invariant_under_the_generators(schottky):
    fam, mu, cloud = schottky
    images = [push_forward(cloud, word_product(fam, a, 3.0).full()).points for a in mu.atoms]
    union = np.concatenate(images)
    # Λ = ∪ γΛ: one-sided sample distances in both directions are small
    assert _fs(union, cloud.points).min(axis=1).max() < 0.05
    assert _fs(cloud.points, union).min(axis=1).max() < 0.05


def test_single_point_renders_to_one_pixel():
    f = limit_set_render(_cloud([[1, 0.5 + 0.25j]]), chart=0, resolution=16, extent=(0, 1, 0, 1))
    assert f.values.sum() == 1
    j, i = np.argwhere(f.values == 1)[0]
    assert (i, j) == (8, 4)
    s = limit_set_render(_cloud([[1, 0]]), chart="sphere", resolution=8)
    assert s.values.sum() == 1 and s.meta["outside"] == 0


def test_schottky_render_stays_in_the_disks(schottky):
    _, _, cloud = schottky
    f = limit_set_render(cloud, chart=0, resolution=128, extent=(-2, 2, -2, 2))
    lam = f.grid.nodes()[f.values > 0]
    d = _fs(np.stack([np.ones_like(lam), lam], axis=-1), SCHOTTKY_FIXED).min(axis=1)
    slack = math.hypot(f.grid.hx, f.grid.hy)  # FS metric is at most the chart metric
    assert d.max() <= math.atan(1 / 3) + slack
    assert f.values.sum() + f.meta["outside"] == cloud.count


def test_chart_at_infinity_is_degenerate():
    cloud = _cloud([[0, 1]] * 5)
    with pytest.raises(ChartDegenerate):
        limit_set_render(cloud, chart=0)
    assert limit_set_render(cloud, chart=1, resolution=4).values.sum() == 5


def test_sphere_coordinates_of_poles_and_equator():
    ll = sphere_coordinates(np.array([[1, 0], [0, 1], [1, 1], [1, 1j]], dtype=complex))
    np.testing.assert_allclose(ll[:, 1], [math.pi / 2, -math.pi / 2, 0, 0], atol=1e-12)
    np.testing.assert_allclose(ll[2:, 0], [0, -math.pi / 2], atol=1e-12)
