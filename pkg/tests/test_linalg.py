import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bifurclab.errors import RankCollapse
from bifurclab.linalg import (ProjHyperplane, ProjPoint, distance_to_hyperplane, eigen_moduli,
                              exterior_power, fs_distance_batch, fubini_study_distance,
                              normalize_projective, qr_step, top_eigvecs_batch, word_product)
from bifurclab.walk import Word
from conftest import random_sl

seeds = st.integers(0, 10 ** 6)


@given(seeds, st.integers(2, 4), st.data())
def test_exterior_power_is_multiplicative(seed, d, data):
    k = data.draw(st.integers(1, d))
    rng = np.random.default_rng(seed)
    A, B = random_sl(rng, d), random_sl(rng, d)
    np.testing.assert_allclose(exterior_power(A @ B, k), exterior_power(A, k) @ exterior_power(B, k),
                               atol=1e-9 * (1 + np.abs(exterior_power(A @ B, k)).max()))


def test_exterior_power_top_degree_is_determinant():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert exterior_power(M, 3)[0, 0] == pytest.approx(np.linalg.det(M))
    # eigenvalues of the second power are products of pairs of eigenvalues
    ev = np.linalg.eigvals(M)
    pairs = sorted(abs(ev[i] * ev[j]) for i in range(3) for j in range(i + 1, 3))
    np.testing.assert_allclose(sorted(np.abs(np.linalg.eigvals(exterior_power(M, 2)))), pairs, rtol=1e-9)


@given(seeds, st.integers(2, 5))
def test_eigen_moduli_match_numpy(seed, d):
    rng = np.random.default_rng(seed)
    M = random_sl(rng, d)
    ref = np.sort(np.abs(np.linalg.eigvals(M)))[::-1]
    np.testing.assert_allclose(eigen_moduli(M), ref, rtol=1e-8, atol=1e-10)


def test_eigenvectors():
    M = np.array([[2.0, 1.0], [0.0, 0.5]], dtype=complex)
    mods, vals, V = eigen_moduli(M, vectors=True)
    for i in range(2):
        np.testing.assert_allclose(M @ V[:, i], vals[i] * V[:, i], atol=1e-10)
    vecs = top_eigvecs_batch(M[None], vals[None])
    for i in range(2):
        np.testing.assert_allclose(M @ vecs[0, i], vals[i] * vecs[0, i], atol=1e-10)


def test_qr_step_contract():
    rng = np.random.default_rng(1)
    M = random_sl(rng, 3)
    q, logs = qr_step(np.eye(3, 2, dtype=complex), M)
    np.testing.assert_allclose(q.conj().T @ q, np.eye(2), atol=1e-12)
    r = q.conj().T @ M[:, :2]
    assert np.all(np.diagonal(r).real > 0)
    np.testing.assert_allclose(np.exp(logs), np.abs(np.diagonal(r)), rtol=1e-10)
    with pytest.raises(ValueError):
        qr_step(np.ones((3, 2)), M)
    with pytest.raises(RankCollapse):
        qr_step(np.eye(3, 2, dtype=complex), np.zeros((3, 3)))


def test_word_product_is_scaled_and_unimodular(load):
    fam, _ = load("schottky")
    w = Word((1, 2, -1, 2) * 50)
    sp = word_product(fam, w, 2.5 + 0.3j)
    ref = np.eye(2, dtype=complex)
    for x in w.letters:
        ref = ref @ fam.matrix(x, 2.5 + 0.3j)
    assert sp.log_norm == pytest.approx(math.log(np.linalg.norm(ref)), rel=1e-10)
    np.testing.assert_allclose(sp.full(), ref, rtol=1e-8)
    empty = word_product(fam, Word(()), 1.0)
    np.testing.assert_array_equal(empty.matrix, np.eye(2))
    assert empty.log_scale == 0.0


@given(seeds)
def test_fubini_study_distance_properties(seed):
    rng = np.random.default_rng(seed)
    p, q, r = (rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(3))
    dpq = fubini_study_distance(p, q)
    assert 0 <= dpq <= math.pi / 2 + 1e-12
    assert fubini_study_distance(p, (2 - 1j) * p) == pytest.approx(0, abs=1e-7)
    assert dpq == pytest.approx(fubini_study_distance(q, p))
    assert fubini_study_distance(p, r) <= dpq + fubini_study_distance(q, r) + 1e-9
    assert fs_distance_batch(p[None], q[None])[0] == pytest.approx(dpq)


def test_projective_points_and_hyperplanes():
    p = ProjPoint.from_vector([2j, 4j])
    assert p.coords == (0.5, 1)
    h = ProjHyperplane.from_vector([1, -0.5])
    assert h.contains(p)
    assert distance_to_hyperplane(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0
    assert distance_to_hyperplane(np.array([0.0, 1.0]), np.array([0.0, 1.0])) == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        normalize_projective(np.zeros(2))
