import math

import numpy as np
import pytest
from scipy.stats import binom

from bifurclab.dsl import dual_family
from bifurclab.errors import NumericalError
from bifurclab.lyapunov import (chi_exterior, chi_spectrum_qr, chi_top, chi_top_long,
                                dual_spectrum_check, increment_samples)
from bifurclab.walk import uniform_symmetric


def test_biased_walk_matches_drift(load):
    fam, mu = load("biased_z")
    est = chi_top(fam, 2.0, mu, 2000, 200, 0)
    assert abs(est.value - 0.5 * math.log(2)) <= 3 * est.stderr
    assert est.stderr < 0.01


def test_symmetric_walk_matches_finite_n_binomial_oracle(load):
    # ρ(aᵏ) = diag(λᵏ, λ⁻ᵏ), k = 2·Binomial(n, 1/2) − n
    fam, mu = load("symmetric_z")
    lam, n = 1.7, 60
    j = np.arange(n + 1)
    k = 2 * j - n
    logs = 0.5 * np.log(lam ** (2.0 * k) + lam ** (-2.0 * k)) / n
    oracle = float(np.sum(binom.pmf(j, n, 0.5) * logs))
    est = chi_top(fam, lam, mu, n, 400, 1)
    assert abs(est.value - oracle) <= 3 * est.stderr


def test_constant_su2_family_has_zero_exponents(load):
    fam, mu = load("su2")
    est = chi_top(fam, 0.3, mu, 500, 20, 0)
    assert est.value == pytest.approx(0.5 * math.log(2) / 500, abs=1e-12)  # ‖unitary‖_F = √2
    spec = chi_spectrum_qr(fam, 0.3, mu, 500, 20, 0)
    assert all(abs(e.value) < 1e-12 for e in spec)


def test_identity_family(load):
    fam, mu = load("identity")
    spec = chi_spectrum_qr(fam, 0.0, mu, 100, 4, 0)
    assert [e.value for e in spec] == [0.0, 0.0]


@pytest.mark.parametrize("lam", [2.5, 3.0 + 0.5j])
def test_schottky_spectrum_sums_to_zero(load, lam):
    fam, mu = load("schottky")
    spec = chi_spectrum_qr(fam, lam, mu, 1000, 50, 2)
    assert spec[0].value > 0.3
    assert abs(spec[0].value + spec[1].value) < 1e-10


def test_exterior_matches_qr_partial_sums(load):
    fam, mu = load("diag_rot3")
    spec = chi_spectrum_qr(fam, 2.5, mu, 1000, 50, 4)
    for k in (1, 2, 3):
        ext = chi_exterior(fam, 2.5, mu, 1000, 50, 4, k)
        partial = sum(e.value for e in spec[:k])
        se = math.hypot(ext.stderr, math.sqrt(sum(e.stderr ** 2 for e in spec[:k])))
        assert abs(ext.value - partial) <= 3 * se + 1e-12


def test_dual_spectrum_is_negated_reversal(load):
    fam, mu = load("diag_rot3")
    rep = dual_spectrum_check(fam, 2.5, mu, 1000, 50, 5)
    assert rep.passed, rep.as_dict()
    assert rep.max_deviation == max(rep.deviations)


def test_dual_of_dual_is_original(load):
    fam, mu = load("schottky")
    a = chi_top(dual_family(dual_family(fam)), 2.5, mu, 200, 10, 0)
    b = chi_top(fam, 2.5, mu, 200, 10, 0)
    assert a.value == b.value


def test_increment_estimator_shares_prefix(load):
    fam, mu = load("symmetric_z")
    vals, bad = increment_samples(fam, np.array([1.5]), mu, 50, 8, 0)
    assert vals.shape == (8, 1) and not bad.any()


def test_long_run_estimate_agrees(load):
    fam, mu = load("biased_z")
    est = chi_top_long(fam, 2.0, mu, 500, 40, 0)
    assert abs(est.value - 0.5 * math.log(2)) <= 4 * est.stderr + 1e-3


def test_estimates_are_seed_deterministic(load):
    fam, mu = load("schottky")
    a = chi_top(fam, 2.2, mu, 100, 10, 42)
    b = chi_top(fam, 2.2, mu, 100, 10, 42)
    assert a == b and a.value == b.value
    c = chi_top(fam, 2.2, mu, 100, 10, 43)
    assert c.value != a.value


def test_argument_checks(load):
    fam, mu = load("schottky")
    with pytest.raises(ValueError):
        chi_top(fam, 2.0, mu, 0, 10, 0)
    with pytest.raises(ValueError):
        chi_exterior(fam, 2.0, mu, 10, 10, 0, 3)
