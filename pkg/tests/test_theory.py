"""Tests for the numerical verification module.

Oracle values (frozen from scipy.integrate.quad / scipy.stats.norm, computed
independently of the code under test):

  * G(0,1) for the quadratic spec     = 2*Phi(1)-1 = 0.6826894921370859
  * half-line mean shift at nu=1      = 1/sqrt(2pi) = 0.3989422804014327
  * double-well region boundaries     = +-0.5411961001461969, +-1.3065629648763766
  * quadratic r_sigma at (mu,s)=(0,1) = 0.7088749052272068
  * quadratic expected update at (0.4, 0.5), nu=1:
        d_mu  = -0.0931353017001165
        d_var = -0.06379663260304985
  * es expected KL, d=1 nu=1 eps=0.01 (exact under uniform std ratios)
                                      = 0.5000833...
"""

import numpy as np
import pytest

from tdlab.gaussian import kl_diag
from tdlab.theory import (
    FitnessSpec,
    adaptive_simpson,
    direct_kl_closed_bound,
    direct_kl_samples,
    double_well_spec,
    es_expected_kl,
    eval_G,
    expected_target,
    expected_update_quadrature,
    find_region,
    fixed_point_residual,
    half_line_spec,
    iterate_expected_update,
    quadratic_spec,
    quadratic_spec_nd,
    success_indicators,
    verify_score_identities,
    verify_expected_updates,
)


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------

def test_eval_g_quadratic_matches_normal_cdf():
    rng = np.random.default_rng(0)
    est, se = eval_G(quadratic_spec(), 0.0, 1.0, 200_000, rng)
    assert se < 2e-3
    assert abs(est - 0.6826894921370859) < 3 * se


def test_eval_g_monotone_in_sigma_pointwise():
    # For the quadratic spec at mu=0 the success indicator is pointwise
    # monotone in sigma, so the estimate must be too under shared draws.
    rng = np.random.default_rng(1)
    y = rng.standard_normal((50_000, 1))
    tight = success_indicators(quadratic_spec(), np.zeros(1), np.array([0.5]), y)
    wide = success_indicators(quadratic_spec(), np.zeros(1), np.array([2.0]), y)
    assert np.all(tight >= wide)
    assert tight.mean() > wide.mean()


def test_expected_target_half_line_mean_shift():
    rng = np.random.default_rng(2)
    mu_p, var_p, se_mu, se_var = expected_target(half_line_spec(), 0.0, 1.0, 1.0, 400_000, rng)
    assert abs(mu_p[0] - 0.3989422804014327) < 3 * se_mu[0] + 1e-12
    # At mu=0 the half-line variance target is drift-free:
    # E[1{y>0} y^2 + 1{y<=0}] = 1/2 + 1/2 = 1.
    assert abs(var_p[0] - 1.0) < 3 * se_var[0]


def test_expected_target_respects_nu():
    rng = np.random.default_rng(3)
    mu_a, _, se_a, _ = expected_target(half_line_spec(), 0.0, 1.0, 0.5, 200_000, rng)
    assert abs(mu_a[0] - 0.5 * 0.3989422804014327) < 3 * se_a[0]


# ---------------------------------------------------------------------------
# gradient identity checks
# ---------------------------------------------------------------------------

def test_expected_updates_half_line():
    rng = np.random.default_rng(4)
    chk_mu, chk_var = verify_expected_updates(
        half_line_spec(), [0.3], [0.7], 0.8, 200_000, 1e-2, rng
    )
    assert chk_mu.passed() and chk_var.passed()
    assert abs(chk_mu.rhs[0]) > 1e-2  # the identity is not trivially 0 = 0


def test_expected_updates_quadratic_2d():
    rng = np.random.default_rng(5)
    chk_mu, chk_var = verify_expected_updates(
        quadratic_spec_nd(), [0.2, -0.4], [0.6, 1.1], 1.0, 200_000, 1e-2, rng
    )
    assert chk_mu.passed() and chk_var.passed()


def test_expected_updates_double_well():
    rng = np.random.default_rng(6)
    chk_mu, chk_var = verify_expected_updates(
        double_well_spec(), [0.9], [0.4], 1.0, 200_000, 1e-2, rng
    )
    assert chk_mu.passed() and chk_var.passed()


def test_score_identities_analytic_quadratic():
    # f(a) = a^2 has E[f] = mu^2 + sigma^2, so the smoothed gradients are
    # exactly 2*mu and 1; both routes must recover them.
    rng = np.random.default_rng(7)
    f = lambda a: np.sum(a * a, axis=-1)
    n = 300_000
    chk_mu, chk_var = verify_score_identities(f, [0.7], [1.3], n, 1e-2, rng)
    assert chk_mu.passed() and chk_var.passed()
    # Central FD is exact in the step size for quadratics; what is left is
    # pure sampling noise 2*sigma*mean(y), with known scale.
    assert abs(chk_mu.lhs[0] - 2 * 0.7) < 3 * 2 * 1.3 / np.sqrt(n)
    assert abs(chk_var.lhs[0] - 1.0) < 3 * chk_var.se[0] + 1e-6
    assert abs(chk_mu.rhs[0] - 2 * 0.7) < 4 * chk_mu.se[0]


def test_score_identities_smooth_2d():
    rng = np.random.default_rng(8)
    f = lambda a: np.sin(a[..., 0]) + np.cos(0.7 * a[..., 1])
    chk_mu, chk_var = verify_score_identities(
        f, [0.2, -0.5], [0.8, 1.4], 200_000, 1e-2, rng
    )
    assert chk_mu.passed() and chk_var.passed()


# ---------------------------------------------------------------------------
# quadrature machinery
# ---------------------------------------------------------------------------

def test_adaptive_simpson_sine():
    val = adaptive_simpson(np.sin, 0.0, np.pi, tol=1e-10)
    assert abs(val - 2.0) < 1e-9


def test_adaptive_simpson_cubic_exact():
    # Simpson with Richardson correction integrates cubics exactly.
    val = adaptive_simpson(lambda x: x**3, 0.0, 1.0)
    assert abs(val - 0.25) < 1e-15


def test_adaptive_simpson_odd_integrand_exact_zero():
    f = lambda x: x * np.exp(-x * x / 2.0)
    assert adaptive_simpson(f, -1.0, 1.0) == 0.0
    assert adaptive_simpson(f, -3.0, 3.0, tol=1e-12) == 0.0


def test_adaptive_simpson_rejects_reversed_interval():
    with pytest.raises(ValueError):
        adaptive_simpson(np.sin, 1.0, 0.0)


def test_find_region_explicit():
    comps = find_region(quadratic_spec(), 0.0, 1.0)
    assert comps == [(-1.0, 1.0)]
    comps = find_region(half_line_spec(), 0.0, 1.0)
    assert comps[0][0] == 0.0 and comps[0][1] == pytest.approx(12.0)


def test_find_region_double_well_roots():
    comps = find_region(double_well_spec(), 0.0, 1.0)
    assert len(comps) == 2
    inner = 0.5411961001461969
    outer = 1.3065629648763766
    (l0, r0), (l1, r1) = comps
    assert abs(l0 + outer) < 1e-9 and abs(r0 + inner) < 1e-9
    assert abs(l1 - inner) < 1e-9 and abs(r1 - outer) < 1e-9


def test_find_region_empty_raises():
    hopeless = FitnessSpec("never", lambda a: -np.ones(a.shape[:-1]), 0.0)
    with pytest.raises(ValueError):
        find_region(hopeless, 0.0, 1.0)


def test_fixed_point_residual_symmetric_mean_exact_zero():
    r_mu, r_sigma = fixed_point_residual(quadratic_spec(), 0.0, 1.0)
    assert r_mu == 0.0
    assert abs(r_sigma - 0.7088749052272068) < 1e-7


def test_fixed_point_residual_degenerate_raises():
    # Explicit region far outside any mass: the quadrature underflows to 0.
    with pytest.raises(ValueError):
        fixed_point_residual(quadratic_spec(), 40.0, 0.3)
    with pytest.raises(ValueError):
        fixed_point_residual(double_well_spec(), 40.0, 0.3)


def test_expected_update_quadrature_frozen_oracle():
    d_mu, d_var = expected_update_quadrature(quadratic_spec(), 0.4, 0.5, 1.0)
    assert abs(d_mu - (-0.0931353017001165)) < 1e-8
    assert abs(d_var - (-0.06379663260304985)) < 1e-8


def test_expected_update_quadrature_matches_monte_carlo():
    # Dual-route check: derivative-form quadrature vs direct sampling.
    rng = np.random.default_rng(9)
    for mu, sig, nu in [(0.4, 0.5, 1.0), (-0.2, 0.8, 0.6), (1.1, 0.35, 1.0)]:
        d_mu_q, d_var_q = expected_update_quadrature(quadratic_spec(), mu, sig, nu)
        mu_p, var_p, se_mu, se_var = expected_target(
            quadratic_spec(), mu, sig, nu, 400_000, rng
        )
        assert abs((mu_p[0] - mu) - d_mu_q) < 3 * se_mu[0]
        assert abs((var_p[0] - sig * sig) - d_var_q) < 3 * se_var[0]


def test_iterate_expected_update_mean_decays_monotonically():
    path = iterate_expected_update(quadratic_spec(), 1.5, 0.3, 50, nu=1.0)
    mus = [p[0] for p in path]
    assert len(mus) == 51
    assert all(abs(b) < abs(a) for a, b in zip(mus[:-1], mus[1:]))
    assert all(p[1] > 0 for p in path)


def test_iterate_expected_update_symmetric_start_stays_centered():
    path = iterate_expected_update(quadratic_spec(), 0.0, 1.0, 5, nu=1.0)
    assert all(p[0] == 0.0 for p in path)


# ---------------------------------------------------------------------------
# KL budget bounds
# ---------------------------------------------------------------------------

def test_direct_kl_closed_bound_attained_at_clip_corner():
    # Construct the extremal target by hand: mean offset norm sqrt(2*alpha),
    # every std ratio at 1-eps. Its KL (via the generic formula) must equal
    # the closed bound bit-for-bit in structure, to float accuracy.
    alpha, eps, d = 0.025, 0.01, 2
    mu_rel = np.full(d, np.sqrt(alpha))  # ||mu_rel||^2 = 2*alpha
    sig_rel = np.full(d, 1.0 - eps)
    kl = kl_diag(np.zeros(d), np.ones(d), mu_rel, sig_rel)
    assert abs(kl - direct_kl_closed_bound(d, alpha, eps)) < 1e-14


def test_direct_kl_samples_below_closed_bound():
    rng = np.random.default_rng(10)
    for d in (1, 2, 6):
        for alpha in (0.01, 0.05, 0.25):
            kl = direct_kl_samples(d, alpha, 0.01, 20_000, rng)
            assert np.all(kl >= 0.0)
            assert kl.max() <= direct_kl_closed_bound(d, alpha, 0.01) + 1e-12


def test_direct_kl_closed_bound_within_advertised_budget():
    # The headline budget 1.05*d*alpha dominates the exact worst case on the
    # whole working grid at eps = 0.01.
    for d in (1, 2, 6):
        for alpha in (0.01, 0.025, 0.05, 0.1, 0.25):
            assert direct_kl_closed_bound(d, alpha, 0.01) <= 1.05 * d * alpha


def test_direct_kl_closed_bound_rejects_bad_eps():
    with pytest.raises(ValueError):
        direct_kl_closed_bound(1, 0.05, 1.0)


def test_es_expected_kl_matches_exact_mean_and_bound():
    rng = np.random.default_rng(11)
    mean, se, bound = es_expected_kl(1, 1.0, 0.01, 200_000, rng)
    # Exact value under uniform std ratios (see module docstring oracle).
    eps = 0.01
    e_inv2 = 1.0 / (1.0 - eps**2)
    e_ln = ((1 + eps) * np.log(1 + eps) - (1 - eps) * np.log(1 - eps) - 2 * eps) / (2 * eps)
    exact = 0.5 * (e_inv2 + 2 * e_ln + e_inv2 - 1.0)
    assert abs(mean - exact) < 4 * se
    assert bound == pytest.approx(0.5 * 1.02)
    assert mean <= bound * (1.0 + 3.0 * se / mean)


def test_es_expected_kl_scales_with_dimension():
    rng = np.random.default_rng(12)
    m1, se1, b1 = es_expected_kl(1, 0.5, 0.01, 100_000, rng)
    m6, se6, b6 = es_expected_kl(6, 0.5, 0.01, 100_000, rng)
    assert b6 == pytest.approx(6 * b1)
    assert abs(m6 - 6 * m1) < 3 * np.sqrt(se6**2 + 36 * se1**2)
