import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats
from scipy.special import gammaincinv

import sbvae.distributions as dist
from sbvae.numerics import finite_difference_gradient, make_rng

SHAPES = st.floats(min_value=0.3, max_value=6.0, allow_nan=False)
INTERIOR = st.floats(min_value=1e-4, max_value=1.0 - 1e-4, allow_nan=False)


def quadrature_kl(log_q, log_p):
    """E_q[log q - log p] by adaptive quadrature on (0,1)."""

    def integrand(x):
        return np.exp(log_q(x)) * (log_q(x) - log_p(x))

    val, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    return val


# ---------------------------------------------------------------------------
# Kumaraswamy
# ---------------------------------------------------------------------------

def test_inverse_cdf_uniform_case():
    assert dist.kumaraswamy_inverse_cdf(0.5, 1.0, 1.0) == pytest.approx(0.5)
    assert dist.kumaraswamy_inverse_cdf(0.25, 1.0, 2.0) == pytest.approx(0.5)


def test_quantile_matches_bisection_oracle():
    a, b, u = 2.5, 3.2, 0.7
    lo, hi = 0.0, 1.0
    # bisection on CDF(x) = 1 - (1 - x^a)^b = u
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if 1.0 - (1.0 - mid**a) ** b < u:
            lo = mid
        else:
            hi = mid
    assert dist.kumaraswamy_quantile(u, a, b) == pytest.approx(lo, abs=1e-12)


@given(u=INTERIOR, a=SHAPES, b=SHAPES)
@settings(max_examples=60, deadline=None)
def test_sampler_is_reflected_quantile(u, a, b):
    # the DNCP draw maps u the same way the quantile maps 1-u
    assert dist.kumaraswamy_inverse_cdf(u, a, b) == pytest.approx(
        dist.kumaraswamy_quantile(1.0 - u, a, b), rel=1e-9, abs=1e-12
    )


def test_inverse_cdf_domain_error():
    with pytest.raises(ValueError):
        dist.kumaraswamy_inverse_cdf(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        dist.kumaraswamy_inverse_cdf(1.0, 1.0, 1.0)


@given(u=INTERIOR, a=SHAPES, b=SHAPES)
@settings(max_examples=60, deadline=None)
def test_quantile_roundtrip(u, a, b):
    assert dist.kumaraswamy_cdf(
        dist.kumaraswamy_quantile(u, a, b), a, b
    ) == pytest.approx(u, abs=1e-10)
    # the sampler lands at complementary CDF mass (looser: 1-u^{1/b} rounds
    # for tiny tail mass, so the complement loses a few digits)
    assert dist.kumaraswamy_cdf(
        dist.kumaraswamy_inverse_cdf(u, a, b), a, b
    ) == pytest.approx(1.0 - u, abs=1e-7)


@given(a=SHAPES, b=SHAPES)
@settings(max_examples=30, deadline=None)
def test_quantile_monotone_in_u(a, b):
    u = np.linspace(0.01, 0.99, 50)
    assert np.all(np.diff(dist.kumaraswamy_quantile(u, a, b)) > 0)
    assert np.all(np.diff(dist.kumaraswamy_inverse_cdf(u, a, b)) < 0)


def test_inverse_cdf_grad_matches_finite_differences():
    rng = make_rng(0)
    for _ in range(100):
        u = rng.uniform(0.05, 0.95)
        a, b = rng.uniform(0.4, 5.0, size=2)
        da, db = dist.kumaraswamy_inverse_cdf_grad(u, a, b)
        fd = finite_difference_gradient(
            lambda t: float(dist.kumaraswamy_inverse_cdf(u, t[0], t[1])),
            np.array([a, b]),
            h=1e-6,
        )
        assert da == pytest.approx(fd[0], rel=1e-5, abs=1e-9)
        assert db == pytest.approx(fd[1], rel=1e-5, abs=1e-9)


def test_inverse_cdf_grad_finite_at_clamp_boundary():
    da, db = dist.kumaraswamy_inverse_cdf_grad(1e-7, 2.0, 3.0)
    assert np.isfinite(da) and np.isfinite(db)


def test_log_pdf_values():
    assert dist.kumaraswamy_log_pdf(0.5, 1.0, 1.0) == pytest.approx(0.0)
    assert dist.kumaraswamy_log_pdf(0.5, 2.0, 1.0) == pytest.approx(0.0)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("b", [0.5, 1.0, 2.0, 5.0])
def test_log_pdf_normalizes(a, b):
    val, _ = integrate.quad(
        lambda x: np.exp(dist.kumaraswamy_log_pdf(x, a, b)), 0.0, 1.0, limit=200
    )
    assert val == pytest.approx(1.0, abs=1e-6)


def test_sample_mean_matches_closed_form_moment():
    rng = make_rng(11)
    a, b = 2.0, 3.0
    u = np.clip(rng.random(10**5), 1e-7, 1 - 1e-7)
    x = dist.kumaraswamy_inverse_cdf(u, a, b)
    se = x.std() / np.sqrt(len(x))
    assert abs(x.mean() - dist.kumaraswamy_mean(a, b)) < 3 * se


# ---------------------------------------------------------------------------
# Kumaraswamy-to-Beta KL
# ---------------------------------------------------------------------------

def test_kl_identity_cases():
    assert dist.kl_kumaraswamy_beta(1.0, 1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-6)
    # Kumaraswamy(1,b) and Beta(1,b) share the density b(1-x)^(b-1)
    assert dist.kl_kumaraswamy_beta(1.0, 3.0, 1.0, 3.0) == pytest.approx(0.0, abs=1e-6)


def test_kl_matches_quadrature():
    a, b, alpha, beta = 2.0, 2.0, 1.0, 5.0
    oracle = quadrature_kl(
        lambda x: dist.kumaraswamy_log_pdf(x, a, b),
        lambda x: dist.beta_log_pdf(x, alpha, beta),
    )
    assert dist.kl_kumaraswamy_beta(a, b, alpha, beta, 10) == pytest.approx(
        oracle, abs=1e-3
    )


def test_kl_nonnegative_on_grid():
    grid = [0.5, 1.0, 2.0, 5.0]
    for a in grid:
        for b in grid:
            for alpha in grid:
                for beta in grid:
                    assert dist.kl_kumaraswamy_beta(a, b, alpha, beta, 10) >= -1e-3


def test_kl_series_monotone_in_terms_for_beta_above_one():
    a, b, alpha, beta = 1.7, 0.9, 1.0, 4.0
    vals = [
        dist.kl_kumaraswamy_beta(a, b, alpha, beta, t, tail_correction=False)
        for t in range(1, 15)
    ]
    assert np.all(np.diff(vals) >= 0)
    # the corrected value upper-bounds every truncation
    full = dist.kl_kumaraswamy_beta(a, b, alpha, beta, 10)
    assert full > vals[-1]


def test_kl_grad_matches_finite_differences():
    rng = make_rng(1)
    cases = [(1.0, 1.0, 1.0, 1.0), (3.0, 0.7, 1.0, 5.0)]
    cases += [tuple(rng.uniform(0.4, 5.0, size=4)) for _ in range(100)]
    for a, b, alpha, beta in cases:
        da, db = dist.kl_kumaraswamy_beta_grad(a, b, alpha, beta, 10)
        fd = finite_difference_gradient(
            lambda t: dist.kl_kumaraswamy_beta(
                t[0], t[1], alpha, beta, 10, tail_correction=False
            ),
            np.array([a, b]),
            h=1e-6,
        )
        assert da == pytest.approx(fd[0], rel=1e-5, abs=1e-7)
        assert db == pytest.approx(fd[1], rel=1e-5, abs=1e-7)


def test_kl_grad_truncation_gap_shrinks_as_beta_approaches_one():
    # the series term carries a factor (beta - 1)
    gaps = []
    for beta in (5.0, 2.0, 1.1, 1.0):
        g1 = np.array(dist.kl_kumaraswamy_beta_grad(2.0, 2.0, 1.0, beta, 1))
        g10 = np.array(dist.kl_kumaraswamy_beta_grad(2.0, 2.0, 1.0, beta, 10))
        gaps.append(np.max(np.abs(g1 - g10)))
    assert np.all(np.diff(gaps) <= 1e-12)
    assert gaps[-1] == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Gamma composition
# ---------------------------------------------------------------------------

def test_gamma_quantile_limits():
    assert dist.gamma_approx_inverse_cdf(1e-12 + 1e-13, 0.5, 1.0) < 1e-20
    x1 = dist.gamma_approx_inverse_cdf(0.3, 0.5, 1.0)
    x2 = dist.gamma_approx_inverse_cdf(0.3, 0.5, 2.0)
    assert x2 == pytest.approx(x1 / 2.0)


def test_gamma_quantile_accurate_for_small_shape():
    exact = gammaincinv(0.1, 0.3)  # exact quantile of Gamma(0.1, 1)
    approx = dist.gamma_approx_inverse_cdf(0.3, 0.1, 1.0)
    assert abs(approx - exact) / exact < 0.05


def test_gamma_composition_symmetry_and_range():
    assert dist.gamma_composition_fraction(0.4, 0.4, 0.5, 0.5) == pytest.approx(0.5)
    rng = make_rng(2)
    u = np.clip(rng.random((1000, 2)), 1e-7, 1 - 1e-7)
    v = dist.gamma_composition_fraction(u[:, 0], u[:, 1], 0.7, 0.9)
    assert np.all(v > 0) and np.all(v < 1)


def test_gamma_composition_distribution_close_to_beta():
    rng = make_rng(3)
    n = 10**5
    ux = np.clip(rng.random(n), 1e-7, 1 - 1e-7)
    uy = np.clip(rng.random(n), 1e-7, 1 - 1e-7)
    v = dist.gamma_composition_fraction(ux, uy, 0.5, 0.5)
    ks = stats.kstest(v, stats.beta(0.5, 0.5).cdf).statistic
    assert ks < 0.05  # approximate sampler, per the small-shape regime


def test_gamma_composition_grads_match_finite_differences():
    rng = make_rng(4)
    for _ in range(50):
        ux, uy = rng.uniform(0.05, 0.95, size=2)
        ax, ay = rng.uniform(0.2, 0.95, size=2)
        _, dax, day = dist.gamma_composition_fraction_grad(ux, uy, ax, ay)
        fd = finite_difference_gradient(
            lambda t: float(dist.gamma_composition_fraction(ux, uy, t[0], t[1])),
            np.array([ax, ay]),
            h=1e-6,
        )
        assert dax == pytest.approx(fd[0], rel=1e-5, abs=1e-9)
        assert day == pytest.approx(fd[1], rel=1e-5, abs=1e-9)


# ---------------------------------------------------------------------------
# Gauss-Logit
# ---------------------------------------------------------------------------

def test_gauss_logit_values():
    assert dist.gauss_logit_fraction(0.0, 0.0, 1.0) == pytest.approx(0.5)
    assert dist.gauss_logit_fraction(2.0, 2.0, 0.5) == pytest.approx(
        1.0 / (1.0 + np.exp(-3.0))
    )


def test_gauss_logit_monotone_in_eps():
    eps = np.linspace(-4, 4, 100)
    v = dist.gauss_logit_fraction(eps, 0.3, 0.8)
    assert np.all(np.diff(v) > 0)


def test_gauss_logit_kl_estimator_matches_quadrature():
    mu, sigma = 0.0, 1.0
    oracle = quadrature_kl(
        lambda x: dist.logistic_normal_log_pdf(x, mu, sigma),
        lambda x: dist.beta_log_pdf(x, 1.0, 1.0),
    )
    rng = make_rng(5)
    eps = rng.standard_normal(10**5)
    v = dist.gauss_logit_fraction(eps, mu, sigma)
    est = dist.kl_gauss_logit(mu, sigma, 1.0, 1.0, v)
    assert abs(est.mean() - oracle) < 0.01


def test_gauss_logit_kl_estimator_has_no_systematic_sign():
    mu, sigma = 0.4, 0.8
    oracle = quadrature_kl(
        lambda x: dist.logistic_normal_log_pdf(x, mu, sigma),
        lambda x: dist.beta_log_pdf(x, 1.0, 3.0),
    )
    rng = make_rng(6)
    signs = []
    for _ in range(10):
        eps = rng.standard_normal(20000)
        v = dist.gauss_logit_fraction(eps, mu, sigma)
        signs.append(np.sign(dist.kl_gauss_logit(mu, sigma, 1.0, 3.0, v).mean() - oracle))
    assert len(set(signs)) > 1  # both signs occur


def test_gauss_logit_kl_finite_for_interior_samples():
    v = dist.gauss_logit_fraction(np.array([-3.0, 0.0, 3.0]), 0.0, 2.0)
    assert np.all(np.isfinite(dist.kl_gauss_logit(0.0, 2.0, 1.0, 5.0, v)))


# ---------------------------------------------------------------------------
# Diagonal Gaussian KL
# ---------------------------------------------------------------------------

def test_gaussian_kl_closed_form_cases():
    assert dist.kl_diag_gaussian_std_normal(np.zeros(4), np.ones(4)) == pytest.approx(0.0)
    assert dist.kl_diag_gaussian_std_normal(np.array([1.0]), np.array([1.0])) == pytest.approx(0.5)


def test_gaussian_kl_matches_quadrature():
    rng = make_rng(8)
    mu = rng.normal(size=3)
    sigma = rng.uniform(0.5, 2.0, size=3)
    total = 0.0
    for m, s in zip(mu, sigma):
        q = stats.norm(m, s)
        p = stats.norm(0.0, 1.0)
        val, _ = integrate.quad(
            lambda z: q.pdf(z) * (q.logpdf(z) - p.logpdf(z)), -20, 20, limit=200
        )
        total += val
    assert dist.kl_diag_gaussian_std_normal(mu, sigma) == pytest.approx(total, abs=1e-6)
