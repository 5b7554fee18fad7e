"""Fraction-level distributions and divergences.

Covers the Kumaraswamy posterior (inverse-CDF sampling, log density, truncated
series KL to a Beta target and its gradients), the Gamma-composition and
Gauss-Logit alternatives, and the diagonal-Gaussian KL used by the baseline.

All functions broadcast over numpy arrays; scalars in, scalars out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import EULER_GAMMA, digamma, log_beta, trigamma

# Floor added after softplus so shape/scale parameters stay strictly positive.
POSITIVE_FLOOR = 1e-4

DEFAULT_KL_TERMS = 10


@dataclass
class KumaraswamyParams:
    a: float
    b: float


@dataclass
class BetaParams:
    alpha: float
    beta: float


@dataclass
class GaussianParams:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class GammaCompositionParams:
    a_x: float
    a_y: float


def softplus(t):
    t = np.asarray(t, dtype=np.float64)
    return np.logaddexp(0.0, t)


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def positive_from_unconstrained(t):
    """Map an unconstrained network output to a strictly positive parameter."""
    return softplus(t) + POSITIVE_FLOOR


def _check_unit_interval(u, name):
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError(f"{name} must lie strictly inside (0,1)")


def _check_positive(x, name):
    if np.any(np.asarray(x) <= 0.0):
        raise ValueError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# Kumaraswamy
# ---------------------------------------------------------------------------

def kumaraswamy_inverse_cdf(u, a, b):
    """x = (1 - u^(1/b))^(1/a); the DNCP draw for a fixed uniform u."""
    u = np.asarray(u, dtype=np.float64)
    _check_unit_interval(u, "u")
    _check_positive(a, "a")
    _check_positive(b, "b")
    return (1.0 - u ** (1.0 / np.asarray(b, dtype=np.float64))) ** (
        1.0 / np.asarray(a, dtype=np.float64)
    )


def kumaraswamy_inverse_cdf_grad(u, a, b):
    """Partials of the inverse CDF w.r.t. a and b at fixed u."""
    u = np.asarray(u, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_unit_interval(u, "u")
    _check_positive(a, "a")
    _check_positive(b, "b")
    ub = u ** (1.0 / b)
    w = 1.0 - ub
    x = w ** (1.0 / a)
    dx_da = x * (-1.0 / a**2) * np.log(w)
    # dw/db = u^(1/b) * log(u) / b^2
    dw_db = ub * np.log(u) / b**2
    dx_db = (1.0 / a) * w ** (1.0 / a - 1.0) * dw_db
    return dx_da, dx_db


def kumaraswamy_quantile(u, a, b):
    """True quantile x = (1 - (1-u)^(1/b))^(1/a), so cdf(quantile(u)) = u.

    kumaraswamy_inverse_cdf(u) == kumaraswamy_quantile(1-u); both push a
    uniform through to the same law, but only this one is increasing in u.
    """
    u = np.asarray(u, dtype=np.float64)
    _check_unit_interval(u, "u")
    _check_positive(a, "a")
    _check_positive(b, "b")
    return (1.0 - (1.0 - u) ** (1.0 / np.asarray(b, dtype=np.float64))) ** (
        1.0 / np.asarray(a, dtype=np.float64)
    )


def kumaraswamy_cdf(x, a, b):
    x = np.asarray(x, dtype=np.float64)
    return 1.0 - (1.0 - x ** np.asarray(a, dtype=np.float64)) ** np.asarray(
        b, dtype=np.float64
    )


def kumaraswamy_log_pdf(x, a, b):
    x = np.asarray(x, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_unit_interval(x, "x")
    _check_positive(a, "a")
    _check_positive(b, "b")
    return np.log(a) + np.log(b) + (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(
        -(x**a)
    )


def kumaraswamy_mean(a, b):
    """Closed-form first moment b * B(1 + 1/a, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return b * np.exp(log_beta(1.0 + 1.0 / a, b))


# Direct summation length before switching to the analytic remainder below.
_SERIES_DIRECT = 64


def _series_remainder(a, b, n):
    """sum_{m>n} B(m/a, b) / (m + ab), via the large-argument expansion

        Gamma(z)/Gamma(z+b) = z^-b (1 + A1/z + A2/z^2 + A3/z^3 + ...)

    composed with 1/(m+ab), which turns each term into a Hurwitz zeta."""
    from scipy.special import gammaln, zeta

    a1 = -b * (b - 1.0) / 2.0
    a2 = b * (b - 1.0) * (b + 1.0) * (3.0 * b - 2.0) / 24.0
    a3 = -(b**2) * (b - 1.0) ** 2 * (b + 1.0) * (b + 2.0) / 48.0
    q1 = a * (a1 - b)
    q2 = a**2 * (a2 - a1 * b + b**2)
    q3 = a**3 * (a3 - a2 * b + a1 * b**2 - b**3)
    scale = np.exp(gammaln(b) + b * np.log(a))
    s = b + 1.0
    return scale * (
        zeta(s, n + 1.0)
        + q1 * zeta(s + 1.0, n + 1.0)
        + q2 * zeta(s + 2.0, n + 1.0)
        + q3 * zeta(s + 3.0, n + 1.0)
    )


def kl_kumaraswamy_beta(
    a, b, alpha, beta, terms: int = DEFAULT_KL_TERMS, tail_correction: bool = True
):
    """KL( Kumaraswamy(a,b) || Beta(alpha,beta) ) via the series

    (a-alpha)/a * (-gamma - psi(b) - 1/b) + log(ab) + log B(alpha,beta)
      - (b-1)/b + (beta-1) * b * sum_m B(m/a, b) / (m + ab)

    With tail_correction the infinite sum is evaluated to high accuracy
    (direct terms plus an analytic remainder); without it, only the leading
    `terms` are kept, which matches the gradient in kl_kumaraswamy_beta_grad
    but can be off by whole nats when b is small.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    _check_positive(a, "a")
    _check_positive(b, "b")
    _check_positive(alpha, "alpha")
    _check_positive(beta, "beta")

    first = (a - alpha) / a * (-EULER_GAMMA - digamma(b) - 1.0 / b)
    out = first + np.log(a * b) + log_beta(alpha, beta) - (b - 1.0) / b

    n_direct = max(terms, _SERIES_DIRECT) if tail_correction else terms
    m = np.arange(1, n_direct + 1, dtype=np.float64)
    m = m.reshape(m.shape + (1,) * np.ndim(a))
    series = np.sum(np.exp(log_beta(m / a, b)) / (m + a * b), axis=0)
    if tail_correction:
        series = series + _series_remainder(a, b, float(n_direct))
    out = out + (beta - 1.0) * b * series
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(
            f"non-finite KL for a={a}, b={b}, alpha={alpha}, beta={beta}"
        )
    return float(out) if np.ndim(out) == 0 else out


def kl_kumaraswamy_beta_grad(a, b, alpha, beta, terms: int = DEFAULT_KL_TERMS):
    """Analytic partials of the truncated-series KL w.r.t. a and b."""
    if terms < 1:
        raise ValueError("terms must be >= 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    _check_positive(a, "a")
    _check_positive(b, "b")

    c = -EULER_GAMMA - digamma(b) - 1.0 / b
    d_da = (alpha / a**2) * c + 1.0 / a
    # -(b-1)/b = -1 + 1/b has derivative -1/b^2
    d_db = (a - alpha) / a * (-trigamma(b) + 1.0 / b**2) + 1.0 / b - 1.0 / b**2

    m = np.arange(1, terms + 1, dtype=np.float64)
    m = m.reshape(m.shape + (1,) * np.ndim(a))
    bm = np.exp(log_beta(m / a, b))
    denom = m + a * b
    s = bm / denom
    psi_ma = digamma(m / a)
    psi_mab = digamma(m / a + b)
    psi_b = digamma(b)
    ds_da = bm * (-m / a**2) * (psi_ma - psi_mab) / denom - bm * b / denom**2
    ds_db = bm * (psi_b - psi_mab) / denom - bm * a / denom**2
    d_da = d_da + (beta - 1.0) * b * np.sum(ds_da, axis=0)
    d_db = d_db + (beta - 1.0) * (np.sum(s, axis=0) + b * np.sum(ds_db, axis=0))
    if np.ndim(d_da) == 0:
        return float(d_da), float(d_db)
    return d_da, d_db


# ---------------------------------------------------------------------------
# Beta target densities
# ---------------------------------------------------------------------------

def beta_log_pdf(x, alpha, beta):
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    _check_unit_interval(x, "x")
    _check_positive(alpha, "alpha")
    _check_positive(beta, "beta")
    return (alpha - 1.0) * np.log(x) + (beta - 1.0) * np.log1p(-x) - log_beta(
        alpha, beta
    )


def beta_log_pdf_grad_x(x, alpha, beta):
    x = np.asarray(x, dtype=np.float64)
    return (np.asarray(alpha) - 1.0) / x - (np.asarray(beta) - 1.0) / (1.0 - x)


def beta_log_pdf_grad_params(x, alpha, beta):
    """Partials of log Beta(x; alpha, beta) w.r.t. alpha and beta."""
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    common = digamma(alpha + beta)
    return np.log(x) - digamma(alpha) + common, np.log1p(-x) - digamma(beta) + common


def beta_one_beta_inverse_cdf(u, beta):
    """Exact quantile of Beta(1, beta): 1 - (1-u)^(1/beta)."""
    u = np.asarray(u, dtype=np.float64)
    return 1.0 - (1.0 - u) ** (1.0 / np.asarray(beta, dtype=np.float64))


# ---------------------------------------------------------------------------
# Gamma composition
# ---------------------------------------------------------------------------

def gamma_approx_inverse_cdf(u, a, b=1.0):
    """Small-shape asymptotic Gamma quantile (u * a * Gamma(a))^(1/a) / b."""
    from scipy.special import gammaln

    u = np.asarray(u, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    _check_unit_interval(u, "u")
    _check_positive(a, "a")
    _check_positive(b, "b")
    return np.exp((np.log(u) + np.log(a) + gammaln(a)) / a) / np.asarray(
        b, dtype=np.float64
    )


def gamma_approx_inverse_cdf_grad_shape(u, a, b=1.0):
    """d/da of the asymptotic quantile at fixed u."""
    from scipy.special import gammaln

    u = np.asarray(u, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    x = gamma_approx_inverse_cdf(u, a, b)
    logx_num = np.log(u) + np.log(a) + gammaln(a)
    dlogx = -logx_num / a**2 + (1.0 / a + digamma(a)) / a
    return x * dlogx


def gamma_composition_fraction(u_x, u_y, a_x, a_y):
    """v = x/(x+y) with x, y approximate Gamma(a_x,1), Gamma(a_y,1) draws."""
    x = gamma_approx_inverse_cdf(u_x, a_x)
    y = gamma_approx_inverse_cdf(u_y, a_y)
    total = x + y
    if np.any(total <= 0.0) or not np.all(np.isfinite(total)):
        raise FloatingPointError("gamma composition underflow: x + y not positive")
    return x / total


def gamma_composition_fraction_grad(u_x, u_y, a_x, a_y):
    """(v, dv/da_x, dv/da_y) for the composition at fixed uniforms."""
    x = gamma_approx_inverse_cdf(u_x, a_x)
    y = gamma_approx_inverse_cdf(u_y, a_y)
    total = x + y
    if np.any(total <= 0.0) or not np.all(np.isfinite(total)):
        raise FloatingPointError("gamma composition underflow: x + y not positive")
    v = x / total
    dx = gamma_approx_inverse_cdf_grad_shape(u_x, a_x)
    dy = gamma_approx_inverse_cdf_grad_shape(u_y, a_y)
    dv_dax = y / total**2 * dx
    dv_day = -x / total**2 * dy
    return v, dv_dax, dv_day


# ---------------------------------------------------------------------------
# Gauss-Logit
# ---------------------------------------------------------------------------

def gauss_logit_fraction(eps, mu, sigma):
    """Squash a location-scale Gaussian draw onto (0,1) with the logistic map."""
    _check_positive(sigma, "sigma")
    return sigmoid(np.asarray(mu, dtype=np.float64) + np.asarray(sigma) * np.asarray(eps))


def logistic_normal_log_pdf(v, mu, sigma):
    """Density on (0,1) induced by logistic(N(mu, sigma^2))."""
    v = np.asarray(v, dtype=np.float64)
    _check_unit_interval(v, "v")
    _check_positive(sigma, "sigma")
    logit = np.log(v) - np.log1p(-v)
    z = (logit - np.asarray(mu, dtype=np.float64)) / np.asarray(sigma, dtype=np.float64)
    return (
        -0.5 * z**2
        - 0.5 * np.log(2.0 * np.pi)
        - np.log(np.asarray(sigma, dtype=np.float64))
        - np.log(v)
        - np.log1p(-v)
    )


def kl_gauss_logit(mu, sigma, alpha, beta, v_sample):
    """Single-sample estimate of KL(logistic-normal || Beta) at a DNCP draw."""
    return logistic_normal_log_pdf(v_sample, mu, sigma) - beta_log_pdf(
        v_sample, alpha, beta
    )


# ---------------------------------------------------------------------------
# Diagonal Gaussian (baseline VAE)
# ---------------------------------------------------------------------------

def kl_diag_gaussian_std_normal(mu, sigma):
    """KL( N(mu, diag sigma^2) || N(0, I) ), summed over the last axis."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    _check_positive(sigma, "sigma")
    per_dim = 0.5 * (mu**2 + sigma**2 - 1.0 - 2.0 * np.log(sigma))
    out = np.sum(per_dim, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_log_pdf(z, mu, sigma):
    """Diagonal Gaussian log density, summed over the last axis."""
    z = np.asarray(z, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    per_dim = -0.5 * ((z - mu) / sigma) ** 2 - 0.5 * np.log(2.0 * np.pi) - np.log(sigma)
    return np.sum(per_dim, axis=-1)
