"""Stick-breaking composition, GEM prior helpers, and stick-usage statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import BetaParams, beta_one_beta_inverse_cdf
from .numerics import draw_uniform


@dataclass
class GemPrior:
    """Dirichlet-process stick prior v_k ~ Beta(1, alpha0)."""

    alpha0: float

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("concentration must be positive")


CONCENTRATION_GRID = (1.0, 3.0, 5.0, 8.0)


def compose_sticks(v: np.ndarray) -> np.ndarray:
    """pi_k = v_k * prod_{j<k} (1 - v_j), along the last axis.

    The last fraction must be exactly one so the weights fill the simplex.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] < 1:
        raise ValueError("need at least one fraction")
    if not np.allclose(v[..., -1], 1.0, rtol=0, atol=0):
        raise ValueError("last stick fraction must be exactly 1")
    remaining = np.cumprod(1.0 - v[..., :-1], axis=-1)
    ones = np.ones(v.shape[:-1] + (1,))
    exclusive = np.concatenate([ones, remaining], axis=-1)
    return v * exclusive


def compose_sticks_jacobian(v: np.ndarray) -> np.ndarray:
    """d pi / d v as a K x (K-1) matrix for a single fraction vector.

    Only the K-1 stochastic fractions appear as columns; v_K = 1 is fixed.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("jacobian is defined for a single fraction vector")
    k = v.shape[0]
    pi = compose_sticks(v)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v[:-1])])
    jac = np.zeros((k, k - 1))
    for row in range(k):
        for col in range(k - 1):
            if col > row:
                continue
            if col == row:
                jac[row, col] = remaining[row]
            else:
                jac[row, col] = -pi[row] / (1.0 - v[col])
    return jac


def stick_backward(v: np.ndarray, d_pi: np.ndarray) -> np.ndarray:
    """Vectorized adjoint of compose_sticks for batches, along the last axis.

    Returns the gradient w.r.t. the K-1 stochastic fractions.
    """
    v = np.asarray(v, dtype=np.float64)
    d_pi = np.asarray(d_pi, dtype=np.float64)
    pi = compose_sticks(v)
    remaining = np.cumprod(1.0 - v[..., :-1], axis=-1)
    ones = np.ones(v.shape[:-1] + (1,))
    exclusive = np.concatenate([ones, remaining], axis=-1)
    w = d_pi * pi
    # tail[j] = sum_{k > j} d_pi_k * pi_k, for the stochastic fractions only
    rev = np.flip(np.cumsum(np.flip(w, axis=-1), axis=-1), axis=-1)
    tail = rev[..., 1:]
    return d_pi[..., :-1] * exclusive[..., :-1] - tail / (1.0 - v[..., :-1])


def gem_prior_fraction_params(prior: GemPrior) -> BetaParams:
    """Every stochastic fraction shares the Beta(1, alpha0) prior."""
    return BetaParams(1.0, prior.alpha0)


def gem_expected_weight(alpha0: float, k: int) -> float:
    """E[pi_k] under GEM(alpha0): (1/(1+a)) * (a/(1+a))^(k-1)."""
    return (1.0 / (1.0 + alpha0)) * (alpha0 / (1.0 + alpha0)) ** (k - 1)


def sample_gem_fractions(rng, alpha0: float, shape) -> np.ndarray:
    """Exact Beta(1, alpha0) fraction draws via the closed-form quantile."""
    u = draw_uniform(rng, shape)
    return beta_one_beta_inverse_cdf(u, alpha0)


def effective_dimension(pi: np.ndarray, mass: float = 0.99) -> int:
    """Smallest prefix length whose weight sum reaches the mass threshold."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass threshold must lie in (0,1)")
    pi = np.asarray(pi, dtype=np.float64)
    cum = np.cumsum(pi)
    idx = np.searchsorted(cum, mass, side="left")
    return int(min(idx + 1, pi.shape[0]))


def effective_dimensions(pi: np.ndarray, mass: float = 0.99) -> np.ndarray:
    """Row-wise effective dimension for a batch of stick weights."""
    pi = np.asarray(pi, dtype=np.float64)
    cum = np.cumsum(pi, axis=-1)
    return np.minimum((cum < mass).sum(axis=-1) + 1, pi.shape[-1])
