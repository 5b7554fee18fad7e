"""Numeric foundation: seeded RNG streams, special functions, finite differences.

Everything is double precision. Random draws always come from an explicitly
seeded generator owned by the caller; there is no module-level RNG state.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import special

# Euler-Mascheroni constant, 20 digits.
EULER_GAMMA = 0.57721566490153286061

# Uniform draws are clamped into [UNIFORM_EPS, 1 - UNIFORM_EPS] so that
# inverse-CDF transforms and their logs stay finite.
UNIFORM_EPS = 1e-7


def make_rng(seed: int) -> np.random.Generator:
    """Create a caller-owned generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def digamma(x):
    """Digamma function, domain x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError(f"digamma requires x > 0, got min {np.min(x)}")
    out = special.digamma(x)
    return float(out) if out.ndim == 0 else out


def trigamma(x):
    """First derivative of digamma, domain x > 0."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError(f"trigamma requires x > 0, got min {np.min(x)}")
    out = special.polygamma(1, x)
    return float(out) if out.ndim == 0 else out


def log_beta(a, b):
    """log B(a, b) via log-gammas; exactly symmetric in its arguments."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("log_beta requires positive arguments")
    out = special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b)
    return float(out) if out.ndim == 0 else out


def draw_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform(0,1) draws clamped away from the endpoints."""
    u = rng.random(size=shape, dtype=np.float64)
    return np.clip(u, UNIFORM_EPS, 1.0 - UNIFORM_EPS)


def draw_standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(size=shape, dtype=np.float64)


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step.flat[i] = h
        grad.flat[i] = (f(theta + step) - f(theta - step)) / (2.0 * h)
    return grad
