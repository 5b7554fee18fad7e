"""Finite-difference verification of every model variant's full objective
gradient on a small fixed instance."""

from __future__ import annotations

import numpy as np

from . import models
from .numerics import finite_difference_gradient, make_rng


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _toy_spec(variant, fraction_param="kumaraswamy", n_classes=0):
    return models.ModelSpec(
        variant=variant,
        input_dim=6,
        latent_dim=3,
        hidden=(5,),
        fraction_param=fraction_param,
        alpha0=3.0,
        n_classes=n_classes,
    )


def check_case(spec, objective, seed=0, h=1e-6):
    """Compare analytic and central-difference gradients of a summed objective."""
    rng = make_rng(seed)
    params = models.init_model_params(spec, rng)
    n = 4
    x = rng.random((n, spec.input_dim))
    y = rng.integers(0, spec.n_classes, size=n) if spec.n_classes > 0 else None
    noise = models.draw_noise(spec, rng, n)

    def run(p, want_grads):
        if objective == "elbo":
            est, grads = models.elbo_and_grads(spec, p, x, noise, want_grads)
            return float(est.per_example.sum()), grads
        if objective == "labeled":
            vals, grads = models.labeled_objective_and_grads(
                spec, p, x, y, noise, want_grads
            )
            return float(vals.sum()), grads
        vals, grads = models.unlabeled_objective_and_grads(spec, p, x, noise, want_grads)
        return float(vals.sum()), grads

    _, grads = run(params, True)
    analytic = models.flatten_params(grads)

    def f(theta):
        return run(models.unflatten_params(params, theta), False)[0]

    numeric = finite_difference_gradient(f, models.flatten_params(params), h=h)
    return relative_error(analytic, numeric)


def suite_cases():
    out = [("gauss_vae/elbo", _toy_spec(models.GAUSS_VAE), "elbo")]
    for fp in models.FRACTION_PARAMS:
        out.append((f"sb_vae[{fp}]/elbo", _toy_spec(models.SB_VAE, fp), "elbo"))
    for obj in ("labeled", "unlabeled"):
        out.append(
            (f"m2-gauss/{obj}", _toy_spec(models.GAUSS_VAE, n_classes=2), obj)
        )
        out.append(
            (
                f"m2-sb[kumaraswamy]/{obj}",
                _toy_spec(models.SB_VAE, "kumaraswamy", n_classes=2),
                obj,
            )
        )
    return out


def run_gradient_suite(tolerance: float = 1e-4, verbose: bool = False):
    """Returns (all_passed, list of (name, max relative error))."""
    results = []
    ok = True
    for name, spec, objective in suite_cases():
        err = check_case(spec, objective)
        results.append((name, err))
        passed = err <= tolerance
        ok = ok and passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'} {name}: max rel err {err:.3g}")
    return ok, results
