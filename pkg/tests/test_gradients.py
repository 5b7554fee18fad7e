import time

import pytest

from sbvae import models
from sbvae.gradcheck import check_case, relative_error, run_gradient_suite, suite_cases


def test_relative_error_floor():
    assert relative_error(1e-6, 2e-6) == pytest.approx(1e-6 / 1e-3)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)


def test_suite_covers_all_variants():
    names = [name for name, _, _ in suite_cases()]
    assert "gauss_vae/elbo" in names
    for fp in models.FRACTION_PARAMS:
        assert f"sb_vae[{fp}]/elbo" in names
    assert sum("labeled" in n for n in names) == 4  # labeled + unlabeled, two models


def test_full_suite_passes():
    start = time.time()
    ok, results = run_gradient_suite(tolerance=1e-4)
    elapsed = time.time() - start
    for name, err in results:
        assert err <= 1e-4, f"{name}: {err}"
    assert ok
    assert elapsed < 10.0


def test_single_case_is_seed_stable():
    spec, objective = suite_cases()[1][1], suite_cases()[1][2]
    assert check_case(spec, objective, seed=0) == check_case(spec, objective, seed=0)
