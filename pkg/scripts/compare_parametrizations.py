#!/usr/bin/env python3
"""Train the three stick-fraction parametrizations (and the Gaussian
baseline) under one run configuration and tabulate final test metrics.

Usage:
    python scripts/compare_parametrizations.py --config configs/mnist_sbvae.cfg \
        --out runs/compare --seeds 0,1,2
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sbvae import models, training  # noqa: E402
from sbvae.cli import _load_splits  # noqa: E402
from sbvae.config import load_run_config  # noqa: E402
from sbvae.numerics import make_rng  # noqa: E402

VARIANTS = [("gauss_vae", None)] + [("sb_vae", fp) for fp in models.FRACTION_PARAMS]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seeds", default="0,1,2")
    args = ap.parse_args()

    cfg = load_run_config(args.config)
    splits = _load_splits(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in args.seeds.split(",")]

    rows = ["variant,fraction_param,seed,test_elbo,test_reconstruction,test_kl"]
    summary = {}
    for variant, fp in VARIANTS:
        finals = []
        for seed in seeds:
            spec = cfg.model_spec(input_dim=splits[0].images.shape[1])
            spec.variant = variant
            if fp is not None:
                spec.fraction_param = fp
            tc = cfg.train_config()
            tc.seed = seed
            params, history = training.train(tc, spec, splits, make_rng(seed))
            name = f"{variant}-{fp or 'na'}-s{seed}"
            models.save_model(out / f"{name}.ckpt", spec, params)
            (out / f"{name}.metrics.csv").write_text(history.to_csv())
            elbo = history.last("test", "elbo")
            rows.append(
                f"{variant},{fp or ''},{seed},{elbo:.9g},"
                f"{history.last('test', 'reconstruction'):.9g},"
                f"{history.last('test', 'kl'):.9g}"
            )
            finals.append(elbo)
            print(f"{name}: test ELBO {elbo:.3f}")
        summary[(variant, fp)] = (float(np.mean(finals)), float(np.std(finals)))

    (out / "comparison.csv").write_text("\n".join(rows) + "\n")
    print("\nmean final test ELBO over seeds:")
    for (variant, fp), (mean, std) in summary.items():
        label = variant if fp is None else f"{variant}[{fp}]"
        print(f"  {label:28s} {mean:9.3f} +/- {std:.3f}")


if __name__ == "__main__":
    main()
