#!/usr/bin/env python3
"""Decode prior samples while forcing the stick to be consumed by the first
1, 2, ... latent dimensions, writing one image grid per setting. Collapsed
trailing dimensions show up as grids that stop changing.

Usage:
    python scripts/decode_active_dims.py --checkpoint runs/sb/model.ckpt \
        --out runs/sb/grids --max-dims 10
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sbvae import evaluation, models  # noqa: E402
from sbvae.numerics import make_rng  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--max-dims", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec, params = models.load_model(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    side = int(round(np.sqrt(spec.input_dim)))
    shape = (side, spec.input_dim // side)
    top = min(args.max_dims or spec.latent_dim, spec.latent_dim)
    for dims in range(1, top + 1):
        means, _ = models.sample_from_prior(
            spec, params, make_rng(args.seed), args.n, active_dims=dims
        )
        path = out / f"active_{dims:02d}.pgm"
        evaluation.write_pgm_grid(path, means, shape)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
