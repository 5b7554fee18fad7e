"""Command-line surface: train / eval / sample / gradcheck / export-latents."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evaluation, models, training
from .config import load_run_config
from .gradcheck import run_gradient_suite
from .numerics import make_rng


def _load_splits(cfg):
    images = training.load_idx(cfg.require_path("train_images"))
    labels = None
    if cfg["train_labels"] is not None:
        labels = training.load_idx(cfg["train_labels"])
    if cfg["test_images"] is not None:
        images = np.concatenate([images, training.load_idx(cfg["test_images"])])
        if labels is not None:
            if cfg["test_labels"] is None:
                raise KeyError("config is missing required data path 'test_labels'")
            labels = np.concatenate([labels, training.load_idx(cfg["test_labels"])])
    if cfg["binarize"]:
        images = training.binarize(images)
    sizes = (cfg["split_train"], cfg["split_valid"], cfg["split_test"])
    rng = make_rng(cfg["seed"])
    splits = training.make_splits(images, labels, sizes, rng)
    if cfg["n_classes"] > 0 and cfg["keep_fraction"] < 1.0:
        train_split = training.remove_labels(splits[0], cfg["keep_fraction"], rng)
        splits = (train_split, splits[1], splits[2])
    return splits


def _cmd_train(args):
    cfg = load_run_config(args.config)
    splits = _load_splits(cfg)
    spec = cfg.model_spec(input_dim=splits[0].images.shape[1])
    rng = make_rng(cfg["seed"])
    params, history = training.train(cfg.train_config(), spec, splits, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models.save_model(out / "model.ckpt", spec, params)
    (out / "metrics.csv").write_text(history.to_csv())
    print(f"wrote {out / 'model.ckpt'} and {out / 'metrics.csv'}")
    return 0


def _cmd_eval(args):
    cfg = load_run_config(args.config)
    spec, params = models.load_model(args.checkpoint)
    splits = _load_splits(cfg)
    train_split, _, test_split = splits
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"]

    n_eval = min(args.n_eval, len(test_split))
    x_eval = test_split.images[:n_eval]
    y_eval = None if test_split.labels is None else test_split.labels[:n_eval]
    mll = models.marginal_log_likelihood_is(
        spec,
        params,
        x_eval,
        make_rng(seed + 1),
        n_samples=args.is_samples,
        y=y_eval if spec.n_classes > 0 else None,
    )
    rows = [("marginal_log_likelihood", float(mll.mean()))]
    rows.append(("negative_log_likelihood", -float(mll.mean())))
    if spec.variant == models.SB_VAE:
        eff = evaluation.mean_effective_dimension(
            spec, params, x_eval, make_rng(seed + 2)
        )
        rows.append(("effective_dimension", eff))
    if spec.n_classes > 0:
        err = training.classification_error(spec, params, test_split)
        rows.append(("test_classification_error_percent", round(100.0 * err, 2)))
    lines = ["metric,value"] + [f"{k},{v:.9g}" for k, v in rows]
    (out / "eval.csv").write_text("\n".join(lines) + "\n")

    diag = evaluation.sparsity_diagnostics(
        spec, params, test_split.images[: args.n_eval], make_rng(seed + 3)
    )
    (out / "sparsity.csv").write_text(evaluation.sparsity_to_csv(diag))

    if train_split.labels is not None:
        n_tr = min(args.knn_train, len(train_split))
        tr_table = evaluation.export_latents(
            spec,
            params,
            training.DatasetSplit(
                train_split.images[:n_tr], train_split.labels[:n_tr]
            ),
            make_rng(seed + 4),
            source=args.latent_source,
        )
        te_table = evaluation.export_latents(
            spec,
            params,
            training.DatasetSplit(x_eval, y_eval),
            make_rng(seed + 5),
            source=args.latent_source,
        )
        knn_lines = ["k,percent_error"]
        for k in (int(v) for v in args.knn_k.split(",")):
            err = evaluation.knn_error(tr_table, te_table, k)
            knn_lines.append(f"{k},{100.0 * err:.2f}")
        (out / "knn.csv").write_text("\n".join(knn_lines) + "\n")
    print(f"wrote evaluation CSVs to {out}")
    return 0


def _cmd_sample(args):
    spec, params = models.load_model(args.checkpoint)
    rng = make_rng(args.seed)
    means, _ = models.sample_from_prior(
        spec, params, rng, args.n, active_dims=args.active_dims
    )
    side = int(round(np.sqrt(spec.input_dim)))
    shape = (side, spec.input_dim // side)
    evaluation.write_pgm_grid(args.out, means, shape)
    print(f"wrote {args.out}")
    return 0


def _cmd_gradcheck(args):
    ok, _ = run_gradient_suite(tolerance=args.tolerance, verbose=True)
    return 0 if ok else 1


def _cmd_export_latents(args):
    cfg = load_run_config(args.config)
    spec, params = models.load_model(args.checkpoint)
    splits = _load_splits(cfg)
    split = {"train": splits[0], "valid": splits[1], "test": splits[2]}[args.split]
    table = evaluation.export_latents(
        spec, params, split, make_rng(cfg["seed"] + 6), source=args.source
    )
    Path(args.out).write_text(evaluation.latents_to_csv(table))
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="sbvae")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--is-samples", type=int, default=100)
    p.add_argument("--n-eval", type=int, default=1000)
    p.add_argument("--knn-k", default="3,5,10")
    p.add_argument("--knn-train", type=int, default=5000)
    p.add_argument(
        "--latent-source", choices=("sampled", "posterior_mean"), default="sampled"
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sample", help="decode prior samples into a PGM grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--active-dims", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("gradcheck", help="finite-difference check of all variants")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("export-latents", help="write latent codes to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument(
        "--source", choices=("sampled", "posterior_mean"), default="sampled"
    )
    p.set_defaults(func=_cmd_export_latents)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
