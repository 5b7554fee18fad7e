"""Optimization loop, Adam, and dataset ingestion (IDX parsing, splits,
random label removal)."""

from __future__ import annotations

import copy
import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from . import models, nn
from .numerics import make_rng

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Bias-corrected Adam with the step sizes used throughout the experiments."""

    m: list
    v: list
    t: int = 0
    alpha: float = 0.0003
    b1: float = 0.95
    b2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: models.ModelParams, **kw) -> "AdamState":
        arrays = _param_arrays(params)
        return cls(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
            **kw,
        )


def _param_arrays(params: models.ModelParams) -> list:
    out = []
    for layer in params.layers():
        out.append(layer.W)
        out.append(layer.b)
    return out


def adam_step(state: AdamState, params: models.ModelParams, grads: models.ModelParams):
    """In-place minimization step along `grads` (pass the negative objective
    gradient to maximize)."""
    arrays = _param_arrays(params)
    garrays = _param_arrays(grads)
    for i, g in enumerate(garrays):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at step {state.t + 1}, block {i}, "
                f"norm {np.linalg.norm(g[np.isfinite(g)])}"
            )
    state.t += 1
    corr1 = 1.0 - state.b1**state.t
    corr2 = 1.0 - state.b2**state.t
    for p, g, m, v in zip(arrays, garrays, state.m, state.v):
        m *= state.b1
        m += (1.0 - state.b1) * g
        v *= state.b2
        v += (1.0 - state.b2) * g**2
        p -= state.alpha * (m / corr1) / (np.sqrt(v / corr2) + state.eps)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass
class DatasetSplit:
    images: np.ndarray  # N x D, values in [0,1]
    labels: np.ndarray = None  # integer vector or None
    label_mask: np.ndarray = None  # visibility of labels for semi-supervised runs

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.images):
            raise ValueError("label count does not match image count")
        if self.label_mask is None and self.labels is not None:
            self.label_mask = np.ones(len(self.labels), dtype=bool)

    def __len__(self):
        return len(self.images)


def load_idx(path):
    """Parse an IDX container: images to an N x D matrix in [0,1], labels to a
    vector. Gzipped files are accepted transparently."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4:
        raise ValueError(f"truncated IDX file at offset {len(data)}")
    (magic,) = struct.unpack_from(">I", data, 0)
    if magic == IDX_IMAGE_MAGIC:
        rank = 3
    elif magic == IDX_LABEL_MAGIC:
        rank = 1
    else:
        raise ValueError(f"bad IDX magic {magic} at offset 0")
    need = 4 + 4 * rank
    if len(data) < need:
        raise ValueError(f"truncated IDX header at offset {len(data)}")
    dims = struct.unpack_from(f">{rank}I", data, 4)
    count = int(np.prod(dims))
    if len(data) != need + count:
        raise ValueError(
            f"truncated IDX payload: expected {need + count} bytes, file ends at offset {len(data)}"
        )
    payload = np.frombuffer(data, dtype=np.uint8, offset=need)
    if rank == 1:
        return payload.astype(np.int64)
    return (payload.reshape(dims[0], dims[1] * dims[2]) / 255.0).astype(np.float64)


def binarize(images, threshold=0.5):
    return (np.asarray(images) >= threshold).astype(np.float64)


def make_splits(images, labels, sizes, rng):
    """Seeded random partition into (train, valid, test); no stratification."""
    n_train, n_valid, n_test = sizes
    total = n_train + n_valid + n_test
    if total > len(images):
        raise ValueError(
            f"requested {total} rows but only {len(images)} are available"
        )
    perm = rng.permutation(len(images))
    out = []
    start = 0
    for size in (n_train, n_valid, n_test):
        idx = perm[start : start + size]
        out.append(
            DatasetSplit(
                images=images[idx],
                labels=None if labels is None else np.asarray(labels)[idx],
            )
        )
        start += size
    return tuple(out)


def remove_labels(split: DatasetSplit, keep_fraction: float, rng) -> DatasetSplit:
    """Keep labels visible for a uniformly random floor(keep_fraction * N) subset."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must lie in (0, 1]")
    if split.labels is None:
        raise ValueError("split has no labels to remove")
    n = len(split)
    n_keep = int(np.floor(keep_fraction * n))
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[:n_keep]] = True
    return DatasetSplit(images=split.images, labels=split.labels, label_mask=mask)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch_size: int = 100
    epochs: int = 100
    patience: int = 30
    seed: int = 0
    supervised_weight: float = 0.375
    adam_alpha: float = 0.0003
    adam_b1: float = 0.95
    adam_b2: float = 0.999

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


@dataclass
class MetricsHistory:
    rows: list = field(default_factory=list)  # (epoch, split, metric, value)

    def record(self, epoch, split, metric, value):
        self.rows.append((int(epoch), split, metric, float(value)))

    def to_csv(self) -> str:
        lines = ["epoch,split,metric,value"]
        for epoch, split, metric, value in self.rows:
            lines.append(f"{epoch},{split},{metric},{value:.9g}")
        return "\n".join(lines) + "\n"

    def last(self, split, metric):
        for epoch, s, m, value in reversed(self.rows):
            if s == split and m == metric:
                return value
        raise KeyError(f"no metric {metric!r} for split {split!r}")


def semisup_batch_objective(cfg, spec, params, labeled, unlabeled, noise_l, noise_u):
    """lambda * mean(labeled J) + (1-lambda) * mean(unlabeled J).

    An empty sub-batch simply contributes zero; the weights are not
    renormalized. Returns (value, gradients of the weighted objective).
    """
    lam = cfg.supervised_weight
    grads = models.zeros_like_params(params)
    value = 0.0
    if labeled is not None and len(labeled[0]) > 0:
        x_l, y_l = labeled
        vals, g = models.labeled_objective_and_grads(spec, params, x_l, y_l, noise_l)
        value += lam * float(vals.mean())
        models.add_scaled(grads, g, lam / len(x_l))
    if unlabeled is not None and len(unlabeled) > 0:
        x_u = unlabeled
        vals, g = models.unlabeled_objective_and_grads(spec, params, x_u, noise_u)
        value += (1.0 - lam) * float(vals.mean())
        models.add_scaled(grads, g, (1.0 - lam) / len(x_u))
    return value, grads


def scale_params(grads: models.ModelParams, c: float) -> models.ModelParams:
    for layer in grads.layers():
        layer.W *= c
        layer.b *= c
    return grads


def _negate(grads: models.ModelParams) -> models.ModelParams:
    return scale_params(grads, -1.0)


def _copy_params(params: models.ModelParams) -> models.ModelParams:
    return copy.deepcopy(params)


def evaluate_split(spec, params, split: DatasetSplit, rng, batch_size=500):
    """Mean ELBO components over a split, deterministically batched."""
    recon, kl = [], []
    for start in range(0, len(split), batch_size):
        x = split.images[start : start + batch_size]
        est = models.elbo(spec, params, x, rng)
        recon.append(est.expected_reconstruction * len(x))
        kl.append(est.kl * len(x))
    n = len(split)
    return sum(recon) / n, sum(kl) / n


def classification_error(spec, params, split: DatasetSplit, batch_size=1000):
    wrong = 0
    for start in range(0, len(split), batch_size):
        x = split.images[start : start + batch_size]
        y = split.labels[start : start + batch_size]
        wrong += int((models.classify(spec, params, x) != y).sum())
    return wrong / len(split)


def train(
    cfg: TrainConfig,
    spec: models.ModelSpec,
    data,
    rng=None,
    params=None,
    validation_metric=None,
):
    """Run the optimization loop; returns (best params, metrics history).

    `data` is a (train, valid, test) triple of DatasetSplit. Early stopping
    tracks validation ELBO for unsupervised runs and validation classification
    error for semi-supervised ones, restoring the best parameters seen.
    """
    train_split, valid_split, test_split = data
    if rng is None:
        rng = make_rng(cfg.seed)
    if params is None:
        params = models.init_model_params(spec, rng)
    semisup = spec.n_classes > 0
    adam = AdamState.for_params(
        params, alpha=cfg.adam_alpha, b1=cfg.adam_b1, b2=cfg.adam_b2
    )
    history = MetricsHistory()
    best_params = _copy_params(params)
    best_score = -np.inf
    best_epoch = 0

    n = len(train_split)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        epoch_obj = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x = train_split.images[idx]
            if semisup:
                mask = train_split.label_mask[idx]
                x_l = x[mask]
                y_l = train_split.labels[idx][mask]
                x_u = x[~mask]
                noise_l = models.draw_noise(spec, rng, len(x_l))
                noise_u = models.draw_noise(spec, rng, len(x_u))
                value, grads = semisup_batch_objective(
                    cfg, spec, params, (x_l, y_l), x_u, noise_l, noise_u
                )
            else:
                noise = models.draw_noise(spec, rng, len(x))
                est, grads = models.elbo_and_grads(spec, params, x, noise)
                value = float(est.per_example.mean())
                scale_params(grads, 1.0 / len(x))
            try:
                adam_step(adam, params, _negate(grads))
            except FloatingPointError as exc:
                raise FloatingPointError(f"epoch {epoch}: {exc}") from exc
            epoch_obj += value * len(x)
        history.record(epoch, "train", "objective", epoch_obj / n)

        tr_recon, tr_kl = evaluate_split(spec, params, train_split, rng)
        history.record(epoch, "train", "reconstruction", tr_recon)
        history.record(epoch, "train", "kl", tr_kl)
        history.record(epoch, "train", "elbo", tr_recon - tr_kl)
        va_recon, va_kl = evaluate_split(spec, params, valid_split, rng)
        history.record(epoch, "valid", "reconstruction", va_recon)
        history.record(epoch, "valid", "kl", va_kl)
        history.record(epoch, "valid", "elbo", va_recon - va_kl)
        te_recon, te_kl = evaluate_split(spec, params, test_split, rng)
        history.record(epoch, "test", "reconstruction", te_recon)
        history.record(epoch, "test", "kl", te_kl)
        history.record(epoch, "test", "elbo", te_recon - te_kl)
        if semisup:
            for name, split in (("valid", valid_split), ("test", test_split)):
                err = classification_error(spec, params, split)
                history.record(epoch, name, "classification_error", err)

        if validation_metric is not None:
            score = validation_metric(epoch, spec, params)
        elif semisup:
            score = -history.last("valid", "classification_error")
        else:
            score = history.last("valid", "elbo")
        if score > best_score:
            best_score = score
            best_params = _copy_params(params)
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.patience:
            break

    return best_params, history
