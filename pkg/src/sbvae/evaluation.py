"""Evaluation procedures: kNN on latents, sparsity diagnostics, latent export,
and PGM sample grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models, nn
from .stick import effective_dimensions


@dataclass
class LatentTable:
    codes: np.ndarray  # N x K
    labels: np.ndarray  # integer vector
    source: str  # "sampled" or "posterior_mean"

    def __post_init__(self):
        if len(self.codes) != len(self.labels):
            raise ValueError("codes/labels row mismatch")


@dataclass
class SparsityDiagnostics:
    per_dimension: np.ndarray  # mean KL (gauss) or mean activation (sb)
    decoder_weight_norms: np.ndarray


def knn_error(train: LatentTable, test: LatentTable, k: int) -> float:
    """Euclidean majority-vote error fraction.

    Distance ties prefer the lower training index; vote ties prefer the
    smallest class label among the tied classes.
    """
    if len(train.codes) == 0 or len(test.codes) == 0:
        raise ValueError("empty latent table")
    if not 1 <= k <= len(train.codes):
        raise ValueError("k must lie in [1, number of training rows]")
    tr = np.asarray(train.codes, dtype=np.float64)
    tr_sq = (tr**2).sum(axis=1)
    wrong = 0
    chunk = 256
    for start in range(0, len(test.codes), chunk):
        te = np.asarray(test.codes[start : start + chunk], dtype=np.float64)
        d2 = (te**2).sum(axis=1)[:, None] - 2.0 * te @ tr.T + tr_sq[None, :]
        # stable argsort keeps lower training indices first among distance ties
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        votes = np.asarray(train.labels)[order]
        for row, y_true in zip(votes, test.labels[start : start + chunk]):
            counts = np.bincount(row)
            pred = int(np.argmax(counts))  # argmax takes the smallest tied label
            wrong += pred != y_true
    return wrong / len(test.codes)


def sparsity_diagnostics(spec, params, data, rng) -> SparsityDiagnostics:
    """Per-dimension usage statistic plus decoder first-layer column norms."""
    norms = np.linalg.norm(params.dec_hidden[0].W[: spec.latent_dim], axis=1)
    if spec.variant == models.GAUSS_VAE:
        _, h = nn.hidden_forward(params.enc_hidden, spec.encoder_cfg, data)
        t = nn.linear_forward(params.enc_out, h)
        from . import distributions as dist

        mu = t[:, : spec.latent_dim]
        sigma = dist.positive_from_unconstrained(t[:, spec.latent_dim :])
        per_dim_kl = 0.5 * (mu**2 + sigma**2 - 1.0 - 2.0 * np.log(sigma))
        return SparsityDiagnostics(per_dim_kl.mean(axis=0), norms)
    _, z, _ = models.encode(spec, params, data, rng)
    return SparsityDiagnostics(z.mean(axis=0), norms)


def export_latents(spec, params, split, rng, source: str = "sampled") -> LatentTable:
    if source == "sampled":
        _, codes, _ = models.encode(spec, params, split.images, rng)
    elif source == "posterior_mean":
        codes = models.posterior_mean_latent(spec, params, split.images)
    else:
        raise ValueError(f"unknown latent source {source!r}")
    labels = (
        split.labels if split.labels is not None else np.full(len(split.images), -1)
    )
    return LatentTable(codes=codes, labels=np.asarray(labels), source=source)


def latents_to_csv(table: LatentTable) -> str:
    k = table.codes.shape[1]
    lines = ["label," + ",".join(f"z_{i + 1}" for i in range(k))]
    for label, row in zip(table.labels, table.codes):
        lines.append(str(int(label)) + "," + ",".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"


def read_latents_csv(text: str) -> LatentTable:
    lines = text.strip().splitlines()
    labels, codes = [], []
    for line in lines[1:]:
        parts = line.split(",")
        labels.append(int(parts[0]))
        codes.append([float(v) for v in parts[1:]])
    return LatentTable(np.asarray(codes), np.asarray(labels), source="sampled")


def sparsity_to_csv(diag: SparsityDiagnostics) -> str:
    lines = ["dimension,usage,decoder_weight_norm"]
    for i, (use, norm) in enumerate(zip(diag.per_dimension, diag.decoder_weight_norms)):
        lines.append(f"{i + 1},{use:.9g},{norm:.9g}")
    return "\n".join(lines) + "\n"


def mean_effective_dimension(spec, params, data, rng, mass=0.99) -> float:
    if spec.variant != models.SB_VAE:
        raise ValueError("effective dimension is a stick-weight statistic")
    _, z, _ = models.encode(spec, params, data, rng)
    return float(effective_dimensions(z, mass).mean())


def write_pgm_grid(path, images: np.ndarray, image_shape, n_cols: int = 8) -> None:
    """Tile [0,1] images into one binary (P5) PGM with 2-pixel separators."""
    rows, cols = image_shape
    n = len(images)
    n_cols = min(n_cols, n)
    n_rows = (n + n_cols - 1) // n_cols
    sep = 2
    canvas = np.zeros(
        (n_rows * rows + (n_rows - 1) * sep, n_cols * cols + (n_cols - 1) * sep)
    )
    for i, img in enumerate(images):
        r, c = divmod(i, n_cols)
        top = r * (rows + sep)
        left = c * (cols + sep)
        canvas[top : top + rows, left : left + cols] = img.reshape(rows, cols)
    pixels = np.clip(np.round(canvas * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
