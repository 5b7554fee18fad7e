"""Minimal feed-forward machinery with hand-written reverse-mode rules.

The architecture space is deliberately small: stacks of ReLU layers with
optional identity skip-connections, plus linear heads for distribution
parameters, logits, and class probabilities. Backward rules are layer-local;
there is no general tape.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .distributions import sigmoid

INIT_WEIGHT_VARIANCE = 0.001


@dataclass
class MlpConfig:
    """Widths of a hidden stack: (input, h1, ..., hn). Skip flags per hidden layer."""

    widths: tuple
    skip: tuple = field(default=None)

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        n_hidden = len(self.widths) - 1
        if self.skip is None:
            self.skip = (False,) * n_hidden
        self.skip = tuple(bool(s) for s in self.skip)
        if len(self.skip) != n_hidden:
            raise ValueError("one skip flag per hidden layer")
        for i, s in enumerate(self.skip):
            if s and self.widths[i] != self.widths[i + 1]:
                raise ValueError("skip-connections require equal layer widths")


@dataclass
class LayerParams:
    W: np.ndarray  # fan_in x fan_out
    b: np.ndarray  # fan_out


def init_linear(fan_in: int, fan_out: int, rng) -> LayerParams:
    W = rng.standard_normal((fan_in, fan_out)) * np.sqrt(INIT_WEIGHT_VARIANCE)
    return LayerParams(W=W, b=np.zeros(fan_out))


def init_hidden_stack(cfg: MlpConfig, rng) -> list[LayerParams]:
    return [
        init_linear(cfg.widths[i], cfg.widths[i + 1], rng)
        for i in range(len(cfg.widths) - 1)
    ]


def linear_forward(layer: LayerParams, x: np.ndarray) -> np.ndarray:
    if x.shape[-1] != layer.W.shape[0]:
        raise ValueError(
            f"input width {x.shape[-1]} does not match layer fan-in {layer.W.shape[0]}"
        )
    return x @ layer.W + layer.b


def linear_backward(layer: LayerParams, x: np.ndarray, d_out: np.ndarray):
    dW = x.T @ d_out
    db = d_out.sum(axis=0)
    dx = d_out @ layer.W.T
    return LayerParams(W=dW, b=db), dx


def hidden_forward(layers: list[LayerParams], cfg: MlpConfig, x: np.ndarray):
    """ReLU stack with optional skips; returns (trace, final activation)."""
    trace = {"inputs": [], "pre": []}
    h = x
    for layer, skip in zip(layers, cfg.skip):
        trace["inputs"].append(h)
        pre = linear_forward(layer, h)
        trace["pre"].append(pre)
        act = np.maximum(pre, 0.0)
        h = act + trace["inputs"][-1] if skip else act
    return trace, h


def hidden_backward(layers: list[LayerParams], cfg: MlpConfig, trace, d_out: np.ndarray):
    if len(trace["inputs"]) != len(layers):
        raise ValueError("trace does not match the layer stack")
    grads = [None] * len(layers)
    dh = d_out
    for i in range(len(layers) - 1, -1, -1):
        d_act = dh
        d_pre = d_act * (trace["pre"][i] > 0.0)
        grads[i], dx = linear_backward(layers[i], trace["inputs"][i], d_pre)
        if cfg.skip[i]:
            dx = dx + d_act
        dh = dx
    return grads, dh


# ---------------------------------------------------------------------------
# Likelihood heads
# ---------------------------------------------------------------------------

def bernoulli_log_likelihood(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-row sum of x*log s(l) + (1-x)*log(1-s(l)), stably."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ValueError("logits/targets shape mismatch")
    if np.any(targets < 0.0) or np.any(targets > 1.0):
        raise ValueError("targets must lie in [0,1]")
    # x*l - log(1 + e^l), written with logaddexp for stability
    per_pixel = targets * logits - np.logaddexp(0.0, logits)
    return per_pixel.sum(axis=-1)


def bernoulli_log_likelihood_grad_logits(logits, targets):
    """d/d logits of the per-row log likelihood: x - s(l)."""
    return np.asarray(targets, dtype=np.float64) - sigmoid(logits)


def softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

_MAGIC = b"SBNN"
_VERSION = 1


def write_layer_checkpoint(path, layers: list[LayerParams]) -> None:
    """Flat binary container: magic, version, layer count, shapes, f64 LE payload."""
    with open(path, "wb") as fh:
        fh.write(serialize_layers(layers))


def read_layer_checkpoint(path) -> list[LayerParams]:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_layer_checkpoint(data)


def parse_layer_checkpoint(data: bytes) -> list[LayerParams]:
    if data[:4] != _MAGIC:
        raise ValueError(f"bad checkpoint magic at offset 0: {data[:4]!r}")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset = 12
    shapes = []
    for _ in range(n_layers):
        shapes.append(struct.unpack_from("<II", data, offset))
        offset += 8
    layers = []
    for rows, cols in shapes:
        n = rows * cols
        W = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(rows, cols)
        offset += 8 * n
        b = np.frombuffer(data, dtype="<f8", count=cols, offset=offset)
        offset += 8 * cols
        layers.append(LayerParams(W=W.copy(), b=b.copy()))
    if offset != len(data):
        raise ValueError(f"trailing bytes in checkpoint at offset {offset}")
    return layers


def serialize_layers(layers: list[LayerParams]) -> bytes:
    out = [_MAGIC, struct.pack("<II", _VERSION, len(layers))]
    for layer in layers:
        out.append(struct.pack("<II", *layer.W.shape))
    for layer in layers:
        out.append(np.ascontiguousarray(layer.W, dtype="<f8").tobytes())
        out.append(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
    return b"".join(out)
