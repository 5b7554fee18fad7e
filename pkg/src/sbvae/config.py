"""Flat key=value run configuration files. Unknown keys are errors."""

from __future__ import annotations

from dataclasses import dataclass

from . import models
from .training import TrainConfig

_KEYS = {
    "variant": str,
    "fraction_param": str,
    "K": int,
    "alpha0": float,
    "seed": int,
    "batch_size": int,
    "epochs": int,
    "patience": int,
    "lambda": float,
    "keep_fraction": float,
    "n_classes": int,
    "hidden": str,
    "mc_samples": int,
    "kl_terms": int,
    "binarize": int,
    "train_images": str,
    "train_labels": str,
    "test_images": str,
    "test_labels": str,
    "split_train": int,
    "split_valid": int,
    "split_test": int,
}

_DEFAULTS = {
    "variant": "sb_vae",
    "fraction_param": "kumaraswamy",
    "K": 50,
    "alpha0": 5.0,
    "seed": 0,
    "batch_size": 100,
    "epochs": 100,
    "patience": 30,
    "lambda": 0.375,
    "keep_fraction": 1.0,
    "n_classes": 0,
    "hidden": "500",
    "mc_samples": 1,
    "kl_terms": 10,
    "binarize": 0,
    "train_images": None,
    "train_labels": None,
    "test_images": None,
    "test_labels": None,
    "split_train": 45000,
    "split_valid": 5000,
    "split_test": 10000,
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def require_path(self, key):
        if self.values[key] is None:
            raise KeyError(f"config is missing required data path {key!r}")
        return self.values[key]

    def model_spec(self, input_dim: int) -> models.ModelSpec:
        return models.ModelSpec(
            variant=self.values["variant"],
            input_dim=input_dim,
            latent_dim=self.values["K"],
            hidden=tuple(int(w) for w in self.values["hidden"].split(",")),
            fraction_param=self.values["fraction_param"],
            alpha0=self.values["alpha0"],
            n_classes=self.values["n_classes"],
            mc_samples=self.values["mc_samples"],
            kl_terms=self.values["kl_terms"],
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.values["batch_size"],
            epochs=self.values["epochs"],
            patience=self.values["patience"],
            seed=self.values["seed"],
            supervised_weight=self.values["lambda"],
        )


def parse_run_config(text: str) -> RunConfig:
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KEYS:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        values[key] = _KEYS[key](value.strip())
    return RunConfig(values)


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_run_config(fh.read())
