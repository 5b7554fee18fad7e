"""Stick-breaking variational autoencoders trained with hand-rolled SGVB."""

from .models import ElboEstimate, ModelParams, ModelSpec
from .training import AdamState, DatasetSplit, TrainConfig

__all__ = [
    "AdamState",
    "DatasetSplit",
    "ElboEstimate",
    "ModelParams",
    "ModelSpec",
    "TrainConfig",
]
