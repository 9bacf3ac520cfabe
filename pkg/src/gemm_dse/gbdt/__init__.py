"""Gradient-boosted regression trees used as latency, power and resource surrogates."""

from .model import (
    BoostedModel,
    Hyperparams,
    ModelFormatError,
    MultiTargetModel,
    Transform,
    Tree,
    load,
    loads_any,
    predict,
    save,
    train,
)
from .validation import (
    DEFAULT_SPACE,
    CVResult,
    TuneResult,
    cross_validate,
    holdout_split,
    kfold_indices,
    tune,
)

__all__ = [
    "BoostedModel",
    "Hyperparams",
    "ModelFormatError",
    "MultiTargetModel",
    "Transform",
    "Tree",
    "load",
    "loads_any",
    "predict",
    "save",
    "train",
    "DEFAULT_SPACE",
    "CVResult",
    "TuneResult",
    "cross_validate",
    "holdout_split",
    "kfold_indices",
    "tune",
]
