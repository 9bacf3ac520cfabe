"""Dataset-level training and evaluation, shared by the CLI and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import metrics
from .analytical import analytical_arrays
from .design_space import RESOURCE_KINDS, DeviceModel, pad_workload
from .dse import SurrogateSet
from .features import FEATURE_NAMES, FeatureSet, feature_matrix
from .gbdt import (
    BoostedModel,
    Hyperparams,
    MultiTargetModel,
    Transform,
    holdout_split,
    kfold_indices,
    train,
    tune,
)
from .oracle import MeasurementDataset

TARGETS = ("latency", "power", "resources")
SPLITS = ("holdout80_20", "kfold5", "lowo")

# Chosen once by a search over the default grid on the bundled dataset.
# Shallow, long ensembles extrapolate the multiplicative structure of latency
# and buffer size better than deep ones.
DEFAULT_TARGET_HP: dict[str, Hyperparams] = {
    "latency": Hyperparams(n_trees=1000, max_depth=4, learning_rate=0.2, min_samples_leaf=1),
    "power": Hyperparams(n_trees=300, max_depth=6, learning_rate=0.1, min_samples_leaf=2),
    "resources": Hyperparams(n_trees=1000, max_depth=3, learning_rate=0.3, min_samples_leaf=1),
}
# LUT/FF/DSP are affine in the channel count and need far fewer rounds; this
# keeps the full-space sweep cheap.
LOGIC_MEMBER_HP = Hyperparams(n_trees=300, max_depth=3, learning_rate=0.3, min_samples_leaf=1)
TARGET_TRANSFORM = {"latency": Transform.LOG, "power": Transform.IDENTITY, "resources": Transform.LOG}


def _check_target(target: str) -> str:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; choose one of {TARGETS}")
    return target


def dataset_features(ds: MeasurementDataset) -> np.ndarray:
    """Full 17-column feature matrix, row-aligned with ``ds``."""
    X = np.zeros((len(ds), len(FEATURE_NAMES)))
    for w in ds.workloads():
        m = ds.labels == w.name
        X[m] = feature_matrix(pad_workload(w), ds.configs[m])
    return X


def target_values(ds: MeasurementDataset, target: str) -> np.ndarray:
    target = _check_target(target)
    if target == "latency":
        return ds.latency_s
    if target == "power":
        return ds.power_w
    return ds.resources_pct


def analytical_latency_for(ds: MeasurementDataset, dev: DeviceModel) -> np.ndarray:
    out = np.zeros(len(ds))
    for w in ds.workloads():
        m = ds.labels == w.name
        out[m] = analytical_arrays(pad_workload(w), ds.configs[m], dev)["latency_s"]
    return out


def fit_target(
    X: np.ndarray,
    y: np.ndarray,
    target: str,
    feature_set: FeatureSet | str = FeatureSet.SET12,
    hp: Hyperparams | Mapping[str, Hyperparams] | None = None,
    meta: Optional[Mapping] = None,
    seed: Optional[int] = None,
) -> BoostedModel | MultiTargetModel:
    """Train one target on a prepared matrix; ``X`` may hold all 17 columns.

    ``hp=None`` selects the per-target defaults. For resources ``hp`` may also
    map member names to their own hyperparameters. ``seed`` overrides the
    seed of every ensemble.
    """
    target = _check_target(target)
    fs = FeatureSet(feature_set)
    member_hp: Mapping[str, Hyperparams] = {}
    if hp is None and target == "resources":
        member_hp = {k: LOGIC_MEMBER_HP for k in ("lut", "ff", "dsp")}
    elif isinstance(hp, Mapping):
        member_hp, hp = hp, None
    hp = DEFAULT_TARGET_HP[target] if hp is None else hp
    if seed is not None:
        hp = hp.replace(seed=seed)
        member_hp = {k: v.replace(seed=seed) for k, v in member_hp.items()}
    Xs = np.ascontiguousarray(X[:, : fs.width])
    tf = TARGET_TRANSFORM[target]
    info = {"target": target, "feature_set": fs.value, **(meta or {})}
    if target != "resources":
        m = train(Xs, y, hp, tf, fs.names)
        m.meta = info
        return m
    members = {}
    for j, kind in enumerate(RESOURCE_KINDS):
        members[kind] = train(Xs, y[:, j], member_hp.get(kind, hp), tf, fs.names)
        members[kind].meta = {**info, "target": f"resources.{kind}"}
    return MultiTargetModel(members, info)


def train_target(
    ds: MeasurementDataset,
    target: str,
    feature_set: FeatureSet | str = FeatureSet.SET12,
    hp: Hyperparams | Mapping[str, Hyperparams] | None = None,
    dev: Optional[DeviceModel] = None,
    X: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> BoostedModel | MultiTargetModel:
    X = dataset_features(ds) if X is None else X
    meta = {}
    if target == "resources":
        meta["reference_capacities"] = list((dev or DeviceModel()).capacities.as_tuple())
    return fit_target(X, target_values(ds, target), target, feature_set, hp, meta, seed)


def train_surrogates(
    ds: MeasurementDataset,
    feature_set: FeatureSet | str = FeatureSet.SET12,
    hps: Optional[Mapping[str, Hyperparams]] = None,
    dev: Optional[DeviceModel] = None,
) -> SurrogateSet:
    hps = hps or {}
    X = dataset_features(ds)
    lat, power, res = (train_target(ds, t, feature_set, hps.get(t), dev, X) for t in TARGETS)
    return SurrogateSet(lat, power, res, tuple(res.meta["reference_capacities"]))


def tune_target(
    ds: MeasurementDataset,
    target: str,
    feature_set: FeatureSet | str,
    budget: int,
    seed: int,
    space=None,
):
    """Random search on one target; resources are scored on the URAM member,
    the hardest of the five to fit."""
    target = _check_target(target)
    fs = FeatureSet(feature_set)
    X = np.ascontiguousarray(dataset_features(ds)[:, : fs.width])
    y = target_values(ds, target)
    if target == "resources":
        y = y[:, RESOURCE_KINDS.index("uram")]
    base = DEFAULT_TARGET_HP[target].replace(seed=seed)
    return tune(X, y, space, budget, seed, transform=TARGET_TRANSFORM[target], base=base)


# -- evaluation ----------------------------------------------------------------


@dataclass(frozen=True)
class SplitEval:
    """Held-out predictions for one target, feature set and split policy."""

    split: str
    feature_set: str
    target: str
    groups: list[metrics.EvalReport]
    overall: metrics.EvalReport


def _split_masks(ds: MeasurementDataset, split: str, seed: int) -> list[tuple[str, np.ndarray]]:
    """(group name, test mask) pairs."""
    n = len(ds)
    if split == "holdout80_20":
        _, te = holdout_split(n, 0.2, seed)
        m = np.zeros(n, dtype=bool)
        m[te] = True
        return [("holdout", m)]
    if split == "kfold5":
        out = []
        for i, idx in enumerate(kfold_indices(n, 5, seed)):
            m = np.zeros(n, dtype=bool)
            m[idx] = True
            out.append((f"fold{i}", m))
        return out
    if split == "lowo":
        return [(str(lab), ds.labels == lab) for lab in sorted(set(ds.labels.tolist()))]
    raise ValueError(f"unknown split {split!r}; choose one of {SPLITS}")


def heldout_predictions(
    ds: MeasurementDataset,
    target: str,
    feature_set: FeatureSet | str,
    split: str,
    hp: Hyperparams | Mapping[str, Hyperparams] | None = None,
    seed: int = 0,
    X: Optional[np.ndarray] = None,
) -> tuple[list[tuple[str, np.ndarray]], np.ndarray]:
    """Out-of-fold predictions; each row is predicted by the model that did not see it."""
    X = dataset_features(ds) if X is None else X
    y = target_values(ds, target)
    pred = np.zeros_like(y, dtype=np.float64)
    masks = _split_masks(ds, split, seed)
    for _, m in masks:
        model = fit_target(X[~m], y[~m], target, feature_set, hp)
        pred[m] = model.predict(np.ascontiguousarray(X[m][:, : FeatureSet(feature_set).width]))
    return masks, pred


def evaluate_split(
    ds: MeasurementDataset,
    target: str,
    feature_set: FeatureSet | str,
    split: str,
    hp: Hyperparams | Mapping[str, Hyperparams] | None = None,
    seed: int = 0,
    X: Optional[np.ndarray] = None,
) -> list[SplitEval]:
    """One SplitEval per output column (five for resources)."""
    masks, pred = heldout_predictions(ds, target, feature_set, split, hp, seed, X)
    y = target_values(ds, target)
    if y.ndim == 1:
        cols = [(target, y, pred)]
    else:
        cols = [(f"resources.{k}", y[:, j], pred[:, j]) for j, k in enumerate(RESOURCE_KINDS)]
    covered = np.zeros(len(ds), dtype=bool)
    for _, m in masks:
        covered |= m
    out = []
    for name, yt, yp in cols:
        groups = [metrics.evaluate(yt[m], yp[m], g) for g, m in masks]
        overall = metrics.evaluate(yt[covered], yp[covered], "all")
        out.append(SplitEval(split, FeatureSet(feature_set).value, name, groups, overall))
    return out


def analytical_eval(ds: MeasurementDataset, dev: DeviceModel, split: str, seed: int = 0) -> SplitEval:
    """Analytical latency scored on the same held-out groups (it needs no training)."""
    pred = analytical_latency_for(ds, dev)
    masks = _split_masks(ds, split, seed)
    groups = [metrics.evaluate(ds.latency_s[m], pred[m], g) for g, m in masks]
    covered = np.zeros(len(ds), dtype=bool)
    for _, m in masks:
        covered |= m
    return SplitEval(split, "analytical", "latency", groups,
                     metrics.evaluate(ds.latency_s[covered], pred[covered], "all"))


def median_group_mape(ev: SplitEval) -> float:
    return float(np.median([g.mape_pct for g in ev.groups]))
