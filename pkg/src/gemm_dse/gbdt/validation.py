"""Holdout/k-fold evaluation and random hyperparameter search."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .. import metrics
from .model import Hyperparams, Transform, train

DEFAULT_SPACE: dict[str, list] = {
    "n_trees": [100, 200, 300, 500, 750, 1000],
    "max_depth": [3, 4, 5, 6, 7, 8],
    "learning_rate": [0.01, 0.03, 0.05, 0.1, 0.2, 0.3],
    "min_samples_leaf": [1, 2, 5, 10],
    "row_subsample": [0.6, 0.8, 1.0],
    "col_subsample": [0.6, 0.8, 1.0],
}


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle, then ``k`` contiguous chunks."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def holdout_split(n: int, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    if not 0 < n_test < n:
        raise ValueError("holdout split leaves an empty side")
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


@dataclass(frozen=True)
class CVResult:
    folds: list[metrics.EvalReport]
    mean_mape_pct: float
    std_mape_pct: float
    mean_r2: float
    std_r2: float


def cross_validate(
    X,
    y,
    hp: Hyperparams,
    k: int = 5,
    transform: Transform | str = Transform.IDENTITY,
    seed: int = 0,
    feature_names=None,
) -> CVResult:
    """Train on ``k-1`` folds, score the held-out fold (original target scale)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    folds = kfold_indices(len(y), k, seed)
    reports = []
    for i, test in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(len(y)), test, assume_unique=True)
        model = train(X[train_idx], y[train_idx], hp, transform, feature_names)
        pred = model.predict(X[test])
        if len(test) >= 2:
            reports.append(metrics.evaluate(y[test], pred, group=i))
        else:
            reports.append(
                metrics.EvalReport(metrics.mape(y[test], pred), metrics.mae(y[test], pred), 0.0, float("nan"), 1, i)
            )
    mapes = np.array([r.mape_pct for r in reports])
    r2s = np.array([r.r2 for r in reports])
    return CVResult(reports, float(mapes.mean()), float(mapes.std()), float(r2s.mean()), float(r2s.std()))


@dataclass
class TuneResult:
    best: Hyperparams
    best_mape_pct: float
    trials: list[dict] = field(default_factory=list)


def tune(
    X,
    y,
    space: Mapping[str, Sequence] | None = None,
    budget: int = 20,
    seed: int = 0,
    k: int = 5,
    transform: Transform | str = Transform.IDENTITY,
    base: Hyperparams = Hyperparams(),
) -> TuneResult:
    """Seeded random search over a discrete grid, scored by mean CV MAPE.

    Each trial draws every parameter in sorted-name order from one generator,
    so a larger budget with the same seed replays the smaller run as a prefix.
    Ties keep the earlier trial.
    """
    space = DEFAULT_SPACE if space is None else space
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not space or any(len(v) == 0 for v in space.values()):
        raise ValueError("search space is empty")
    known = {f.name for f in dataclasses.fields(Hyperparams)} - {"seed"}
    unknown = set(space) - known
    if unknown:
        raise ValueError(f"unknown hyperparameters in space: {sorted(unknown)}")

    rng = np.random.default_rng(seed)
    trials: list[dict] = []
    best, best_score = None, np.inf
    for t in range(budget):
        params = {}
        for name in sorted(space):
            values = list(space[name])
            v = values[int(rng.integers(len(values)))]
            params[name] = v.item() if isinstance(v, np.generic) else v
        hp = base.replace(**params)
        cv = cross_validate(X, y, hp, k=k, transform=transform, seed=seed)
        trials.append({"trial": t, "params": params, "mean_mape_pct": cv.mean_mape_pct,
                       "std_mape_pct": cv.std_mape_pct, "mean_r2": cv.mean_r2})
        if cv.mean_mape_pct < best_score:
            best, best_score = hp, cv.mean_mape_pct
    return TuneResult(best, float(best_score), trials)
