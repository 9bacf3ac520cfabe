"""Least-squares gradient boosting with exact greedy regression trees."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import _kernels

FORMAT = "gemm_dse.gbdt"
BUNDLE_FORMAT = "gemm_dse.gbdt.bundle"
VERSION = 1


class ModelFormatError(ValueError):
    """A model document is malformed, tampered with, or from another version."""


class Transform(str, Enum):
    IDENTITY = "identity"
    LOG = "log"

    def forward(self, y):
        return np.log(y) if self is Transform.LOG else np.asarray(y, dtype=np.float64)

    def inverse(self, z):
        return np.exp(z) if self is Transform.LOG else z


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 300
    max_depth: int = 6
    learning_rate: float = 0.1
    min_samples_leaf: int = 2
    row_subsample: float = 1.0
    col_subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        for name in ("row_subsample", "col_subsample"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in (0, 1]")

    def replace(self, **kw) -> "Hyperparams":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __len__(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self), dtype=np.int64)
        for nd in range(len(self)):
            if self.feature[nd] >= 0:
                depth[self.left[nd]] = depth[self.right[nd]] = depth[nd] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right, self.value)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict, n_features: int) -> "Tree":
        try:
            t = cls(
                feature=np.asarray(doc["feature"], dtype=np.int64),
                threshold=np.asarray(doc["threshold"], dtype=np.float64),
                left=np.asarray(doc["left"], dtype=np.int64),
                right=np.asarray(doc["right"], dtype=np.int64),
                value=np.asarray(doc["value"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"bad tree record: {exc}") from None
        t.check(n_features)
        return t

    def check(self, n_features: int) -> None:
        n = len(self.feature)
        if n == 0 or any(len(a) != n for a in (self.threshold, self.left, self.right, self.value)):
            raise ModelFormatError("tree arrays are empty or of unequal length")
        internal = self.feature >= 0
        if np.any(self.feature >= n_features):
            raise ModelFormatError("tree references a feature outside feature_names")
        kids = np.concatenate([self.left[internal], self.right[internal]])
        if np.any(kids <= 0) or np.any(kids >= n) or len(np.unique(kids)) != len(kids):
            raise ModelFormatError("tree child links are inconsistent")
        if np.any((self.left[~internal] != -1) | (self.right[~internal] != -1)):
            raise ModelFormatError("leaf node carries child links")
        if np.any(kids <= np.concatenate([np.flatnonzero(internal)] * 2)):
            raise ModelFormatError("tree child links must point forward")
        if not (np.all(np.isfinite(self.threshold)) and np.all(np.isfinite(self.value))):
            raise ModelFormatError("non-finite tree values")


@dataclass
class BoostedModel:
    base_score: float
    trees: list[Tree]
    learning_rate: float
    target_transform: Transform
    feature_names: tuple[str, ...]
    hyperparams: Optional[Hyperparams] = None
    fingerprint: str = ""
    train_loss: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @cached_property
    def _complete(self):
        if not self.trees:
            return None
        sizes = [len(t) for t in self.trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        flat = [np.concatenate([getattr(t, a) for t in self.trees]) for a in
                ("feature", "threshold", "left", "right", "value")]
        depth = max(t.depth for t in self.trees)
        return (*_kernels.to_complete(offsets, *flat, depth), depth)

    def _as_matrix(self, X) -> np.ndarray:
        fields = getattr(X, "_fields", None)
        if fields is not None:
            if tuple(fields[: self.n_features]) != self.feature_names:
                raise ValueError("feature vector names do not match the model")
            X = tuple(X)[: self.n_features] if len(fields) > self.n_features else tuple(X)
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features {self.feature_names}, got shape {X.shape}")
        return np.ascontiguousarray(X)

    def predict_raw(self, X) -> np.ndarray:
        """Predictions in the transformed (fitting) space."""
        X = self._as_matrix(X)
        if self._complete is None:
            return np.full(len(X), float(self.base_score))
        return _kernels.predict_complete(X, float(self.base_score), float(self.learning_rate), *self._complete)

    def predict(self, X) -> np.ndarray:
        return self.target_transform.inverse(self.predict_raw(X))

    def predict_one(self, v) -> float:
        return float(self.predict(v)[0])

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        body = {
            "format": FORMAT,
            "version": VERSION,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "target_transform": self.target_transform.value,
            "feature_names": list(self.feature_names),
            "hyperparams": dataclasses.asdict(self.hyperparams) if self.hyperparams else None,
            "fingerprint": self.fingerprint,
            "train_loss": self.train_loss,
            "meta": self.meta,
            "trees": [t.to_dict() for t in self.trees],
        }
        body["digest"] = _digest(body)
        return body

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostedModel":
        if not isinstance(doc, dict) or doc.get("format") != FORMAT:
            raise ModelFormatError("not a boosted-model document")
        if doc.get("version") != VERSION:
            raise ModelFormatError(f"unsupported model version {doc.get('version')!r} (expected {VERSION})")
        body = {k: v for k, v in doc.items() if k != "digest"}
        if doc.get("digest") != _digest(body):
            raise ModelFormatError("model digest mismatch: document was modified")
        names = tuple(doc["feature_names"])
        hp = doc.get("hyperparams")
        return cls(
            base_score=float(doc["base_score"]),
            trees=[Tree.from_dict(t, len(names)) for t in doc["trees"]],
            learning_rate=float(doc["learning_rate"]),
            target_transform=Transform(doc["target_transform"]),
            feature_names=names,
            hyperparams=Hyperparams(**hp) if hp else None,
            fingerprint=doc.get("fingerprint", ""),
            train_loss=list(doc.get("train_loss", [])),
            meta=dict(doc.get("meta") or {}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "BoostedModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not JSON: {exc}") from None
        return cls.from_dict(doc)


def _digest(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def fingerprint(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def _check_inputs(X, y, transform: Transform):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
        raise ValueError(f"X must be (n, f) and y (n,), got {X.shape} and {y.shape}")
    if len(y) < 2:
        raise ValueError("need at least 2 training rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    if transform is Transform.LOG and np.any(y <= 0):
        raise ValueError("log transform needs strictly positive targets")
    return X, y


def train(
    X,
    y,
    hp: Hyperparams = Hyperparams(),
    transform: Transform | str = Transform.IDENTITY,
    feature_names: Optional[Sequence[str]] = None,
) -> BoostedModel:
    """Fit a boosted ensemble to ``transform(y)`` with squared loss.

    Boosting stops early once a round cannot find any split with positive
    gain, so constant targets yield a base-only model.
    """
    transform = Transform(transform)
    X, y = _check_inputs(X, y, transform)
    n, n_feat = X.shape
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(n_feat))
    if len(names) != n_feat:
        raise ValueError("feature_names length does not match X")

    z = transform.forward(y)
    base = float(np.mean(z))
    F = np.full(n, base)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    rng = np.random.default_rng(hp.seed)
    n_rows = max(1, int(round(hp.row_subsample * n)))
    n_cols = max(1, int(round(hp.col_subsample * n_feat)))
    all_rows = np.ones(n, dtype=np.bool_)
    all_cols = np.ones(n_feat, dtype=np.bool_)

    trees: list[Tree] = []
    losses = [float(np.mean((z - F) ** 2))]
    for _ in range(hp.n_trees):
        resid = z - F
        rows, cols = all_rows, all_cols
        if n_rows < n:
            rows = np.zeros(n, dtype=np.bool_)
            rows[rng.choice(n, n_rows, replace=False)] = True
        if n_cols < n_feat:
            cols = np.zeros(n_feat, dtype=np.bool_)
            cols[rng.choice(n_feat, n_cols, replace=False)] = True
        arrays = _kernels.build_tree(X, order, resid, rows, cols, hp.max_depth, hp.min_samples_leaf)
        tree = Tree(*arrays)
        if len(tree) == 1:
            if rows is all_rows and cols is all_cols:
                break
            continue
        trees.append(tree)
        F = F + hp.learning_rate * tree.apply(X)
        losses.append(float(np.mean((z - F) ** 2)))

    return BoostedModel(
        base_score=base,
        trees=trees,
        learning_rate=hp.learning_rate,
        target_transform=transform,
        feature_names=names,
        hyperparams=hp,
        fingerprint=fingerprint(X, y),
        train_loss=losses,
    )


def predict(m: BoostedModel, v) -> np.ndarray:
    return m.predict(v)


@dataclass
class MultiTargetModel:
    """One independent single-target ensemble per named output."""

    members: dict[str, BoostedModel]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        names = {m.feature_names for m in self.members.values()}
        if len(names) > 1:
            raise ValueError("bundle members disagree on feature_names")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return next(iter(self.members.values())).feature_names

    def predict(self, X) -> np.ndarray:
        return np.column_stack([m.predict(X) for m in self.members.values()])

    def to_dict(self) -> dict:
        body = {
            "format": BUNDLE_FORMAT,
            "version": VERSION,
            "meta": self.meta,
            "order": list(self.members),
            "members": {k: m.to_dict() for k, m in self.members.items()},
        }
        body["digest"] = _digest(body)
        return body

    @classmethod
    def from_dict(cls, doc: dict) -> "MultiTargetModel":
        if not isinstance(doc, dict) or doc.get("format") != BUNDLE_FORMAT:
            raise ModelFormatError("not a model-bundle document")
        if doc.get("version") != VERSION:
            raise ModelFormatError(f"unsupported bundle version {doc.get('version')!r}")
        body = {k: v for k, v in doc.items() if k != "digest"}
        if doc.get("digest") != _digest(body):
            raise ModelFormatError("bundle digest mismatch: document was modified")
        members = doc.get("members") or {}
        order = doc.get("order", sorted(members))
        if sorted(order) != sorted(members):
            raise ModelFormatError("bundle member order does not match its members")
        return cls({k: BoostedModel.from_dict(members[k]) for k in order}, doc.get("meta", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def save(m: BoostedModel | MultiTargetModel, path=None) -> str:
    text = m.dumps()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def loads_any(text: str) -> BoostedModel | MultiTargetModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not JSON: {exc}") from None
    if isinstance(doc, dict) and doc.get("format") == BUNDLE_FORMAT:
        return MultiTargetModel.from_dict(doc)
    return BoostedModel.from_dict(doc)


def load(path) -> BoostedModel | MultiTargetModel:
    with open(path) as fh:
        return loads_any(fh.read())
