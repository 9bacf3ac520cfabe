"""Online exploration: predict every candidate, keep what fits, build the front.

Both objectives (throughput and energy efficiency) are maximised. Ties are
always broken towards fewer AIEs, then the lexicographically smaller config.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .design_space import (
    RESOURCE_KINDS,
    DeviceModel,
    PaddedWorkload,
    ResourceVector,
    TilingConfig,
    config_array,
    enumerate_configs,
)
from .features import FEATURE_NAMES, FeatureSet, feature_matrix
from .gbdt import BoostedModel, ModelFormatError, MultiTargetModel, load
from .oracle import Oracle
from .resources import counts_to_pct, fits_array

OBJECTIVES = ("throughput", "energy_efficiency")


class NoFeasibleDesign(RuntimeError):
    """Every candidate was filtered out, so there is nothing to select."""


@dataclass(frozen=True)
class PredictedPoint:
    config: TilingConfig
    latency_s: float
    power_w: float
    resources: ResourceVector
    throughput_gflops: float
    energy_eff_gflops_per_w: float
    feasible: bool

    @property
    def n_aie(self) -> int:
        return self.config.n_aie()


class Predictor(Protocol):
    def predict_arrays(self, pw: PaddedWorkload, cfg: np.ndarray, dev: DeviceModel) -> dict[str, np.ndarray]:
        """Return ``latency_s``, ``power_w`` and ``resources_pct`` (relative to ``dev``)."""


@dataclass
class SurrogateSet:
    """Latency, power and resource surrogates trained on one feature set.

    Resource models predict percentages of ``reference_capacities``; they are
    converted to absolute counts and re-expressed against the target device.
    """

    latency: BoostedModel
    power: BoostedModel
    resources: MultiTargetModel
    reference_capacities: tuple[float, ...] = tuple(DeviceModel().capacities.as_tuple())

    def __post_init__(self):
        names = {self.latency.feature_names, self.power.feature_names, self.resources.feature_names}
        if len(names) != 1:
            raise ValueError("latency, power and resource models use different features")
        fs = [f for f in FeatureSet if f.names == next(iter(names))]
        if not fs:
            raise ValueError(f"models use an unknown feature layout {next(iter(names))}")
        self.feature_set = fs[0]
        if tuple(self.resources.members) != RESOURCE_KINDS:
            raise ValueError(f"resource bundle must hold {RESOURCE_KINDS}")

    def predict_arrays(self, pw, cfg, dev):
        X = feature_matrix(pw, cfg)[:, : self.feature_set.width]
        X = np.ascontiguousarray(X)
        pct_ref = np.clip(self.resources.predict(X), 0.0, None)
        counts = pct_ref / 100.0 * np.asarray(self.reference_capacities)
        return {
            "latency_s": self.latency.predict(X),
            "power_w": self.power.predict(X),
            "resources_pct": counts_to_pct(counts, dev),
        }

    @classmethod
    def load_dir(cls, path) -> "SurrogateSet":
        path = Path(path)
        lat, pw_, res = (load(path / f"{name}.json") for name in ("latency", "power", "resources"))
        if not (isinstance(lat, BoostedModel) and isinstance(pw_, BoostedModel)
                and isinstance(res, MultiTargetModel)):
            raise ModelFormatError(f"{path} does not hold latency/power/resources models")
        caps = res.meta.get("reference_capacities")
        return cls(lat, pw_, res, tuple(caps) if caps else tuple(DeviceModel().capacities.as_tuple()))


@dataclass
class OraclePredictor:
    """Uses the synthetic device itself as the model."""

    oracle: Oracle

    def predict_arrays(self, pw, cfg, dev):
        r = self.oracle.measure_array(pw, cfg)
        return {"latency_s": r["latency_s"], "power_w": r["power_w"],
                "resources_pct": counts_to_pct(r["resources_count"], dev)}


@dataclass
class ConstantPredictor:
    """Predicts the same metrics for every config; a floor for comparisons."""

    latency_s: float = 1e-3
    power_w: float = 20.0
    resources_pct: float = 10.0

    def predict_arrays(self, pw, cfg, dev):
        n = len(cfg)
        return {
            "latency_s": np.full(n, self.latency_s),
            "power_w": np.full(n, self.power_w),
            "resources_pct": np.full((n, len(RESOURCE_KINDS)), self.resources_pct),
        }


# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    """Column view of a sweep; ``points()`` materialises PredictedPoints."""

    pw: PaddedWorkload
    configs: np.ndarray
    latency_s: np.ndarray
    power_w: np.ndarray
    resources_pct: np.ndarray
    feasible: np.ndarray

    @property
    def throughput_gflops(self) -> np.ndarray:
        return self.pw.original.flop() / self.latency_s / 1e9

    @property
    def energy_eff(self) -> np.ndarray:
        return self.throughput_gflops / self.power_w

    def point(self, i: int) -> PredictedPoint:
        thr = self.pw.original.flop() / self.latency_s[i] / 1e9
        return PredictedPoint(
            TilingConfig(*map(int, self.configs[i])),
            float(self.latency_s[i]),
            float(self.power_w[i]),
            ResourceVector(*(float(v) for v in self.resources_pct[i]), scale="pct"),
            float(thr),
            float(thr / self.power_w[i]),
            bool(self.feasible[i]),
        )

    def points(self) -> list[PredictedPoint]:
        return [self.point(i) for i in range(len(self.configs))]


def sweep_arrays(pw: PaddedWorkload, dev: DeviceModel, models: Predictor, configs=None) -> SweepResult:
    cfg = config_array(enumerate_configs(pw, dev) if configs is None else configs)
    pred = models.predict_arrays(pw, cfg, dev)
    lat = np.asarray(pred["latency_s"], dtype=np.float64)
    power = np.asarray(pred["power_w"], dtype=np.float64)
    if np.any(lat <= 0) or np.any(power <= 0):
        raise ValueError("predictor returned non-positive latency or power")
    n_aie = cfg[:, 0] * cfg[:, 1] * cfg[:, 2]
    feasible = fits_array(pred["resources_pct"]) & (n_aie <= dev.max_aie)
    return SweepResult(pw, cfg, lat, power, pred["resources_pct"], feasible)


def sweep(pw: PaddedWorkload, dev: DeviceModel, models: Predictor,
          feature_set: FeatureSet | str | None = None) -> list[PredictedPoint]:
    """Predict every enumerated config; infeasible points are kept but flagged."""
    if feature_set is not None and isinstance(models, SurrogateSet):
        if FeatureSet(feature_set) is not models.feature_set:
            raise ValueError(f"models were trained on {models.feature_set.value}, not {FeatureSet(feature_set).value}")
    return sweep_arrays(pw, dev, models).points()


# ---------------------------------------------------------------------------


def _objective_values(points) -> tuple[np.ndarray, np.ndarray]:
    thr = np.array([p.throughput_gflops for p in points], dtype=np.float64)
    eff = np.array([p.energy_eff_gflops_per_w for p in points], dtype=np.float64)
    return thr, eff


def _tiebreak_key(p):
    return (p.config.n_aie(), tuple(p.config))


@dataclass
class ParetoFront:
    """Non-dominated points, throughput rising and energy efficiency falling."""

    points: list
    workload_dims: Optional[tuple[int, int, int]] = None
    objectives: tuple[str, str] = ("throughput_gflops", "energy_eff_gflops_per_w")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def values(self) -> np.ndarray:
        thr, eff = _objective_values(self.points)
        return np.column_stack([thr, eff]) if self.points else np.zeros((0, 2))


def front_indices(thr: np.ndarray, eff: np.ndarray, cfg: np.ndarray) -> np.ndarray:
    """Indices of the non-dominated rows, ordered by rising throughput.

    Rows equal on both objectives collapse to the one with the fewest AIEs,
    then the lexicographically smallest config.
    """
    if len(thr) == 0:
        return np.zeros(0, dtype=np.int64)
    cfg = np.asarray(cfg, dtype=np.int64).reshape(-1, 6)
    n_aie = cfg[:, 0] * cfg[:, 1] * cfg[:, 2]
    keys = [cfg[:, j] for j in range(5, -1, -1)] + [n_aie, -eff, -thr]
    order = np.lexsort(keys)
    e = eff[order]
    prev_best = np.concatenate([[-np.inf], np.maximum.accumulate(e)[:-1]])
    return order[e > prev_best][::-1]


def pareto_front(points: Sequence, workload_dims=None) -> ParetoFront:
    """Maximal subset under (throughput, efficiency), both maximised."""
    points = list(points)
    thr, eff = _objective_values(points)
    cfg = config_array([p.config for p in points]) if points else np.zeros((0, 6), np.int64)
    return ParetoFront([points[i] for i in front_indices(thr, eff, cfg)], workload_dims)


def hypervolume(front: ParetoFront | Sequence, normalizer: Sequence[float], ref=(0.0, 0.0)) -> float:
    """Area dominated by ``front`` above ``ref`` after dividing by ``normalizer``."""
    pts = front.values() if isinstance(front, ParetoFront) else np.asarray(front, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return 0.0
    norm = np.asarray(normalizer, dtype=np.float64)
    if np.any(norm <= 0):
        raise ValueError("normalizer must be positive")
    x = (pts[:, 0] - ref[0]) / norm[0]
    y = (pts[:, 1] - ref[1]) / norm[1]
    keep = (x > 0) & (y > 0)
    x, y = x[keep], y[keep]
    order = np.lexsort((-y, x))
    x, y = x[order], y[order]
    area, y_floor = 0.0, 0.0
    # sweep from the largest x down, adding the strip each point raises
    for xi, yi in zip(x[::-1], y[::-1]):
        if yi > y_floor:
            area += xi * (yi - y_floor)
            y_floor = yi
    return float(area)


def union_normalizer(*fronts: ParetoFront) -> tuple[float, float]:
    vals = [f.values() for f in fronts if len(f)]
    if not vals:
        return (1.0, 1.0)
    allv = np.concatenate(vals)
    return (float(allv[:, 0].max()), float(allv[:, 1].max()))


def select(front: ParetoFront | Sequence, objective: str):
    """Best point for ``objective``; ties go to fewer AIEs, then smaller config."""
    pts = list(front.points if isinstance(front, ParetoFront) else front)
    if not pts:
        raise NoFeasibleDesign("no feasible design")
    objective = normalize_objective(objective)
    attr = "throughput_gflops" if objective == "throughput" else "energy_eff_gflops_per_w"
    best = max(getattr(p, attr) for p in pts)
    return min((p for p in pts if getattr(p, attr) == best), key=_tiebreak_key)


def normalize_objective(objective: str) -> str:
    aliases = {"throughput": "throughput", "energy": "energy_efficiency", "energy_efficiency": "energy_efficiency"}
    if objective not in aliases:
        raise ValueError(f"unknown objective {objective!r}; choose throughput or energy")
    return aliases[objective]


# ---------------------------------------------------------------------------


@dataclass
class ExplorationResult:
    sweep: SweepResult
    front: ParetoFront

    @cached_property
    def points(self) -> list[PredictedPoint]:
        return self.sweep.points()

    def selected(self, objective: str) -> PredictedPoint:
        return select(self.front, objective)


def explore(pw: PaddedWorkload, dev: DeviceModel, models: Predictor) -> ExplorationResult:
    """Sweep, filter by predicted resources and build the predicted front."""
    sw = sweep_arrays(pw, dev, models)
    ok = np.flatnonzero(sw.feasible)
    thr = sw.throughput_gflops
    idx = ok[front_indices(thr[ok], thr[ok] / sw.power_w[ok], sw.configs[ok])]
    return ExplorationResult(sw, ParetoFront([sw.point(i) for i in idx], pw.original.dims))


def oracle_front(pw: PaddedWorkload, oracle: Oracle) -> ParetoFront:
    """Exhaustive zero-noise front over every feasible candidate."""
    zero = oracle.zero_noise()
    configs = enumerate_configs(pw, zero.device)
    meas = zero.measure_many(pw, configs)
    return pareto_front([m for m in meas if m.feasible], pw.original.dims)


@dataclass
class FrontComparison:
    hv_ratio: float
    hv_predicted: float
    hv_oracle: float
    normalizer: tuple[float, float]
    throughput_regret: float  # fractional shortfall of the predicted-best pick
    energy_regret: float
    false_feasible: int  # predicted-feasible front members the oracle rejects
    remeasured_front: ParetoFront = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "hv_ratio": self.hv_ratio,
            "hv_predicted": self.hv_predicted,
            "hv_oracle": self.hv_oracle,
            "normalizer": list(self.normalizer),
            "throughput_regret": self.throughput_regret,
            "energy_regret": self.energy_regret,
            "false_feasible": self.false_feasible,
        }


def compare_fronts(pw: PaddedWorkload, predicted: ParetoFront, reference: ParetoFront, oracle: Oracle) -> FrontComparison:
    """Re-measure the predicted front on the zero-noise oracle and score it
    against the exhaustive front by hypervolume ratio and per-objective regret."""
    dims = pw.original.dims
    for f in (predicted, reference):
        if f.workload_dims is not None and tuple(f.workload_dims) != dims:
            raise ValueError(f"front belongs to workload {f.workload_dims}, not {dims}")
    zero = oracle.zero_noise()
    remeasured = zero.measure_many(pw, [p.config for p in predicted.points]) if len(predicted) else []
    ok = [m for m in remeasured if m.feasible]
    re_front = pareto_front(ok, dims)
    norm = union_normalizer(re_front, reference)
    hv_pred = hypervolume(re_front, norm)
    hv_ref = hypervolume(reference, norm)
    regrets = []
    for objective, attr in (("throughput", "throughput_gflops"), ("energy", "energy_eff_gflops_per_w")):
        if not len(predicted) or not len(reference):
            regrets.append(1.0)
            continue
        pick = select(predicted, objective)
        measured = next(m for m in remeasured if m.config == pick.config)
        best = getattr(select(reference, objective), attr)
        # an oracle-infeasible pick is a total miss
        regrets.append(1.0 - getattr(measured, attr) / best if measured.feasible else 1.0)
    return FrontComparison(
        hv_ratio=hv_pred / hv_ref if hv_ref > 0 else float("nan"),
        hv_predicted=hv_pred,
        hv_oracle=hv_ref,
        normalizer=norm,
        throughput_regret=regrets[0],
        energy_regret=regrets[1],
        false_feasible=len(remeasured) - len(ok),
        remeasured_front=re_front,
    )


def point_record(p, pw: Optional[PaddedWorkload] = None) -> dict:
    """JSON-ready description of a selected design."""
    rec = {
        "config": dict(zip(TilingConfig._fields, map(int, p.config))),
        "n_aie": p.config.n_aie(),
        "latency_s": p.latency_s,
        "power_w": p.power_w,
        "throughput_gflops": p.throughput_gflops,
        "energy_eff_gflops_per_w": p.energy_eff_gflops_per_w,
        "resources_pct": dict(zip(RESOURCE_KINDS, p.resources.as_tuple())),
        "feasible": bool(p.feasible),
    }
    if pw is not None:
        row = feature_matrix(pw, config_array([p.config]))[0]
        rec["features"] = dict(zip(FEATURE_NAMES, row.tolist()))
    return rec
