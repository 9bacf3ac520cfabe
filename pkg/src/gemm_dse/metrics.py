"""Error statistics used by training, baselines and reports."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from typing import Hashable, Sequence

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    mape_pct: float
    mae: float
    r2: float
    pearson_r: float
    n: int
    group: Hashable = "all"


def _pair(y_true, y_pred, min_len: int = 1):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    if len(y_true) < min_len:
        raise ValueError(f"need at least {min_len} values")
    return y_true, y_pred


def mape(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    if np.any(y_true == 0):
        raise ValueError("MAPE is undefined when y_true contains zeros")
    return float(100.0 * np.mean(np.abs(y_pred - y_true) / np.abs(y_true)))


def mae(y_true, y_pred) -> float:
    y_true, y_pred = _pair(y_true, y_pred)
    return float(np.mean(np.abs(y_pred - y_true)))


def r2(y_true, y_pred) -> float:
    """Coefficient of determination; 0 when ``y_true`` is constant."""
    y_true, y_pred = _pair(y_true, y_pred, min_len=2)
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0.0:
        return 0.0
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / sst


def pearson(x, y) -> float:
    x, y = _pair(x, y, min_len=2)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = float(np.sqrt(np.sum(dx * dx))), float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson correlation needs non-constant inputs")
    return float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))


def evaluate(y_true, y_pred, group: Hashable = "all") -> EvalReport:
    y_true, y_pred = _pair(y_true, y_pred)
    if len(y_true) >= 2:
        r2_val = r2(y_true, y_pred)
        try:
            r = pearson(y_true, y_pred)
        except ValueError:
            r = float("nan")
    else:
        r2_val, r = float("nan"), float("nan")
    return EvalReport(mape(y_true, y_pred), mae(y_true, y_pred), r2_val, r, len(y_true), group)


@dataclass(frozen=True)
class GroupedEval:
    groups: list[EvalReport]
    median_mape_pct: float
    median_r2: float


def grouped_eval(y_true, y_pred, group_by: Sequence[Hashable]) -> GroupedEval:
    """Per-group metrics plus the median over groups."""
    y_true, y_pred = _pair(y_true, y_pred)
    keys = np.asarray(group_by, dtype=object)
    if len(keys) != len(y_true):
        raise ValueError("group_by must have one key per sample")
    reports = []
    for key in dict.fromkeys(keys.tolist()):
        mask = keys == key
        reports.append(evaluate(y_true[mask], y_pred[mask], group=key))
    r2s = [r.r2 for r in reports if not np.isnan(r.r2)]
    return GroupedEval(
        groups=reports,
        median_mape_pct=float(np.median([r.mape_pct for r in reports])),
        median_r2=float(np.median(r2s)) if r2s else float("nan"),
    )


def reports_to_csv(reports: Sequence[EvalReport], extra: dict | None = None) -> str:
    buf = io.StringIO()
    cols = list(extra or {}) + ["group", "n", "mape_pct", "mae", "r2", "pearson_r"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rep in reports:
        d = asdict(rep)
        w.writerow([*(extra or {}).values()] + [d["group"], d["n"]] + [f"{d[k]:.6g}" for k in cols[-4:]])
    return buf.getvalue()


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in header]] + [
        [f"{v:.4f}" if isinstance(v, float) else str(v) for v in row] for row in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
