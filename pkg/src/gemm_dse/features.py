"""Model inputs for a (workload, tiling config) pair.

Set-I holds the raw problem and tiling parameters. Set-II adds the AIE count,
the per-AIE FLOP load ``rho`` and tile-count-to-factor ratios::

    R_P_d = t_d / P_d          R_B_d = t_d / (P_d * B_d)
"""

from __future__ import annotations

import csv
from enum import Enum
from typing import NamedTuple

import numpy as np

from .design_space import PaddedWorkload, TilingConfig, check_config, config_array

SET1_NAMES = ("M", "N", "K", "P_M", "P_N", "P_K", "B_M", "B_N", "B_K")
SET2_NAMES = ("N_AIE", "rho", "R_P_M", "R_P_N", "R_P_K", "R_B_M", "R_B_N", "R_B_K")
FEATURE_NAMES = SET1_NAMES + SET2_NAMES


class FeatureSet(str, Enum):
    SET1 = "set1"
    SET12 = "set12"

    @property
    def names(self) -> tuple[str, ...]:
        return SET1_NAMES if self is FeatureSet.SET1 else FEATURE_NAMES

    @property
    def width(self) -> int:
        return len(self.names)


class FeatureVector(NamedTuple):
    M: float
    N: float
    K: float
    P_M: float
    P_N: float
    P_K: float
    B_M: float
    B_N: float
    B_K: float
    N_AIE: float
    rho: float
    R_P_M: float
    R_P_N: float
    R_P_K: float
    R_B_M: float
    R_B_N: float
    R_B_K: float


def feature_matrix(pw: PaddedWorkload, cfg) -> np.ndarray:
    """Vectorised :func:`extract` over an ``(n, 6)`` config array; returns ``(n, 17)``.

    Configs are assumed valid for ``pw``.
    """
    cfg = np.asarray(cfg, dtype=np.int64).reshape(-1, 6)
    c = cfg.astype(np.float64)
    n = len(cfg)
    tiles = np.array(pw.tiles, dtype=np.float64)
    dims = np.broadcast_to(np.array(pw.original.dims, dtype=np.float64), (n, 3))
    n_aie = c[:, 0] * c[:, 1] * c[:, 2]
    rho = float(pw.original.flop()) / n_aie
    r_p = tiles / c[:, :3]
    r_b = tiles / (c[:, :3] * c[:, 3:])
    return np.column_stack([dims, c, n_aie, rho, r_p, r_b])


def extract(pw: PaddedWorkload, c: TilingConfig) -> FeatureVector:
    check_config(pw, c)
    return FeatureVector(*feature_matrix(pw, config_array([c]))[0].tolist())


def feature_subset(v, which: FeatureSet | str):
    """Project a feature vector (or an ``(n, 17)`` matrix) onto a feature set."""
    which = FeatureSet(which)
    if isinstance(v, np.ndarray):
        return v[..., : which.width]
    return tuple(v)[: which.width]


def write_feature_csv(path, X: np.ndarray, names=FEATURE_NAMES) -> None:
    if X.shape[1] != len(names):
        raise ValueError(f"matrix has {X.shape[1]} columns, expected {len(names)}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in X:
            w.writerow([f"{v:.17g}" for v in row])
