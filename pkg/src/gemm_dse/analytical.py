"""Closed-form latency/traffic baseline and analytical-model-guided sampling."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .design_space import DeviceModel, PaddedWorkload, TilingConfig, config_array
from .resources import counts_to_pct, fits_array, resource_counts_array


class Bound(str, Enum):
    COMPUTE = "compute"
    MEMORY = "memory"


@dataclass(frozen=True)
class AnalyticalEstimate:
    compute_s: float
    ddr_s: float
    latency_s: float
    ddr_bytes: float
    bound: Bound


def tile_cycles(dev: DeviceModel) -> float:
    """Effective AIE cycles per ``T^3`` tile multiply."""
    T = dev.tile_dim
    return 2.0 * T**3 / (dev.flop_per_cycle_per_aie * dev.kernel_efficiency)


def analytical_arrays(pw: PaddedWorkload, cfg: np.ndarray, dev: DeviceModel) -> dict[str, np.ndarray]:
    """Vectorised analytical model over an ``(n, 6)`` config array."""
    cfg = np.asarray(cfg, dtype=np.int64).reshape(-1, 6)
    pm, pn, pk, bm, bn, bk = cfg.T.astype(np.float64)
    t_m, t_n, t_k = (float(t) for t in pw.tiles)
    m_p, n_p, k_p = (float(d) for d in pw.padded_dims)
    n_aie = pm * pn * pk
    compute_s = (t_m * t_n * t_k / n_aie) * tile_cycles(dev) / dev.aie_clock_hz
    # A is re-read once per N super-column, B once per M super-row, C written once.
    a_bytes = pw.element_bytes * m_p * k_p * (t_n / (pn * bn))
    b_bytes = pw.element_bytes * k_p * n_p * (t_m / (pm * bm))
    c_bytes = np.full_like(a_bytes, pw.element_bytes * m_p * n_p)
    ddr_bytes = a_bytes + b_bytes + c_bytes
    ddr_s = ddr_bytes / dev.ddr_bandwidth_Bps
    latency_s = np.maximum(compute_s, ddr_s)
    return {
        "compute_s": compute_s,
        "ddr_s": ddr_s,
        "ddr_bytes": ddr_bytes,
        "traffic_bytes": (a_bytes, b_bytes, c_bytes),
        "latency_s": latency_s,
        "memory_bound": ddr_s > compute_s,
    }


def analytical_latency(pw: PaddedWorkload, c: TilingConfig, dev: DeviceModel) -> AnalyticalEstimate:
    r = analytical_arrays(pw, config_array([c]), dev)
    return AnalyticalEstimate(
        compute_s=float(r["compute_s"][0]),
        ddr_s=float(r["ddr_s"][0]),
        latency_s=float(r["latency_s"][0]),
        ddr_bytes=float(r["ddr_bytes"][0]),
        bound=Bound.MEMORY if r["memory_bound"][0] else Bound.COMPUTE,
    )


def analytical_throughput_gflops(pw: PaddedWorkload, cfg: np.ndarray, dev: DeviceModel) -> np.ndarray:
    return pw.original.flop() / analytical_arrays(pw, cfg, dev)["latency_s"] / 1e9


@dataclass(frozen=True)
class SampleSpec:
    k_top: int = 40
    k_bottom: int = 40
    k_random: int = 250
    relaxation: float = 1.2

    def __post_init__(self):
        if min(self.k_top, self.k_bottom, self.k_random) < 0:
            raise ValueError("sample counts must be >= 0")
        if self.relaxation < 1:
            raise ValueError("relaxation factor must be >= 1")

    @property
    def budget(self) -> int:
        return self.k_top + self.k_bottom + self.k_random


def rank_and_sample(
    pw: PaddedWorkload,
    configs: list[TilingConfig],
    dev: DeviceModel,
    spec: SampleSpec,
    seed: int | np.random.Generator,
) -> list[TilingConfig]:
    """Pick best, worst and stratified-random configs by analytical throughput.

    Configs whose resources exceed ``capacity * spec.relaxation`` are dropped
    first. Random picks first cover every AIE count not already present, then
    fill the remaining budget uniformly. The result keeps the input order.
    """
    if not configs:
        raise ValueError("configs must be non-empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cfg = config_array(configs)
    pct = counts_to_pct(resource_counts_array(pw, cfg), dev)
    pool = np.flatnonzero(fits_array(pct, spec.relaxation))
    if spec.budget >= len(pool):
        return [configs[i] for i in pool]

    thr = analytical_throughput_gflops(pw, cfg[pool], dev)
    # stable sort: equal throughput keeps enumeration order
    order = pool[np.argsort(-thr, kind="stable")]
    chosen = np.zeros(len(configs), dtype=bool)
    chosen[order[: spec.k_top]] = True
    if spec.k_bottom:
        chosen[order[-spec.k_bottom :]] = True

    n_aie = cfg[:, 0] * cfg[:, 1] * cfg[:, 2]
    slots = spec.budget - int(chosen.sum())
    in_pool = np.zeros(len(configs), dtype=bool)
    in_pool[pool] = True
    strata = np.setdiff1d(np.unique(n_aie[pool]), np.unique(n_aie[chosen]))
    strata = strata[rng.permutation(len(strata))]
    for n in strata[: max(slots, 0)]:
        members = np.flatnonzero(in_pool & ~chosen & (n_aie == n))
        chosen[members[rng.integers(len(members))]] = True
        slots -= 1
    if slots > 0:
        rest = np.flatnonzero(in_pool & ~chosen)
        chosen[rng.choice(rest, size=min(slots, len(rest)), replace=False)] = True
    return [configs[i] for i in np.flatnonzero(chosen)]
