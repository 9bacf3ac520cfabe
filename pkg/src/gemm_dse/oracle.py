"""Synthetic ground-truth device used in place of on-board measurement.

Latency follows the analytical compute/DDR roofline, except that DDR streams
lose efficiency on short contiguous bursts (one burst is one super-tile row)
and AIE compute pays an output-tile drain after every K accumulation chain.
The roofline maximum is stretched by an imperfect-overlap term, fixed launch
and per-super-tile synchronisation overheads are added, and the result is
perturbed by a lognormal factor. Power is whole-board: idle plus a
piecewise-linear AIE term plus a DDR-traffic term plus Gaussian noise.
Resources come from :mod:`gemm_dse.resources` and are noise-free.

All noise is derived from a hash of ``(seed, M, N, K, config)``, so measuring
the same design twice gives the same reading.
"""

from __future__ import annotations

import hashlib
import io
from collections import Counter
from pathlib import Path
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analytical import SampleSpec, analytical_arrays, rank_and_sample
from .design_space import (
    CONFIG_FIELDS,
    RESOURCE_KINDS,
    DeviceModel,
    GemmWorkload,
    PaddedWorkload,
    PowerCurveParams,
    ResourceVector,
    TilingConfig,
    config_array,
    enumerate_configs,
    pad_workload,
)
from .resources import (
    DEFAULT_RESOURCE_PARAMS,
    ResourceModelParams,
    counts_to_pct,
    fits_array,
    resource_counts_array,
)

DATASET_COLUMNS = (
    "label", "M", "N", "K", "P_M", "P_N", "P_K", "B_M", "B_N", "B_K",
    "latency_ms", "power_w", "bram_pct", "uram_pct", "lut_pct", "ff_pct", "dsp_pct",
)  # fmt: skip


@dataclass(frozen=True)
class LatencyParams:
    sigma: float = 0.05  # lognormal perturbation
    overlap_inflation: float = 0.15  # at compute_s == ddr_s
    overlap_width: float = 0.5  # in units of |ln(ddr_s / compute_s)|
    launch_overhead_s: float = 20e-6
    step_overhead_s: float = 0.5e-6  # per PL super-tile step
    burst_overhead_bytes: float = 128.0  # DDR efficiency = burst / (burst + this)
    drain_fraction: float = 0.2  # output-tile flush per K chain, in tile-compute units


@dataclass(frozen=True)
class DesignPoint:
    workload: GemmWorkload
    config: TilingConfig
    latency_s: float
    power_w: float
    resources: ResourceVector
    feasible: bool = True

    @property
    def throughput_gflops(self) -> float:
        return self.workload.flop() / self.latency_s / 1e9

    @property
    def energy_eff_gflops_per_w(self) -> float:
        return self.throughput_gflops / self.power_w

    @property
    def n_aie(self) -> int:
        return self.config.n_aie()


# ---------------------------------------------------------------------------
# hashing noise

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _hash_keys(seed: int, dims: tuple[int, int, int], cfg: np.ndarray, stream: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = _splitmix(np.full(len(cfg), np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
        for v in (*dims, stream):
            h = _splitmix(h ^ np.uint64(v))
        for col in cfg.T:
            h = _splitmix(h ^ col.astype(np.uint64))
    return h


def _uniform(h: np.ndarray) -> np.ndarray:
    # (0, 1), never exactly 0
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def hashed_normal(seed: int, dims, cfg: np.ndarray, stream: int) -> np.ndarray:
    u1 = _uniform(_hash_keys(seed, dims, cfg, 2 * stream))
    u2 = _uniform(_hash_keys(seed, dims, cfg, 2 * stream + 1))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


# ---------------------------------------------------------------------------


def aie_power_w(n_aie, curve: PowerCurveParams) -> np.ndarray:
    """Board power from idle plus the AIE term, without DDR or noise."""
    n = np.asarray(n_aie, dtype=np.float64)
    lo = curve.p_aie_lo_w * (np.minimum(n, curve.knee_aie) - 1.0) / (curve.knee_aie - 1.0)
    hi = curve.p_aie_hi_slope_w_per_aie * np.maximum(n - curve.knee_aie, 0.0)
    return curve.p_idle_w + lo + hi


@dataclass(frozen=True)
class Oracle:
    device: DeviceModel = field(default_factory=DeviceModel)
    seed: int = 0
    noise: bool = True
    latency: LatencyParams = field(default_factory=LatencyParams)
    resource_params: ResourceModelParams = DEFAULT_RESOURCE_PARAMS
    curve: Optional[PowerCurveParams] = None

    @property
    def power_curve(self) -> PowerCurveParams:
        return self.curve or self.device.power_curve

    def zero_noise(self) -> "Oracle":
        return Oracle(self.device, self.seed, False, self.latency, self.resource_params, self.curve)

    def inflated_latency(self, pw: PaddedWorkload, cfg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Noise-free latency and DDR bytes for each config row."""
        lp = self.latency
        dev = self.device
        an = analytical_arrays(pw, cfg, dev)
        pm, pn, pk, bm, bn, bk = cfg.T
        T, e = pw.tile_dim, pw.element_bytes
        # contiguous bytes per row of the A (k-wide), B and C (n-wide) super-tiles
        bursts = (e * T * bk * pk, e * T * bn * pn, e * T * bn * pn)
        ddr_s = sum(
            nbytes * (1.0 + lp.burst_overhead_bytes / burst)
            for nbytes, burst in zip(an["traffic_bytes"], bursts)
        ) / dev.ddr_bandwidth_Bps
        # each AIE flushes its output tile after a chain of B_K accumulations
        compute_s = an["compute_s"] * (1.0 + lp.drain_fraction / bk)
        x = np.log(ddr_s / compute_s) / lp.overlap_width
        overlap = 1.0 + lp.overlap_inflation / (1.0 + x * x)
        t_m, t_n, t_k = pw.tiles
        steps = (t_m // (pm * bm)) * (t_n // (pn * bn)) * (t_k // (pk * bk))
        lat = np.maximum(compute_s, ddr_s) * overlap + lp.launch_overhead_s + steps * lp.step_overhead_s
        return lat, an["ddr_bytes"]

    def measure_array(self, pw: PaddedWorkload, cfg) -> dict[str, np.ndarray]:
        cfg = np.asarray(cfg, dtype=np.int64).reshape(-1, 6)
        curve = self.power_curve
        lat, ddr_bytes = self.inflated_latency(pw, cfg)
        dims = pw.original.dims
        if self.noise and self.latency.sigma > 0:
            lat = lat * np.exp(self.latency.sigma * hashed_normal(self.seed, dims, cfg, 0))
        n_aie = cfg[:, 0] * cfg[:, 1] * cfg[:, 2]
        power = aie_power_w(n_aie, curve) + curve.p_ddr_w_per_GBps * ddr_bytes / lat / 1e9
        if self.noise and curve.noise_sigma_w > 0:
            power = power + curve.noise_sigma_w * hashed_normal(self.seed, dims, cfg, 1)
            power = np.maximum(power, curve.p_idle_w)
        counts = resource_counts_array(pw, cfg, self.resource_params)
        pct = counts_to_pct(counts, self.device)
        feasible = fits_array(pct) & (n_aie <= self.device.max_aie)
        return {"latency_s": lat, "power_w": power, "resources_pct": pct, "resources_count": counts,
                "feasible": feasible}

    def measure(self, pw: PaddedWorkload, c: TilingConfig) -> DesignPoint:
        r = self.measure_array(pw, config_array([c]))
        return DesignPoint(
            workload=pw.original,
            config=TilingConfig(*c),
            latency_s=float(r["latency_s"][0]),
            power_w=float(r["power_w"][0]),
            resources=ResourceVector(*r["resources_pct"][0].tolist(), scale="pct"),
            feasible=bool(r["feasible"][0]),
        )

    def measure_many(self, pw: PaddedWorkload, configs: Sequence[TilingConfig]) -> list[DesignPoint]:
        r = self.measure_array(pw, config_array(configs))
        return [
            DesignPoint(
                pw.original, TilingConfig(*c), float(lat), float(pw_), ResourceVector(*res.tolist(), scale="pct"), bool(ok)
            )
            for c, lat, pw_, res, ok in zip(
                configs, r["latency_s"], r["power_w"], r["resources_pct"], r["feasible"]
            )
        ]


def measure(pw: PaddedWorkload, c: TilingConfig, dev: DeviceModel, curve: PowerCurveParams | None = None,
            seed: int = 0, noise: bool = True) -> DesignPoint:
    return Oracle(dev, seed, noise, curve=curve).measure(pw, c)


# ---------------------------------------------------------------------------
# datasets


@dataclass
class MeasurementDataset:
    """Measured rows as column arrays (one row per workload/config pair)."""

    labels: np.ndarray  # object array of str
    dims: np.ndarray  # (n, 3) int64 original M, N, K
    configs: np.ndarray  # (n, 6) int64
    latency_s: np.ndarray
    power_w: np.ndarray
    resources_pct: np.ndarray  # (n, 5)
    element_bytes: int = 4

    def __len__(self) -> int:
        return len(self.labels)

    def workloads(self) -> list[GemmWorkload]:
        seen: dict[str, GemmWorkload] = {}
        for lab, d in zip(self.labels, self.dims):
            if lab not in seen:
                seen[lab] = GemmWorkload(*map(int, d), element_bytes=self.element_bytes, label=str(lab))
        return list(seen.values())

    def coverage(self) -> dict[str, dict[str, int]]:
        out = {}
        n_aie = self.configs[:, 0] * self.configs[:, 1] * self.configs[:, 2]
        for lab in dict.fromkeys(self.labels.tolist()):
            mask = self.labels == lab
            out[lab] = {"rows": int(mask.sum()), "distinct_n_aie": int(len(np.unique(n_aie[mask])))}
        return out

    def subset(self, mask: np.ndarray) -> "MeasurementDataset":
        return MeasurementDataset(
            self.labels[mask], self.dims[mask], self.configs[mask], self.latency_s[mask],
            self.power_w[mask], self.resources_pct[mask], self.element_bytes,
        )  # fmt: skip

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(DATASET_COLUMNS) + "\n")
        for i in range(len(self)):
            lab = str(self.labels[i])
            if "," in lab or "\n" in lab:
                raise ValueError(f"label {lab!r} cannot be written to CSV")
            ints = ",".join(str(int(v)) for v in (*self.dims[i], *self.configs[i]))
            floats = ",".join(
                [f"{self.latency_s[i] * 1e3:.10g}", f"{self.power_w[i]:.10g}"]
                + [f"{v:.10g}" for v in self.resources_pct[i]]
            )
            buf.write(f"{lab},{ints},{floats}\n")
        return buf.getvalue()

    def write_csv(self, path) -> str:
        text = self.to_csv_text()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return hashlib.sha256(text.encode()).hexdigest()

    @classmethod
    def read_csv(cls, path, element_bytes: int = 4) -> "MeasurementDataset":
        with open(path, newline="") as fh:
            return cls.from_csv_text(fh.read(), element_bytes)

    @classmethod
    def from_csv_text(cls, text: str, element_bytes: int = 4) -> "MeasurementDataset":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty dataset file")
        header = [h.strip() for h in lines[0].split(",")]
        if tuple(header) != DATASET_COLUMNS:
            bad = [h for h in header if h not in DATASET_COLUMNS]
            missing = [h for h in DATASET_COLUMNS if h not in header]
            raise ValueError(f"bad dataset header: unexpected {bad}, missing {missing}")
        rows = [ln.split(",") for ln in lines[1:]]
        for n, r in enumerate(rows, start=2):
            if len(r) != len(DATASET_COLUMNS):
                raise ValueError(f"line {n}: expected {len(DATASET_COLUMNS)} fields, got {len(r)}")
        labels = np.array([r[0] for r in rows], dtype=object)
        ints = np.array([[int(v) for v in r[1:10]] for r in rows], dtype=np.int64).reshape(-1, 9)
        floats = np.array([[float(v) for v in r[10:]] for r in rows], dtype=np.float64).reshape(-1, 7)
        return cls(
            labels=labels,
            dims=ints[:, :3],
            configs=ints[:, 3:],
            latency_s=floats[:, 0] / 1e3,
            power_w=floats[:, 1],
            resources_pct=floats[:, 2:],
            element_bytes=element_bytes,
        )


def gen_dataset(
    workloads: Sequence[GemmWorkload],
    dev: DeviceModel,
    curve: PowerCurveParams | None = None,
    sample_spec: SampleSpec = SampleSpec(),
    seed: int = 0,
    latency: LatencyParams = LatencyParams(),
) -> MeasurementDataset:
    """Enumerate, sample by the analytical model and measure every workload."""
    if not workloads:
        raise ValueError("at least one workload is required")
    labels = [w.name for w in workloads]
    dupes = [lab for lab, n in Counter(labels).items() if n > 1]
    if dupes:
        raise ValueError(f"duplicate workload labels: {dupes}")
    oracle = Oracle(dev, seed, True, latency, curve=curve)
    parts = []
    for idx, w in enumerate(workloads):
        pw = pad_workload(w, dev.tile_dim)
        configs = enumerate_configs(pw, dev)
        # per-workload stream so adding a workload does not reshuffle the others
        rng = np.random.default_rng([seed, idx])
        sample = rank_and_sample(pw, configs, dev, sample_spec, rng)
        cfg = config_array(sample)
        r = oracle.measure_array(pw, cfg)
        parts.append((w, cfg, r))
    parts.sort(key=lambda p: p[0].name)
    return MeasurementDataset(
        labels=np.array([w.name for w, cfg, _ in parts for _ in range(len(cfg))], dtype=object),
        dims=np.array([w.dims for w, cfg, _ in parts for _ in range(len(cfg))], dtype=np.int64).reshape(-1, 3),
        configs=np.concatenate([cfg for _, cfg, _ in parts]),
        latency_s=np.concatenate([r["latency_s"] for *_, r in parts]),
        power_w=np.concatenate([r["power_w"] for *_, r in parts]),
        resources_pct=np.concatenate([r["resources_pct"] for *_, r in parts]),
        element_bytes=workloads[0].element_bytes,
    )


__all__ = [
    "DATASET_COLUMNS",
    "CONFIG_FIELDS",
    "RESOURCE_KINDS",
    "LatencyParams",
    "DesignPoint",
    "Oracle",
    "aie_power_w",
    "hashed_normal",
    "measure",
    "MeasurementDataset",
    "gen_dataset",
]
