"""Workloads, tiling configurations, device description and candidate enumeration.

A GEMM ``C = A @ B`` (A is MxK, B is KxN) is cut into fixed ``T x T x T`` tiles.
Each tiling configuration carries two factors per dimension:

* ``P_d``: how many AIEs the tile grid is spread over along ``d``.
* ``B_d``: how many AIE-tiles worth of data a PL reuse buffer holds along ``d``.

Candidates must partition the padded tile grid evenly: ``P_d | t_d`` and
``B_d | t_d / P_d``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

DIMS = ("M", "N", "K")
CONFIG_FIELDS = ("P_M", "P_N", "P_K", "B_M", "B_N", "B_K")
RESOURCE_KINDS = ("bram", "uram", "lut", "ff", "dsp")


class ConfigError(ValueError):
    """Raised when a tiling configuration is not valid for a workload."""


@dataclass(frozen=True)
class GemmWorkload:
    M: int
    N: int
    K: int
    element_bytes: int = 4
    label: Optional[str] = None

    def __post_init__(self):
        for name in ("M", "N", "K", "element_bytes"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
            object.__setattr__(self, name, int(value))

    def flop(self) -> int:
        return 2 * self.M * self.N * self.K

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.M, self.N, self.K)

    @property
    def name(self) -> str:
        return self.label or f"{self.M}x{self.N}x{self.K}"


@dataclass(frozen=True)
class PaddedWorkload:
    original: GemmWorkload
    M: int
    N: int
    K: int
    t_M: int
    t_N: int
    t_K: int
    tile_dim: int

    @property
    def tiles(self) -> tuple[int, int, int]:
        return (self.t_M, self.t_N, self.t_K)

    @property
    def padded_dims(self) -> tuple[int, int, int]:
        return (self.M, self.N, self.K)

    @property
    def element_bytes(self) -> int:
        return self.original.element_bytes

    @property
    def name(self) -> str:
        return self.original.name


class TilingConfig(NamedTuple):
    P_M: int
    P_N: int
    P_K: int
    B_M: int
    B_N: int
    B_K: int

    @property
    def P(self) -> tuple[int, int, int]:
        return (self.P_M, self.P_N, self.P_K)

    @property
    def B(self) -> tuple[int, int, int]:
        return (self.B_M, self.B_N, self.B_K)

    def n_aie(self) -> int:
        return self.P_M * self.P_N * self.P_K


@dataclass(frozen=True)
class ResourceVector:
    """PL resource usage, either as percentages of a device or absolute counts."""

    bram: float
    uram: float
    lut: float
    ff: float
    dsp: float
    scale: str = "pct"  # "pct" or "count"

    def __post_init__(self):
        if self.scale not in ("pct", "count"):
            raise ValueError(f"unknown resource scale {self.scale!r}")
        for kind in RESOURCE_KINDS:
            if getattr(self, kind) < 0:
                raise ValueError(f"{kind} must be >= 0")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in RESOURCE_KINDS)

    def fits(self) -> bool:
        if self.scale != "pct":
            raise ValueError("fits() needs percentage-scaled resources")
        return all(v <= 100.0 for v in self.as_tuple())


@dataclass(frozen=True)
class PowerCurveParams:
    """Whole-board power curve of the synthetic device.

    The AIE term is piecewise linear in the number of allocated AIEs: it adds
    ``p_aie_lo_w`` spread evenly between 1 and ``knee_aie`` AIEs, then
    ``p_aie_hi_slope_w_per_aie`` per extra AIE.
    """

    p_idle_w: float = 12.0
    p_aie_lo_w: float = 6.0
    knee_aie: int = 32
    p_aie_hi_slope_w_per_aie: float = 20.0 / 368.0
    p_ddr_w_per_GBps: float = 0.4
    noise_sigma_w: float = 0.5

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")
        if self.knee_aie < 2:
            raise ValueError("knee_aie must be >= 2")


DEFAULT_CAPACITIES = ResourceVector(
    bram=963, uram=463, lut=900e3, ff=1.8e6, dsp=1.9e3, scale="count"
)


@dataclass(frozen=True)
class DeviceModel:
    """VCK190-like device defaults."""

    max_aie: int = 400
    aie_clock_hz: float = 1.25e9
    pl_clock_hz: float = 230e6
    tile_dim: int = 32
    peak_gflops: float = 8000.0
    ddr_bandwidth_Bps: float = 25.6e9
    kernel_efficiency: float = 0.90
    capacities: ResourceVector = DEFAULT_CAPACITIES
    power_curve: PowerCurveParams = field(default_factory=PowerCurveParams)
    name: str = "vck190"

    def __post_init__(self):
        if self.max_aie < 1 or self.tile_dim < 1:
            raise ValueError("max_aie and tile_dim must be >= 1")
        if not 0 < self.kernel_efficiency <= 1:
            raise ValueError("kernel_efficiency must be in (0, 1]")
        for name in ("aie_clock_hz", "pl_clock_hz", "peak_gflops", "ddr_bandwidth_Bps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.capacities.scale != "count":
            raise ValueError("device capacities must be absolute counts")

    @property
    def flop_per_cycle_per_aie(self) -> float:
        return self.peak_gflops / self.max_aie / (self.aie_clock_hz / 1e9)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "DeviceModel":
        doc = dict(doc)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown device fields: {sorted(unknown)}")
        if "capacities" in doc:
            caps = dict(doc["capacities"])
            caps.setdefault("scale", "count")
            doc["capacities"] = ResourceVector(**caps)
        if "power_curve" in doc:
            doc["power_curve"] = PowerCurveParams(**doc["power_curve"])
        return cls(**doc)


def pad_workload(g: GemmWorkload, tile_dim: int = 32) -> PaddedWorkload:
    if tile_dim < 1:
        raise ValueError("tile_dim must be >= 1")
    tiles = [-(-d // tile_dim) for d in g.dims]
    padded = [t * tile_dim for t in tiles]
    return PaddedWorkload(g, *padded, *tiles, tile_dim=tile_dim)


@lru_cache(maxsize=None)
def divisors(n: int) -> tuple[int, ...]:
    small, large = [], []
    for i in range(1, math.isqrt(n) + 1):
        if n % i == 0:
            small.append(i)
            if i != n // i:
                large.append(n // i)
    return tuple(small + large[::-1])


def enumerate_configs(pw: PaddedWorkload, dev: DeviceModel) -> list[TilingConfig]:
    """All evenly-partitioning configs within the AIE cap, in lexicographic order."""
    out = []
    for p_m in divisors(pw.t_M):
        for p_n in divisors(pw.t_N):
            if p_m * p_n > dev.max_aie:
                break
            for p_k in divisors(pw.t_K):
                if p_m * p_n * p_k > dev.max_aie:
                    break
                for b_m in divisors(pw.t_M // p_m):
                    for b_n in divisors(pw.t_N // p_n):
                        for b_k in divisors(pw.t_K // p_k):
                            out.append(TilingConfig(p_m, p_n, p_k, b_m, b_n, b_k))
    return out


def config_array(configs) -> np.ndarray:
    """Stack configs into an ``(n, 6)`` int64 array (column order = CONFIG_FIELDS)."""
    arr = np.asarray(list(configs), dtype=np.int64)
    return arr.reshape(-1, 6)


def aie_count(c: TilingConfig) -> int:
    return c.P_M * c.P_N * c.P_K


@dataclass(frozen=True)
class BufferFootprint:
    a_bytes: int
    b_bytes: int
    c_bytes: int

    @property
    def total(self) -> int:
        # A and B are ping-pong buffered; C is accumulated in place.
        return 2 * self.a_bytes + 2 * self.b_bytes + self.c_bytes


def buffer_footprint(pw: PaddedWorkload, c: TilingConfig, dev: DeviceModel) -> BufferFootprint:
    T = pw.tile_dim
    e = pw.element_bytes
    m_s = c.B_M * c.P_M * T
    n_s = c.B_N * c.P_N * T
    k_s = c.B_K * c.P_K * T
    return BufferFootprint(a_bytes=e * m_s * k_s, b_bytes=e * k_s * n_s, c_bytes=e * m_s * n_s)


def validate_config(pw: PaddedWorkload, c: TilingConfig, dev: DeviceModel) -> list[str]:
    """Return the names of violated constraints; an empty list means valid."""
    violations = []
    for d, t, p, b in zip(DIMS, pw.tiles, c.P, c.B):
        if p < 1 or b < 1:
            violations.append(f"P_{d} and B_{d} must be >= 1")
            continue
        if t % p:
            violations.append(f"P_{d} does not divide t_{d}")
        elif (t // p) % b:
            violations.append(f"B_{d} does not divide t_{d}/P_{d}")
    if c.n_aie() > dev.max_aie:
        violations.append("AIE cap exceeded")
    return violations


def check_config(pw: PaddedWorkload, c: TilingConfig, dev: Optional[DeviceModel] = None) -> None:
    violations = validate_config(pw, c, dev or DeviceModel(max_aie=10**9))
    if violations:
        raise ConfigError(f"invalid config {tuple(c)} for {pw.name}: " + "; ".join(violations))
