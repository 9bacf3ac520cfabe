"""PL resource usage of a tiling configuration.

Each PL reuse buffer (A, B, C) is placed whole in URAM when it is larger than
``uram_threshold_bytes`` and in BRAM otherwise; block usage is proportional to
its bytes (A and B are double-buffered). Logic (LUT/FF/DSP) is affine in the
stream channel count ``P_M*P_K + P_K*P_N + P_M*P_N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design_space import (
    RESOURCE_KINDS,
    DeviceModel,
    PaddedWorkload,
    ResourceVector,
    TilingConfig,
    config_array,
)


@dataclass(frozen=True)
class ResourceModelParams:
    bram_block_bytes: int = 4608  # 36 Kb
    uram_block_bytes: int = 36864  # 288 Kb
    uram_threshold_bytes: int = 32 * 1024
    shell_bram: float = 23.0
    shell_uram: float = 6.0
    shell_lut: float = 9000.0
    shell_ff: float = 21600.0
    shell_dsp: float = 8.0
    lut_per_channel: float = 990.0
    ff_per_channel: float = 2160.0
    dsp_per_channel: float = 1.9


DEFAULT_RESOURCE_PARAMS = ResourceModelParams()


def resource_counts_array(
    pw: PaddedWorkload, cfg: np.ndarray, rp: ResourceModelParams = DEFAULT_RESOURCE_PARAMS
) -> np.ndarray:
    """Absolute resource counts, shape ``(n, 5)`` in RESOURCE_KINDS order."""
    cfg = np.asarray(cfg, dtype=np.int64).reshape(-1, 6)
    pm, pn, pk, bm, bn, bk = cfg.T
    tile_bytes = pw.element_bytes * pw.tile_dim * pw.tile_dim
    sizes = (
        tile_bytes * (pm * pk) * (bm * bk),
        tile_bytes * (pk * pn) * (bk * bn),
        tile_bytes * (pm * pn) * (bm * bn),
    )
    copies = (2, 2, 1)  # ping-pong for the input streams
    bram = np.full(len(cfg), rp.shell_bram)
    uram = np.full(len(cfg), rp.shell_uram)
    for size, n_copies in zip(sizes, copies):
        nbytes = n_copies * size.astype(np.float64)
        in_uram = size > rp.uram_threshold_bytes
        bram = bram + np.where(in_uram, 0.0, nbytes / rp.bram_block_bytes)
        uram = uram + np.where(in_uram, nbytes / rp.uram_block_bytes, 0.0)
    banks = (pm * pk, pk * pn, pm * pn)
    channels = banks[0] + banks[1] + banks[2]
    lut = rp.shell_lut + rp.lut_per_channel * channels
    ff = rp.shell_ff + rp.ff_per_channel * channels
    dsp = rp.shell_dsp + rp.dsp_per_channel * channels
    return np.column_stack([bram, uram, lut, ff, dsp]).astype(np.float64)


def capacity_array(dev: DeviceModel) -> np.ndarray:
    return np.array(dev.capacities.as_tuple(), dtype=np.float64)


def counts_to_pct(counts: np.ndarray, dev: DeviceModel) -> np.ndarray:
    cap = capacity_array(dev)
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = 100.0 * counts / cap
    # zero capacity: any use is infinitely over budget, no use is 0 %
    return np.where(cap > 0, pct, np.where(counts > 0, np.inf, 0.0))


def resource_usage(
    pw: PaddedWorkload,
    c: TilingConfig,
    dev: DeviceModel,
    rp: ResourceModelParams = DEFAULT_RESOURCE_PARAMS,
) -> ResourceVector:
    pct = counts_to_pct(resource_counts_array(pw, config_array([c]), rp), dev)[0]
    return ResourceVector(*pct.tolist(), scale="pct")


def fits_array(pct: np.ndarray, relaxation: float = 1.0) -> np.ndarray:
    return np.all(pct <= 100.0 * relaxation, axis=1)


__all__ = [
    "RESOURCE_KINDS",
    "ResourceModelParams",
    "DEFAULT_RESOURCE_PARAMS",
    "resource_counts_array",
    "counts_to_pct",
    "capacity_array",
    "resource_usage",
    "fits_array",
]
