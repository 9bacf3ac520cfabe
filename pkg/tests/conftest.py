"""Session-wide fixtures: the bundled dataset and surrogates are expensive, so build them once."""

from __future__ import annotations

import numpy as np
import pytest

from gemm_dse import io as gio
from gemm_dse import pipeline
from gemm_dse.design_space import DeviceModel, GemmWorkload, pad_workload
from gemm_dse.oracle import Oracle, gen_dataset


@pytest.fixture(scope="session")
def dev() -> DeviceModel:
    return DeviceModel()


@pytest.fixture(scope="session")
def bundled():
    return gio.load_workloads()


@pytest.fixture(scope="session")
def dataset(bundled, dev):
    return gen_dataset(bundled, dev, seed=0)


@pytest.fixture(scope="session")
def features(dataset):
    return pipeline.dataset_features(dataset)


@pytest.fixture(scope="session")
def surrogates(dataset, dev):
    return pipeline.train_surrogates(dataset, dev=dev)


@pytest.fixture(scope="session")
def oracle(dev) -> Oracle:
    return Oracle(dev, seed=0)


@pytest.fixture(scope="session")
def pw_main():
    """The 3072x1024x1024 running example, t = (96, 32, 32)."""
    return pad_workload(GemmWorkload(3072, 1024, 1024))


def brute_force_configs(tiles, max_aie):
    """Independent nested-loop enumerator used as a reference."""
    t_m, t_n, t_k = tiles
    out = set()
    for pm in range(1, t_m + 1):
        for pn in range(1, t_n + 1):
            for pk in range(1, t_k + 1):
                if t_m % pm or t_n % pn or t_k % pk or pm * pn * pk > max_aie:
                    continue
                for bm in range(1, t_m // pm + 1):
                    for bn in range(1, t_n // pn + 1):
                        for bk in range(1, t_k // pk + 1):
                            if (t_m // pm) % bm or (t_n // pn) % bn or (t_k // pk) % bk:
                                continue
                            out.add((pm, pn, pk, bm, bn, bk))
    return out


def brute_force_front(thr: np.ndarray, eff: np.ndarray) -> set[int]:
    """Indices of points not dominated by any other (quadratic reference)."""
    keep = set()
    for i in range(len(thr)):
        dominated = np.any((thr >= thr[i]) & (eff >= eff[i]) & ((thr > thr[i]) | (eff > eff[i])))
        if not dominated:
            keep.add(i)
    return keep


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
