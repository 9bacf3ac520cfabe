import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gemm_dse.analytical import (
    Bound,
    SampleSpec,
    analytical_arrays,
    analytical_latency,
    analytical_throughput_gflops,
    rank_and_sample,
    tile_cycles,
)
from gemm_dse.design_space import DeviceModel, GemmWorkload, TilingConfig, config_array, enumerate_configs, pad_workload


def test_tile_cycles(dev):
    assert tile_cycles(dev) == pytest.approx(2 * 32**3 / (16 * 0.9))


def test_running_example_compute_time(pw_main, dev):
    est = analytical_latency(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), dev)
    assert est.compute_s == pytest.approx(1.398e-3, rel=1e-3)
    assert pw_main.original.flop() / est.compute_s / 1e9 == pytest.approx(4608.0, rel=1e-9)


def test_single_aie_is_256x_slower(pw_main, dev):
    fast = analytical_latency(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), dev).compute_s
    for b in [(1, 1, 1), (2, 4, 8), (96, 32, 32)]:
        slow = analytical_latency(pw_main, TilingConfig(1, 1, 1, *b), dev).compute_s
        assert slow / fast == pytest.approx(256.0, rel=1e-12)


def test_ddr_traffic_terms(pw_main, dev):
    r1 = analytical_arrays(pw_main, config_array([TilingConfig(8, 8, 4, 1, 1, 1)]), dev)
    r2 = analytical_arrays(pw_main, config_array([TilingConfig(8, 8, 4, 1, 2, 1)]), dev)
    a1, b1, c1 = (float(x[0]) for x in r1["traffic_bytes"])
    a2, b2, c2 = (float(x[0]) for x in r2["traffic_bytes"])
    assert a1 == 4 * 3072 * 1024 * 4
    assert a2 == a1 / 2
    assert b2 == b1 and c2 == c1 == 4 * 3072 * 1024


def test_bound_tie_goes_to_compute(pw_main, dev):
    est = analytical_latency(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), dev)
    assert est.bound is Bound.MEMORY
    assert est.latency_s == max(est.compute_s, est.ddr_s)
    tie = DeviceModel(ddr_bandwidth_Bps=est.ddr_bytes / est.compute_s)
    tied = analytical_latency(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), tie)
    if tied.ddr_s == tied.compute_s:
        assert tied.bound is Bound.COMPUTE


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_latency_is_the_roofline(idx):
    pw = pad_workload(GemmWorkload(3072, 1024, 1024))
    dev = DeviceModel()
    configs = enumerate_configs(pw, dev)
    c = configs[idx % len(configs)]
    est = analytical_latency(pw, c, dev)
    assert est.latency_s == max(est.compute_s, est.ddr_s)
    assert (est.bound is Bound.MEMORY) == (est.ddr_s > est.compute_s)


# -- sampling -----------------------------------------------------------------


def _eight_tiles():
    pw = pad_workload(GemmWorkload(8 * 32, 32, 32))
    return pw, enumerate_configs(pw, DeviceModel())


def test_ten_configs_small_budget(dev):
    pw, configs = _eight_tiles()
    assert len(configs) == 10
    picked = rank_and_sample(pw, configs, dev, SampleSpec(2, 2, 2), seed=0)
    assert len(picked) <= 6
    thr = analytical_throughput_gflops(pw, config_array(configs), dev)
    order = np.argsort(-thr, kind="stable")
    assert configs[order[0]] in picked
    assert configs[order[-1]] in picked


def test_budget_covers_everything(dev):
    pw, configs = _eight_tiles()
    assert rank_and_sample(pw, configs, dev, SampleSpec(0, 0, len(configs)), seed=3) == configs
    assert rank_and_sample(pw, configs, dev, SampleSpec(40, 40, 250), seed=3) == configs


def test_empty_configs_rejected(dev):
    pw, _ = _eight_tiles()
    with pytest.raises(ValueError):
        rank_and_sample(pw, [], dev, SampleSpec(), 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SampleSpec(k_top=-1)
    with pytest.raises(ValueError):
        SampleSpec(relaxation=0.9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_sample_properties(k_top, k_bottom, k_random, seed):
    pw = pad_workload(GemmWorkload(512, 768, 768))
    dev = DeviceModel()
    configs = enumerate_configs(pw, dev)
    spec = SampleSpec(k_top, k_bottom, k_random)
    a = rank_and_sample(pw, configs, dev, spec, seed)
    assert a == rank_and_sample(pw, configs, dev, spec, seed)
    assert len(a) <= spec.budget
    assert len(set(a)) == len(a)
    pos = {c: i for i, c in enumerate(configs)}
    assert [pos[c] for c in a] == sorted(pos[c] for c in a)


def test_random_picks_cover_aie_counts(pw_main, dev):
    configs = enumerate_configs(pw_main, dev)
    picked = rank_and_sample(pw_main, configs, dev, SampleSpec(), 0)
    n_all = {c.n_aie() for c in configs}
    n_got = {c.n_aie() for c in picked}
    assert len(n_all) <= SampleSpec().k_random
    assert n_got == n_all


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(0, 2))
def test_reuse_and_parallelism_monotonicity(idx, d):
    pw = pad_workload(GemmWorkload(1024, 2048, 768))
    dev = DeviceModel(max_aie=10**6)
    configs = enumerate_configs(pw, dev)
    c = configs[idx % len(configs)]
    base = analytical_latency(pw, c, dev)
    for field, scale in (("B", 2), ("B", 3), ("P", 2), ("P", 3)):
        p, b = list(c.P), list(c.B)
        (b if field == "B" else p)[d] *= scale
        if pw.tiles[d] % p[d] or (pw.tiles[d] // p[d]) % b[d]:
            continue
        other = analytical_latency(pw, TilingConfig(*p, *b), dev)
        if field == "B":
            assert other.ddr_bytes <= base.ddr_bytes
        else:
            assert other.compute_s < base.compute_s
