from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_front
from gemm_dse.design_space import DeviceModel, GemmWorkload, ResourceVector, TilingConfig, pad_workload
from gemm_dse.dse import (
    ConstantPredictor,
    NoFeasibleDesign,
    OraclePredictor,
    ParetoFront,
    compare_fronts,
    explore,
    front_indices,
    hypervolume,
    oracle_front,
    pareto_front,
    point_record,
    select,
    sweep,
)
from gemm_dse.features import FeatureSet


@dataclass(frozen=True)
class P:
    throughput_gflops: float
    energy_eff_gflops_per_w: float
    config: TilingConfig = TilingConfig(1, 1, 1, 1, 1, 1)


def _vals(front):
    return sorted((p.throughput_gflops, p.energy_eff_gflops_per_w) for p in front)


def test_front_examples():
    assert _vals(pareto_front([P(1, 1)])) == [(1, 1)]
    assert _vals(pareto_front([P(1, 1), P(2, 2)])) == [(2, 2)]
    three = [P(1, 3), P(2, 2), P(3, 1)]
    front = pareto_front(three)
    assert _vals(front) == [(1, 3), (2, 2), (3, 1)]
    assert [p.throughput_gflops for p in front] == [1, 2, 3]
    assert len(pareto_front([])) == 0


def test_equal_points_collapse_to_fewer_aies():
    a = P(2, 2, TilingConfig(2, 2, 1, 1, 1, 1))
    b = P(2, 2, TilingConfig(1, 1, 2, 1, 1, 1))
    c = P(2, 2, TilingConfig(1, 2, 1, 1, 1, 1))
    assert pareto_front([a, b, c]).points == [b]


def _random_front(seed, n, ties):
    rng = np.random.default_rng(seed)
    thr = rng.integers(1, 30, n).astype(float) if ties else rng.uniform(1, 100, n)
    eff = rng.integers(1, 30, n).astype(float) if ties else rng.uniform(1, 100, n)
    cfg = rng.integers(1, 5, size=(n, 6))
    return thr, eff, cfg


@pytest.mark.parametrize("ties", [False, True])
def test_verifier_over_1000_random_fronts(ties):
    for seed in range(1000):
        n = 1 + seed % 60
        thr, eff, cfg = _random_front(seed, n, ties)
        idx = front_indices(thr, eff, cfg)
        kept = set(idx.tolist())
        # nothing kept is dominated, and every non-dominated value pair is represented
        for i in kept:
            assert not np.any((thr >= thr[i]) & (eff >= eff[i]) & ((thr > thr[i]) | (eff > eff[i])))
        ref = brute_force_front(thr, eff)
        assert {(thr[i], eff[i]) for i in kept} == {(thr[i], eff[i]) for i in ref}
        assert len(kept) == len({(thr[i], eff[i]) for i in ref})
        assert np.all(np.diff(thr[idx]) > 0) and np.all(np.diff(eff[idx]) < 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 10), st.floats(0.1, 10)), min_size=1, max_size=25))
def test_front_is_idempotent(pairs):
    pts = [P(a, b) for a, b in pairs]
    front = pareto_front(pts)
    assert pareto_front(front.points).points == front.points


def test_hypervolume_examples():
    assert hypervolume([(1, 1)], (1, 1)) == pytest.approx(1.0)
    assert hypervolume([(1, 0.5), (0.5, 1)], (1, 1)) == pytest.approx(0.75)
    assert hypervolume([], (1, 1)) == 0.0
    f = pareto_front([P(1, 3), P(2, 2), P(3, 1)])
    assert hypervolume(f, (3, 3)) / hypervolume(f, (3, 3)) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 1), st.floats(0.01, 1)), min_size=1, max_size=20),
       st.tuples(st.floats(0.01, 1), st.floats(0.01, 1)))
def test_hypervolume_is_monotone(pairs, extra):
    base = hypervolume(pairs, (1, 1))
    assert 0 <= base <= 1
    assert hypervolume(pairs + [extra], (1, 1)) >= base - 1e-15
    # dominated points do not count
    front = pareto_front([P(a, b) for a, b in pairs])
    assert hypervolume(front, (1, 1)) == pytest.approx(base, abs=1e-15)


def test_hypervolume_rejects_bad_normalizer():
    with pytest.raises(ValueError):
        hypervolume([(1, 1)], (0, 1))


def test_select_rules():
    one = [P(1, 1)]
    assert select(one, "throughput") is one[0]
    two = pareto_front([P(1, 3), P(3, 1)])
    assert select(two, "throughput").throughput_gflops == 3
    assert select(two, "energy").energy_eff_gflops_per_w == 3
    assert select(two, "energy_efficiency").energy_eff_gflops_per_w == 3
    ties = [P(2, 1, TilingConfig(2, 1, 1, 1, 1, 1)), P(2, 1, TilingConfig(1, 1, 1, 2, 1, 1)),
            P(2, 1, TilingConfig(1, 1, 1, 1, 2, 1))]
    assert select(ties, "throughput").config == TilingConfig(1, 1, 1, 1, 2, 1)
    with pytest.raises(NoFeasibleDesign, match="no feasible design"):
        select([], "throughput")
    with pytest.raises(ValueError):
        select(one, "latency")


def test_sweep_single_tile(oracle):
    pw = pad_workload(GemmWorkload(32, 32, 32))
    pts = sweep(pw, DeviceModel(), OraclePredictor(oracle))
    assert len(pts) == 1 and pts[0].feasible


def test_zero_capacity_device(pw_main, oracle):
    zero = DeviceModel.from_dict({"capacities": {"bram": 0, "uram": 0, "lut": 0, "ff": 0, "dsp": 0}})
    res = explore(pw_main, zero, OraclePredictor(oracle))
    assert not res.sweep.feasible.any()
    assert len(res.front) == 0
    with pytest.raises(NoFeasibleDesign):
        res.selected("throughput")


def test_feature_set_mismatch(surrogates, pw_main, dev):
    with pytest.raises(ValueError, match="set12"):
        sweep(pad_workload(GemmWorkload(64, 64, 64)), dev, surrogates, FeatureSet.SET1)


def test_explore_front_matches_points(pw_main, dev, oracle):
    res = explore(pw_main, dev, OraclePredictor(oracle))
    feasible = [p for p in res.points if p.feasible]
    assert res.front.points == pareto_front(feasible).points
    assert all(p.feasible for p in res.front)


def test_oracle_as_model_scores_one(dev, oracle):
    pw = pad_workload(GemmWorkload(512, 768, 768))
    ref = oracle_front(pw, oracle)
    pred = explore(pw, dev, OraclePredictor(oracle.zero_noise())).front
    cmp = compare_fronts(pw, pred, ref, oracle)
    assert cmp.hv_ratio == 1.0
    assert cmp.throughput_regret == 0.0 and cmp.energy_regret == 0.0 and cmp.false_feasible == 0


def test_constant_predictor_cannot_beat_oracle(dev, oracle):
    pw = pad_workload(GemmWorkload(512, 768, 768))
    ref = oracle_front(pw, oracle)
    pred = explore(pw, dev, ConstantPredictor()).front
    assert len(pred) == 1
    assert compare_fronts(pw, pred, ref, oracle).hv_ratio <= 1.0


def test_compare_rejects_other_workload(dev, oracle):
    a = pad_workload(GemmWorkload(512, 768, 768))
    b = pad_workload(GemmWorkload(256, 768, 768))
    with pytest.raises(ValueError, match="workload"):
        compare_fronts(b, oracle_front(a, oracle), oracle_front(b, oracle), oracle)


def test_point_record(pw_main, dev, oracle):
    best = explore(pw_main, dev, OraclePredictor(oracle)).selected("throughput")
    rec = point_record(best, pw_main)
    assert rec["n_aie"] == best.config.n_aie()
    assert rec["features"]["N_AIE"] == rec["n_aie"]
    assert set(rec["resources_pct"]) == {"bram", "uram", "lut", "ff", "dsp"}


def test_values_of_empty_front():
    assert ParetoFront([]).values().shape == (0, 2)


def test_resource_vector_scale():
    with pytest.raises(ValueError):
        ResourceVector(1, 1, 1, 1, -1)
    with pytest.raises(ValueError):
        ResourceVector(1, 1, 1, 1, 1, scale="count").fits()
