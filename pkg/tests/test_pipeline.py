import json

import numpy as np
import pytest

from gemm_dse import io as gio
from gemm_dse import pipeline
from gemm_dse.design_space import GemmWorkload
from gemm_dse.gbdt import Hyperparams, MultiTargetModel
from gemm_dse.oracle import gen_dataset


def test_bundled_workloads(bundled):
    assert len(bundled) == 18
    assert len({w.name for w in bundled}) == 18


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("label,M,N\na,1,2\n", "missing column 'K'"),
        ("label,M,N,K,extra\n", "unexpected column 'extra'"),
        ("label,M,N,K\na,1,2\n", "expected 4 fields"),
        ("label,M,N,K\na,1,2,x\n", ":2:"),
        ("label,M,N,K\na,1,2,3\na,4,5,6\n", "duplicate label"),
        ("label,M,N,K\na,0,2,3\n", "must be >= 1"),
    ],
)
def test_workload_parse_errors(text, match):
    with pytest.raises(gio.InputError, match=match):
        gio.parse_workloads(text)


def test_workload_parse_ok():
    wl = gio.parse_workloads("M,K,N,label,element_bytes\n64,32,128,w,2\n")
    assert wl == [GemmWorkload(64, 128, 32, element_bytes=2, label="w")]


def test_resolve_workload(bundled):
    assert gio.resolve_workload("mlp_fc1", bundled).dims == (3072, 1024, 1024)
    assert gio.resolve_workload("10x20X30", bundled).dims == (10, 20, 30)
    with pytest.raises(gio.InputError):
        gio.resolve_workload("0x1x1", bundled)


def test_run_config_round_trip(tmp_path):
    cfg = gio.RunConfig(seeds=gio.Seeds(1, 2, 3))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert gio.RunConfig.load(path) == cfg
    path.write_text(json.dumps({"device": "nowhere.json"}))
    with pytest.raises(gio.InputError, match="does not exist"):
        gio.RunConfig.load(path)


def test_load_device_errors(tmp_path):
    p = tmp_path / "d.json"
    p.write_text("{")
    with pytest.raises(gio.InputError, match="not JSON"):
        gio.load_device(p)
    p.write_text(json.dumps({"max_aie": 0}))
    with pytest.raises(gio.InputError):
        gio.load_device(p)


def test_write_text_digest(tmp_path):
    digest = gio.write_text(tmp_path / "a" / "b.txt", "hello\n")
    assert digest == gio.file_digest(tmp_path / "a" / "b.txt")
    assert gio.file_digest(tmp_path / "nothing") is None


@pytest.fixture(scope="module")
def small_ds(dev):
    wl = [GemmWorkload(512, 512, 512, label="a"), GemmWorkload(256, 1024, 512, label="b"),
          GemmWorkload(1024, 256, 256, label="c")]
    return gen_dataset(wl, dev, seed=0)


def test_fit_target_meta_and_defaults(small_ds, dev):
    res = pipeline.train_target(small_ds, "resources", "set1", None, dev)
    assert isinstance(res, MultiTargetModel)
    assert res.meta["reference_capacities"] == list(dev.capacities.as_tuple())
    assert res.members["lut"].hyperparams == pipeline.LOGIC_MEMBER_HP
    assert res.members["uram"].hyperparams == pipeline.DEFAULT_TARGET_HP["resources"]
    assert res.members["dsp"].meta["target"] == "resources.dsp"
    assert res.feature_names == tuple(pipeline.FeatureSet.SET1.names)


def test_fit_target_seed_override(small_ds):
    m = pipeline.train_target(small_ds, "power", hp=Hyperparams(n_trees=5), seed=9)
    assert m.hyperparams.seed == 9 and m.meta == {"target": "power", "feature_set": "set12"}


def test_unknown_target(small_ds):
    with pytest.raises(ValueError, match="unknown target"):
        pipeline.target_values(small_ds, "area")


@pytest.mark.parametrize("split, groups", [("holdout80_20", 1), ("kfold5", 5), ("lowo", 3)])
def test_split_groups(small_ds, split, groups):
    ev = pipeline.evaluate_split(small_ds, "latency", "set12", split, Hyperparams(n_trees=10))
    assert len(ev) == 1 and len(ev[0].groups) == groups
    if split != "holdout80_20":
        assert ev[0].overall.n == len(small_ds)


def test_resource_split_has_five_columns(small_ds):
    ev = pipeline.evaluate_split(small_ds, "resources", "set1", "lowo", Hyperparams(n_trees=5))
    assert [e.target for e in ev] == [f"resources.{k}" for k in ("bram", "uram", "lut", "ff", "dsp")]


def test_unknown_split(small_ds):
    with pytest.raises(ValueError, match="unknown split"):
        pipeline.evaluate_split(small_ds, "latency", "set12", "random", Hyperparams(n_trees=1))


def test_analytical_eval(small_ds, dev):
    ev = pipeline.analytical_eval(small_ds, dev, "lowo")
    assert [g.group for g in ev.groups] == ["a", "b", "c"]
    assert pipeline.median_group_mape(ev) == float(np.median([g.mape_pct for g in ev.groups]))
