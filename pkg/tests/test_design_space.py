import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_configs
from gemm_dse.design_space import (
    ConfigError,
    DeviceModel,
    GemmWorkload,
    PaddedWorkload,
    TilingConfig,
    buffer_footprint,
    check_config,
    divisors,
    enumerate_configs,
    pad_workload,
    validate_config,
)


def _padded(tiles) -> PaddedWorkload:
    return pad_workload(GemmWorkload(*(32 * t for t in tiles)))


@pytest.mark.parametrize(
    "dims, tiles, padded",
    [
        ((3072, 1024, 1024), (96, 32, 32), (3072, 1024, 1024)),
        ((32, 32, 32), (1, 1, 1), (32, 32, 32)),
        ((100, 100, 100), (4, 4, 4), (128, 128, 128)),
    ],
)
def test_padding_examples(dims, tiles, padded):
    pw = pad_workload(GemmWorkload(*dims), 32)
    assert pw.tiles == tiles
    assert pw.padded_dims == padded
    assert pw.original.dims == dims


@pytest.mark.parametrize("bad", [0, -3])
def test_workload_rejects_non_positive(bad):
    with pytest.raises(ValueError):
        GemmWorkload(bad, 32, 32)


def test_workload_rejects_float():
    with pytest.raises(TypeError):
        GemmWorkload(32.0, 32, 32)


@given(st.integers(1, 5000))
def test_divisors_are_exact_and_sorted(n):
    ds = divisors(n)
    assert list(ds) == sorted(ds)
    assert set(ds) == {d for d in range(1, n + 1) if n % d == 0}


def test_single_tile_has_one_config(dev):
    configs = enumerate_configs(_padded((1, 1, 1)), dev)
    assert configs == [TilingConfig(1, 1, 1, 1, 1, 1)]


def test_two_tiles_along_m(dev):
    configs = enumerate_configs(_padded((2, 1, 1)), dev)
    assert {(c.P_M, c.B_M) for c in configs} == {(1, 1), (1, 2), (2, 1)}
    assert len(configs) == 3
    assert all(c.P_N == c.P_K == c.B_N == c.B_K == 1 for c in configs)


def test_running_example_matches_brute_force(pw_main, dev):
    configs = enumerate_configs(pw_main, dev)
    assert 1000 <= len(configs) <= 100_000
    assert set(map(tuple, configs)) == brute_force_configs(pw_main.tiles, dev.max_aie)
    assert len(set(configs)) == len(configs)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12)), st.integers(1, 400))
def test_enumeration_matches_brute_force(tiles, cap):
    dev = DeviceModel(max_aie=cap)
    got = enumerate_configs(_padded(tiles), dev)
    assert set(map(tuple, got)) == brute_force_configs(tiles, cap)


@settings(max_examples=30, deadline=None)
@given(st.tuples(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12)))
def test_every_enumerated_config_validates(tiles):
    pw = _padded(tiles)
    dev = DeviceModel()
    for c in enumerate_configs(pw, dev):
        assert validate_config(pw, c, dev) == []


def test_enumeration_is_lexicographic(pw_main, dev):
    configs = enumerate_configs(pw_main, dev)
    assert configs == sorted(configs)


@pytest.mark.parametrize("p, n", [((8, 8, 4), 256), ((1, 1, 1), 1), ((7, 8, 6), 336)])
def test_aie_count(p, n):
    assert TilingConfig(*p, 1, 1, 1).n_aie() == n


def test_validate_messages(pw_main, dev):
    assert validate_config(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), dev) == []
    assert "P_M does not divide t_M" in validate_config(pw_main, TilingConfig(5, 8, 4, 1, 1, 1), dev)
    assert "AIE cap exceeded" in validate_config(pw_main, TilingConfig(8, 8, 8, 1, 1, 1), dev)
    assert "B_N does not divide t_N/P_N" in validate_config(pw_main, TilingConfig(8, 8, 4, 1, 3, 1), dev)


def test_check_config_raises(pw_main):
    with pytest.raises(ConfigError, match="P_M does not divide t_M"):
        check_config(pw_main, TilingConfig(5, 8, 4, 1, 1, 1))


def test_footprint_examples(pw_main, dev):
    fp = buffer_footprint(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), dev)
    assert (fp.a_bytes, fp.b_bytes, fp.c_bytes) == (131072, 131072, 262144)
    one = buffer_footprint(pw_main, TilingConfig(1, 1, 1, 1, 1, 1), dev)
    assert one.a_bytes == one.b_bytes == one.c_bytes == 4096


def test_footprint_grows_with_reuse(pw_main, dev):
    base = buffer_footprint(pw_main, TilingConfig(8, 8, 4, 1, 1, 1), dev)
    big = buffer_footprint(pw_main, TilingConfig(8, 8, 4, 12, 4, 1), dev)
    assert big.total > 10 * base.total
    # footprint is plain arithmetic, so the (divisibility-violating) B=(4,8,1) case still evaluates
    wide = buffer_footprint(pw_main, TilingConfig(8, 8, 4, 4, 8, 1), dev)
    assert wide.total == 2 * 524288 + 2 * 1048576 + 8388608
    assert wide.total / base.total > 10


def test_device_defaults(dev):
    assert dev.flop_per_cycle_per_aie == pytest.approx(16.0)
    assert dev.max_aie == 400


def test_device_round_trip(dev):
    doc = json.loads(json.dumps(dev.to_dict()))
    assert DeviceModel.from_dict(doc) == dev


def test_device_unknown_field():
    with pytest.raises(ValueError, match="unknown device fields"):
        DeviceModel.from_dict({"max_aies": 3})


@settings(max_examples=30, deadline=None)
@given(st.tuples(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12)), st.integers(1, 300), st.integers(0, 300))
def test_raising_the_cap_only_adds(tiles, cap, extra):
    pw = _padded(tiles)
    small = set(enumerate_configs(pw, DeviceModel(max_aie=cap)))
    large = set(enumerate_configs(pw, DeviceModel(max_aie=cap + extra)))
    assert small <= large
    assert enumerate_configs(pw, DeviceModel(max_aie=cap)) == enumerate_configs(pw, DeviceModel(max_aie=cap))
