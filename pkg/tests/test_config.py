import json

import pytest
from hypothesis import given, strategies as st

from uwcsma.config import ScenarioConfig, effective_dict, from_dict, load_config, to_dict, validate
from uwcsma.medium import ConfigError


def test_defaults_resolve():
    cfg = ScenarioConfig()
    validate(cfg)
    assert cfg.max_delay == pytest.approx(0.4714, abs=1e-4)
    assert cfg.slot == cfg.max_delay
    assert cfg.t_data(1) == pytest.approx(5.36, abs=0.01)
    assert cfg.pause_duration == pytest.approx(10 * cfg.t_data(1))
    eff = effective_dict(cfg)
    assert eff["mac"]["slot"] == cfg.slot
    assert len(eff["phy"]["modes"]) == 6


def test_round_trip():
    cfg = ScenarioConfig(node_count=5, seed=9).replace(**{"mac.cw_min": 8, "channel.forced_per": 0.1})
    assert from_dict(json.loads(json.dumps(to_dict(cfg)))) == cfg


def test_replace_rejects_unknown():
    with pytest.raises(ConfigError, match="nope"):
        ScenarioConfig().replace(nope=1)


@pytest.mark.parametrize("data,field", [
    ({"node_count": 0}, "node_count"),
    ({"offered_load": -1}, "offered_load"),
    ({"channel": {"forced_per": 2.0}}, "channel.forced_per"),
    ({"mac": {"cw_min": 8, "cw_max": 4}}, "mac.cw_max"),
    ({"phy": {"thresholds": [0, 1, 2]}}, "phy.thresholds"),
    ({"mode_policy": "fixed", "fixed_mode": 9}, "fixed_mode"),
    ({"seed": -1}, "seed"),
    ({"mac": {"bogus": 1}}, "mac.bogus"),
    ({"surprise": 1}, "surprise"),
    ({"channel": {"esnr_db": None}}, "channel.esnr_db"),
])
def test_invalid_fields_are_named(data, field):
    with pytest.raises(ConfigError) as exc:
        validate(from_dict(data))
    assert str(exc.value).startswith(field)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="no such"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"seed\": ,\n}")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"node_count": 3, "mac": {"cw_min": 2}}))
    cfg = load_config(good)
    assert cfg.node_count == 3 and cfg.mac.cw_min == 2


def test_delay_scale_scales_slot():
    cfg = ScenarioConfig(delay_scale=2.0)
    assert cfg.slot == pytest.approx(2 * ScenarioConfig().slot)


@given(st.integers(1, 50), st.floats(0, 10), st.integers(0, 2**64 - 1))
def test_valid_configs_validate(n, load, seed):
    validate(ScenarioConfig(node_count=n, offered_load=load, seed=seed))
