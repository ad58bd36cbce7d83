import io

import pytest

from uwcsma.config import ScenarioConfig
from uwcsma.experiments import (DEFAULT_GRIDS, FAMILIES, grid_points, pt_ratio, run_experiment,
                                saturation_oracle, summary_lines, tune_cw_min, write_csv)
from uwcsma.medium import ConfigError

CFG = ScenarioConfig(node_count=2, duration=300.0, offered_load=0.3)


def test_pt_ratio():
    assert pt_ratio(0.4714, 5.36) == pytest.approx(0.0879, abs=1e-4)
    with pytest.raises(ValueError):
        pt_ratio(1.0, 0.0)


def test_saturation_oracle_by_hand():
    s = saturation_oracle(5.36, 0.3, 0.5, 0.1, 0.4714, 4)
    assert s == pytest.approx(5.36 / (5.36 + 0.6 + 0.6 + 0.9428))


@pytest.mark.parametrize("family", FAMILIES)
def test_grid_points_cover_default_grid(family):
    pts = grid_points(family, CFG)
    per_value = 7 if family == "adaptive_vs_fixed" else 1
    assert len(pts) == per_value * len(DEFAULT_GRIDS[family])


def test_adaptive_vs_fixed_baselines_are_layered():
    pts = grid_points("adaptive_vs_fixed", CFG, [5.0])
    assert [lab["policy"] for lab, _ in pts] == ["adaptive"] + [f"fixed{m}" for m in range(1, 7)]
    assert pts[0][1].mac.cross_layer and not any(c.mac.cross_layer for _, c in pts[1:])


def test_grid_errors():
    with pytest.raises(ConfigError):
        grid_points("bogus", CFG)
    with pytest.raises(ConfigError):
        grid_points("mode_compare", CFG, [7])
    with pytest.raises(ConfigError):
        grid_points("load_sweep", CFG, [])
    with pytest.raises(ConfigError):
        run_experiment("run", CFG, reps=0)


def test_rows_and_csv():
    res = run_experiment("load_sweep", CFG, [0.1, 0.5], reps=3)
    rows = res.rows()
    assert [r["offered_load"] for r in rows] == [0.1, 0.5]
    assert all(r["reps"] == 3 for r in rows)
    buf = io.StringIO()
    write_csv(buf, res)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# family: load_sweep"
    assert lines[2].startswith("# config: {")
    assert lines[3].split(",")[:3] == ["offered_load", "normalized_throughput_mean", "normalized_throughput_std"]
    assert len(lines) == 6
    assert len(summary_lines(res)) == 2


def test_workers_do_not_change_results():
    a = run_experiment("per_sweep", CFG, [0.0, 0.1], reps=2)
    b = run_experiment("per_sweep", CFG, [0.0, 0.1], reps=2, workers=2)
    assert a.to_csv() == b.to_csv()


def test_tune_cw_min_returns_candidate():
    cfg = ScenarioConfig(node_count=3, duration=300.0)
    assert tune_cw_min(cfg, candidates=(2, 8), reps=1) in (2, 8)
