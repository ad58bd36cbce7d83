"""Metrics and the experiment families (load, PT-ratio, PER, mode and
adaptive-vs-fixed sweeps)."""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig, effective_dict
from .medium import ConfigError
from .network import RunMetrics, simulate

FAMILIES = ("run", "load_sweep", "pt_sweep", "per_sweep", "mode_compare", "adaptive_vs_fixed")

DEFAULT_GRIDS = {
    "run": [None],
    "load_sweep": [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
    "pt_sweep": [0.25, 0.5, 1.0, 2.0, 4.0],
    "per_sweep": [0.0, 0.001, 0.01, 0.05, 0.1, 0.2],
    "mode_compare": [1, 2, 3, 4, 5, 6],
    "adaptive_vs_fixed": [float(e) for e in range(-2, 16)],
}

GRID_COLUMN = {"run": None, "load_sweep": "offered_load", "pt_sweep": "delay_scale",
               "per_sweep": "forced_per", "mode_compare": "mode", "adaptive_vs_fixed": "esnr_db"}


def normalized_throughput(metrics: RunMetrics, t_data_ref: float | None = None) -> float:
    """Fraction of time the channel carried successfully delivered DATA.

    With ``t_data_ref`` every delivery counts that airtime; without it the
    actual per-mode airtime of each delivery is used.
    """
    if metrics.window_time <= 0:
        raise ValueError("sim time must be positive")
    if t_data_ref is None:
        return metrics.window_airtime / metrics.window_time
    return metrics.window_delivered * t_data_ref / metrics.window_time


def goodput(metrics: RunMetrics) -> float:
    """Delivered payload bits per second."""
    if metrics.window_time <= 0:
        raise ValueError("sim time must be positive")
    return metrics.window_bits / metrics.window_time


def pt_ratio(avg_delay: float, t_data: float) -> float:
    if t_data <= 0:
        raise ValueError("t_data must be positive")
    return avg_delay / t_data


METRIC_NAMES = ("normalized_throughput", "goodput", "generated", "delivered", "dropped", "in_flight",
                "collisions", "retransmissions", "pt_ratio")


def summarize_run(cfg: ScenarioConfig, m: RunMetrics) -> dict:
    t_ref = cfg.t_data(cfg.fixed_mode) if cfg.mode_policy == "fixed" else None
    return {
        "normalized_throughput": normalized_throughput(m, t_ref),
        "goodput": goodput(m),
        "generated": m.generated,
        "delivered": m.delivered,
        "dropped": m.dropped,
        "in_flight": m.in_flight,
        "collisions": m.collisions,
        "retransmissions": m.retransmissions,
        "pt_ratio": pt_ratio(m.mean_delay, cfg.t_data(cfg.fixed_mode if cfg.mode_policy == "fixed" else 1)),
    }


def _run_one(cfg: ScenarioConfig) -> dict:
    m = simulate(cfg)
    if not m.conserved():
        raise AssertionError("packet conservation violated")
    return summarize_run(cfg, m)


def grid_points(family: str, cfg: ScenarioConfig, grid=None) -> list[tuple[dict, ScenarioConfig]]:
    """Expand a family and grid into labelled configurations."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown experiment family {family!r}")
    grid = DEFAULT_GRIDS[family] if grid is None else list(grid)
    if not grid:
        raise ConfigError("grid must not be empty")
    out = []
    for g in grid:
        if family == "run":
            out.append(({}, cfg))
        elif family == "load_sweep":
            out.append(({"offered_load": g}, cfg.replace(offered_load=float(g))))
        elif family == "pt_sweep":
            out.append(({"delay_scale": g}, cfg.replace(delay_scale=float(g))))
        elif family == "per_sweep":
            out.append(({"forced_per": g}, cfg.replace(**{"channel.forced_per": float(g)})))
        elif family == "mode_compare":
            if int(g) not in range(1, 7):
                raise ConfigError(f"mode_compare grid value {g!r} is not a mode")
            out.append(({"mode": int(g)}, cfg.replace(mode_policy="fixed", fixed_mode=int(g))))
        elif family == "adaptive_vs_fixed":
            base = cfg.replace(**{"channel.esnr_db": float(g), "channel.esnr_trace": None})
            out.append(({"esnr_db": g, "policy": "adaptive"}, base.replace(mode_policy="adaptive")))
            for mode in range(1, 7):
                # the layered baseline has neither rate adaptation nor NACKs
                out.append(({"esnr_db": g, "policy": f"fixed{mode}"},
                            base.replace(mode_policy="fixed", fixed_mode=mode, **{"mac.cross_layer": False})))
    return out


@dataclass
class ExperimentResult:
    family: str
    reps: int
    labels: list
    runs: list  # runs[i][r] -> summary dict
    config: ScenarioConfig

    def rows(self) -> list[dict]:
        out = []
        for label, runs in zip(self.labels, self.runs):
            row = dict(label)
            for name in METRIC_NAMES:
                vals = np.array([r[name] for r in runs], dtype=float)
                row[f"{name}_mean"] = float(vals.mean())
                row[f"{name}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            row["reps"] = len(runs)
            out.append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_csv(buf, self)
        return buf.getvalue()


def run_experiment(family: str, config: ScenarioConfig, grid=None, reps: int = 10,
                   workers: int = 1) -> ExperimentResult:
    """Run ``reps`` seeded replications (seeds ``seed .. seed+reps-1``) per grid point."""
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    points = grid_points(family, config, grid)
    jobs = [p_cfg.replace(seed=config.seed + r) for _, p_cfg in points for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_run_one, jobs))
    else:
        flat = [_run_one(j) for j in jobs]
    runs = [flat[i * reps:(i + 1) * reps] for i in range(len(points))]
    return ExperimentResult(family, reps, [lab for lab, _ in points], runs, config)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(fh, result: ExperimentResult) -> None:
    fh.write(f"# family: {result.family}\n")
    fh.write("# offered_load is the aggregate packet rate over all nodes (packets/s)\n")
    fh.write("# config: " + json.dumps(effective_dict(result.config), sort_keys=True) + "\n")
    rows = result.rows()
    cols = list(rows[0].keys())
    fh.write(",".join(cols) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def summary_lines(result: ExperimentResult) -> list[str]:
    lines = []
    for row in result.rows():
        label = " ".join(f"{k}={row[k]}" for k in result.labels[0]) if result.labels[0] else "run"
        lines.append(f"{label}: S={row['normalized_throughput_mean']:.4f}"
                     f"±{row['normalized_throughput_std']:.4f} goodput={row['goodput_mean']:.1f} bps"
                     f" delivered={row['delivered_mean']:.1f} dropped={row['dropped_mean']:.1f}")
    return lines


def saturation_oracle(t_data: float, t_delay: float, t_ack: float, t_other: float, slot: float,
                      cw_min: int) -> float:
    """Closed-form single-node saturated normalized throughput (lossless channel)."""
    mean_backoff = slot * cw_min / 2.0  # uniform integer slots on [0, cw_min]
    return t_data / (t_data + 2.0 * t_delay + t_ack + t_other + mean_backoff)


def tune_cw_min(config: ScenarioConfig, candidates=(2, 4, 8, 16, 32, 64), reps: int = 3,
                load: float = 1.0) -> int:
    """Contention window giving the highest saturated throughput for this node count."""
    best, best_s = None, -math.inf
    for cw in candidates:
        cfg = config.replace(offered_load=load, **{"mac.cw_min": cw, "mac.cw_max": max(config.mac.cw_max, 16 * cw)})
        res = run_experiment("run", cfg, reps=reps)
        s = res.rows()[0]["normalized_throughput_mean"]
        if s > best_s:
            best, best_s = cw, s
    return best
