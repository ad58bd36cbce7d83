"""Command-line front end.

CSV schemas
-----------
sweeps:       <grid columns>, <metric>_mean, <metric>_std for each of
              normalized_throughput goodput generated delivered dropped
              in_flight collisions retransmissions pt_ratio, then reps.
              Preceded by '#' lines holding the effective config as JSON.
detect-curve: snr_db, probability, trials
"""

from __future__ import annotations

import argparse
import sys

from . import acoustics
from .chirp import ChirpSpec, detection_curve, write_curve_csv
from .config import load_config
from .experiments import run_experiment, summary_lines, write_csv
from .medium import ConfigError
from .network import NetworkSimulation
from .phy import select_mode

FAMILY_OF = {"run": "run", "sweep-load": "load_sweep", "sweep-pt": "pt_sweep", "sweep-per": "per_sweep",
             "compare-modes": "mode_compare", "adaptive": "adaptive_vs_fixed"}

REFERENCE_TL2_DB = 8.43


def _grid(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwcsma", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, metavar="PATH", help="scenario JSON file")
        p.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
        p.add_argument("--out", metavar="PATH", help="CSV output (default: stdout)")
        p.add_argument("--quiet", action="store_true", help="no summary lines")

    for name in FAMILY_OF:
        p = sub.add_parser(name, help=f"{FAMILY_OF[name]} experiment")
        common(p)
        p.add_argument("--reps", type=int, default=10, metavar="R", help="replications per grid point")
        if name != "run":
            p.add_argument("--grid", type=_grid, help="comma-separated grid values")
        else:
            p.add_argument("--trace", metavar="PATH", help="write the per-node MAC event log of the first replication")
        p.add_argument("--workers", type=int, default=1, help="parallel replication processes")

    p = sub.add_parser("detect-curve", help="Monte-Carlo preamble detection probability vs SNR")
    common(p)
    p.add_argument("--snr", type=_grid, default=[float(s) for s in range(-24, 11, 2)], help="SNR grid, dB")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--sir", type=float, help="overlapped scenario at this SIR (dB)")

    p = sub.add_parser("budget", help="link budget and selected mode")
    p.add_argument("--power", type=float, default=2.0, help="transmit power, W")
    p.add_argument("--range", type=float, default=1000.0, dest="range_m", help="range, m")
    p.add_argument("--freq", type=float, default=9.0, help="centre frequency, kHz")
    p.add_argument("--nl", type=float, default=100.0, help="noise level, dB re 1 uPa")
    return parser


def budget_report(power: float, range_m: float, f_khz: float, nl: float) -> str:
    sl = acoustics.source_level(power)
    tl1 = acoustics.spreading_loss(range_m)
    tl2 = acoustics.thorp_absorption(f_khz) * range_m / 1000.0
    tl = tl1 + tl2
    snr = acoustics.received_snr(sl, tl, nl)
    ref_tl = tl1 + REFERENCE_TL2_DB * range_m / 1000.0
    ref_snr = acoustics.received_snr(sl, ref_tl, nl)
    lines = [
        f"SL   = {sl:.2f} dB re 1 uPa",
        f"TL1  = {tl1:.2f} dB (spherical spreading)",
        f"TL2  = {tl2:.2f} dB (Thorp absorption {acoustics.thorp_absorption(f_khz):.4f} dB/km)",
        f"TL   = {tl:.2f} dB",
        f"SNR  = {snr:.2f} dB",
        f"mode = {select_mode(snr)}",
        f"note: an absorption of {REFERENCE_TL2_DB} dB/km instead gives TL = {ref_tl:.2f} dB, "
        f"SNR = {ref_snr:.2f} dB",
    ]
    return "\n".join(lines)


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "budget":
            print(budget_report(args.power, args.range_m, args.freq, args.nl))
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if args.command == "detect-curve":
            scenario = "single" if args.sir is None else ("overlapped", args.sir)
            probs = detection_curve(args.snr, args.trials, scenario, spec=ChirpSpec(), seed=cfg.seed)
            fh = _open_out(args.out)
            try:
                write_curve_csv(fh, args.snr, probs, args.trials)
            finally:
                if fh is not sys.stdout:
                    fh.close()
            if not args.quiet:
                for s, p in zip(args.snr, probs):
                    print(f"snr={s:g} dB: P_detect={p:.4f}", file=sys.stderr)
            return 0

        family = FAMILY_OF[args.command]
        result = run_experiment(family, cfg, getattr(args, "grid", None), reps=args.reps,
                                workers=args.workers)
        fh = _open_out(args.out)
        try:
            write_csv(fh, result)
        finally:
            if fh is not sys.stdout:
                fh.close()
        if getattr(args, "trace", None):
            sim = NetworkSimulation(cfg, trace=True)
            sim.run()
            sim.write_trace(args.trace)
        if not args.quiet:
            for line in summary_lines(result):
                print(line, file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"runtime assertion failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
