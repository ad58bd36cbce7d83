"""
Throughput sweeps
=================

Offered load, propagation delay and mode choice against normalized
throughput, plus adaptive versus fixed-mode goodput. Three replications per
point keep this quick; the acceptance suite uses ten.
"""

from uwcsma.config import ScenarioConfig
from uwcsma.experiments import run_experiment, summary_lines, tune_cw_min

base = ScenarioConfig(node_count=5, mode_policy="fixed", fixed_mode=1, duration=1500.0).replace(
    **{"channel.forced_per": 0.0})

# The best contention window depends on how many nodes contend.
cw = tune_cw_min(base, reps=2)
base = base.replace(**{"mac.cw_min": cw, "mac.cw_max": 16 * cw})
print(f"N=5, tuned cw_min = {cw}")

print("\nload sweep")
print("\n".join(summary_lines(run_experiment("load_sweep", base, [0.02, 0.1, 0.3, 1.0], reps=3))))

print("\nstretching the region (larger PT-ratio)")
print("\n".join(summary_lines(run_experiment("pt_sweep", base.replace(offered_load=1.0), [0.5, 1, 2, 4], reps=3))))

print("\nfixed modes at saturation")
print("\n".join(summary_lines(run_experiment("mode_compare", base.replace(offered_load=1.0), reps=3))))

print("\nadaptive vs fixed, one node")
single = ScenarioConfig(node_count=1, offered_load=0.5, duration=1500.0, warmup_packets=10)
res = run_experiment("adaptive_vs_fixed", single, [0.0, 5.0, 12.0], reps=2)
for row in res.rows():
    print(f"  ESNR {row['esnr_db']:5.1f} dB  {row['policy']:>8}  {row['goodput_mean']:7.1f} bps")
