"""
Watching the MAC
================

Three sources contend for one sink. The trace shows each node's phase
change per event: backoff, deferral behind an overheard header, transmission
and the feedback that follows.
"""

import csv
import io
import tempfile
from pathlib import Path

from uwcsma.config import ScenarioConfig
from uwcsma.network import NetworkSimulation

cfg = ScenarioConfig(node_count=3, offered_load=0.6, duration=120.0, seed=7).replace(
    **{"channel.esnr_db": 8.0})
sim = NetworkSimulation(cfg, trace=True)
metrics = sim.run()

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "trace.csv"
    sim.write_trace(path)
    rows = list(csv.DictReader(io.StringIO(path.read_text())))

for row in rows[:25]:
    print(f"{float(row['time']):8.3f}  node {row['node']}  {row['phase_before']:>12} "
          f"--{row['event']:^14}-> {row['phase_after']:<12} {row['actions']}")

print(f"\ngenerated {metrics.generated}, delivered {metrics.delivered}, dropped {metrics.dropped}, "
      f"collisions {metrics.collisions}, modes {dict(metrics.mode_usage)}")
