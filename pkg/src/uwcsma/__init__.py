"""Cross-layer CSMA/CA simulator and link toolkit for star underwater acoustic networks."""

from .acoustics import (propagation_delay, received_snr, source_level, spreading_loss,
                        thorp_absorption, transmission_loss)
from .config import ScenarioConfig, load_config
from .engine import Simulator, TimeOrderError, rng_stream
from .experiments import goodput, normalized_throughput, pt_ratio, run_experiment
from .network import RunMetrics, simulate
from .phy import MODES, compute_esnr, packet_duration, per_model, raw_rate, select_mode

__version__ = "0.1.0"
