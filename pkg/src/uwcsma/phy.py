"""Adaptive OFDM PHY abstraction.

Transmission-mode catalog, packet timing, effective SNR (ESNR) and the
ESNR-to-mode map, plus a parametric packet-error-rate model anchored at the
1% PER point of every mode.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class TransmissionMode:
    index: int
    bits_per_symbol: int
    diversity_order: int
    coding_rate: Fraction
    data_rate: float  # bps, nominal

    @property
    def modulation(self) -> str:
        return {1: "BPSK", 2: "QPSK", 3: "8PSK"}[self.bits_per_symbol]


MODES: tuple[TransmissionMode, ...] = (
    TransmissionMode(1, 1, 3, Fraction(1, 2), 658.0),
    TransmissionMode(2, 2, 3, Fraction(1, 2), 1317.0),
    TransmissionMode(3, 2, 1, Fraction(1, 4), 1984.0),
    TransmissionMode(4, 2, 1, Fraction(1, 3), 2645.0),
    TransmissionMode(5, 2, 1, Fraction(1, 2), 3967.0),
    TransmissionMode(6, 3, 1, Fraction(1, 2), 5950.0),
)


def get_mode(index: int, modes=MODES) -> TransmissionMode:
    for m in modes:
        if m.index == index:
            return m
    raise ValueError(f"no transmission mode {index!r}")


@dataclass(frozen=True)
class OfdmTiming:
    symbol_duration: float = 0.1707
    cp_duration: float = 0.020
    blocks_per_frame: int = 5
    data_carriers: int = 768
    pilot_carriers: int = 257
    subcarriers: int = 1025
    preamble_duration: float = 0.040
    # header and per-frame sync/guard are not given numerically; these two
    # values make mode 1 carry 400 bytes in 5.36 s.
    header_duration: float = 0.480
    frame_overhead: float = 0.0145

    @property
    def block_duration(self) -> float:
        return self.symbol_duration + self.cp_duration

    @property
    def frame_duration(self) -> float:
        return self.frame_overhead + self.blocks_per_frame * self.block_duration


DEFAULT_TIMING = OfdmTiming()


def bits_per_block(mode: TransmissionMode, timing: OfdmTiming = DEFAULT_TIMING) -> Fraction:
    return Fraction(timing.data_carriers * mode.bits_per_symbol) * Fraction(mode.coding_rate) / mode.diversity_order


def bits_per_frame(mode: TransmissionMode, timing: OfdmTiming = DEFAULT_TIMING) -> Fraction:
    return bits_per_block(mode, timing) * timing.blocks_per_frame


def raw_rate(mode: TransmissionMode, timing: OfdmTiming = DEFAULT_TIMING) -> float:
    """Information rate of back-to-back CP-OFDM blocks, bps."""
    return float(bits_per_block(mode, timing)) / timing.block_duration


def packet_duration(mode: TransmissionMode, payload_bytes: int, timing: OfdmTiming = DEFAULT_TIMING) -> float:
    if payload_bytes <= 0:
        raise ValueError(f"payload_bytes must be positive, got {payload_bytes!r}")
    n_frames = math.ceil(Fraction(8 * payload_bytes) / bits_per_frame(mode, timing))
    return timing.preamble_duration + timing.header_duration + n_frames * timing.frame_duration


@dataclass(frozen=True)
class ModeThresholds:
    """ESNR breakpoints (dB); mode m covers (b[m-1], b[m]] with b[-1]=-inf, b[6]=+inf."""

    boundaries: tuple[float, ...] = (-1.0, 1.8, 4.8, 6.8, 9.0, 13.0)

    def __post_init__(self):
        b = self.boundaries
        if any(not a < c for a, c in zip(b, b[1:])):
            raise ValueError("ESNR boundaries must be strictly increasing")

    def anchor(self, mode: int) -> float:
        """Lowest ESNR at which ``mode`` is selected (its 1% PER point)."""
        if not 1 <= mode <= len(self.boundaries):
            raise ValueError(f"no anchor for mode {mode!r}")
        return self.boundaries[mode - 1]


DEFAULT_THRESHOLDS = ModeThresholds()


def select_mode(esnr: float, thresholds: ModeThresholds = DEFAULT_THRESHOLDS) -> int:
    """Mode index 0..6 for an ESNR in dB; 0 means stop transmitting."""
    if not math.isfinite(esnr):
        raise ValueError(f"esnr must be finite, got {esnr!r}")
    # intervals are right-closed, so a boundary value maps to the lower mode
    return bisect.bisect_left(thresholds.boundaries, esnr)


ESNR_CAP_DB = 60.0


def compute_esnr(h_hat, z, s, cap_db: float = ESNR_CAP_DB) -> float:
    """Effective SNR in dB over the data subcarriers.

    ``h_hat`` is the channel estimate, ``z`` the frequency-domain observation
    after combining and ``s`` the re-encoded transmitted symbols. The residual
    ``z - h_hat*s`` is treated as noise; a zero residual returns ``cap_db``.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    z = np.asarray(z, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if not (h_hat.shape == z.shape == s.shape) or h_hat.ndim != 1 or h_hat.size == 0:
        raise ValueError("h_hat, z and s must be 1-D sequences of equal nonzero length")
    hs = h_hat * s
    signal = np.mean(np.abs(hs) ** 2)
    noise = np.mean(np.abs(z - hs) ** 2)
    if noise == 0.0:
        return cap_db
    if signal == 0.0:
        return -cap_db
    return min(cap_db, 10.0 * math.log10(signal / noise))


@dataclass(frozen=True)
class PerParams:
    target: float = 1e-2
    slope: float = 2.0  # decades of PER per dB below the anchor
    thresholds: ModeThresholds = field(default_factory=ModeThresholds)


def per_model(mode: int, esnr: float, params: PerParams = PerParams()) -> float:
    """Packet error probability of ``mode`` at ``esnr`` dB.

    Log-linear waterfall through (anchor, target), clamped to [0, 1].
    """
    anchor = params.thresholds.anchor(mode)
    exponent = math.log10(params.target) - params.slope * (esnr - anchor)
    if exponent >= 0.0:
        return 1.0
    return 10.0 ** exponent
