"""Acoustic link budget: source level, spreading, Thorp absorption, sonar SNR.

Frequencies are in kHz, ranges in metres, levels in dB re 1 uPa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SOURCE_LEVEL_OFFSET_DB = 170.77
DEFAULT_SOUND_SPEED = 1500.0


@dataclass(frozen=True)
class LinkBudgetParams:
    transmit_power: float = 2.0
    noise_level: float = 100.0
    center_frequency: float = 9.0
    sound_speed: float = DEFAULT_SOUND_SPEED
    spreading_exponent: float = 20.0

    def __post_init__(self):
        for name in ("transmit_power", "center_frequency", "sound_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


def source_level(power: float) -> float:
    """Source level in dB re 1 uPa @ 1 m of an omnidirectional projector."""
    if not power > 0:
        raise ValueError(f"power must be positive, got {power!r}")
    return 10.0 * math.log10(power) + SOURCE_LEVEL_OFFSET_DB


def spreading_loss(range_m: float, exponent: float = 20.0) -> float:
    if range_m < 1.0:
        raise ValueError(f"range must be >= 1 m, got {range_m!r}")
    return exponent * math.log10(range_m)


def thorp_absorption(f_khz: float) -> float:
    """Thorp absorption coefficient in dB/km for a frequency in kHz."""
    if not f_khz > 0:
        raise ValueError(f"frequency must be positive, got {f_khz!r}")
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


def transmission_loss(range_m: float, f_khz: float, exponent: float = 20.0) -> float:
    return spreading_loss(range_m, exponent) + thorp_absorption(f_khz) * range_m / 1000.0


def received_snr(sl: float, tl: float, nl: float) -> float:
    # directivity indices are zero for omnidirectional transducers
    return sl - tl - nl


def link_snr(range_m: float, params: LinkBudgetParams) -> float:
    tl = transmission_loss(max(range_m, 1.0), params.center_frequency, params.spreading_exponent)
    return received_snr(source_level(params.transmit_power), tl, params.noise_level)


def propagation_delay(pos_a, pos_b, c: float = DEFAULT_SOUND_SPEED) -> float:
    if not c > 0:
        raise ValueError(f"sound speed must be positive, got {c!r}")
    return math.dist(pos_a, pos_b) / c
