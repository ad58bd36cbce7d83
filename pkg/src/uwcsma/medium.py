"""Shared half-duplex acoustic medium.

Frames propagate to every node with a geometric delay. At the sink each
arrival is resolved into one of four outcomes: decoded, preamble_only,
collision_detected or missed. Preamble detection here is a Bernoulli draw
with a probability looked up from the link SNR; :mod:`uwcsma.chirp` holds the
sample-level detector the lookup table was measured with.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mac import HeaderInfo, Packet, RxOutcome
from .phy import PerParams, per_model


class ConfigError(ValueError):
    pass


FRAME_KINDS = ("DATA", "ACK", "NACK1", "NACK2", "CONTROL")
BROADCAST = None


@dataclass(frozen=True)
class AirFrame:
    kind: str
    sender: int
    addressee: int | None
    mode: int
    tx_start: float
    duration: float
    header: HeaderInfo | None = None
    payload_bytes: int = 0
    frame_id: int = 0
    packet: Packet | None = None
    esnr: float | None = None
    involved: tuple = ()

    @property
    def tx_end(self) -> float:
        return self.tx_start + self.duration


@dataclass(frozen=True)
class Arrival:
    node: int
    frame: AirFrame
    start: float
    end: float


def propagate(frame: AirFrame, delays: np.ndarray) -> list[Arrival]:
    """Arrival windows of ``frame`` at every node except its sender.

    ``delays[i, j]`` is the one-way delay between nodes ``i`` and ``j``.
    """
    out = []
    for node in range(delays.shape[0]):
        if node == frame.sender:
            continue
        start = frame.tx_start + float(delays[frame.sender, node])
        out.append(Arrival(node, frame, start, start + frame.duration))
    return out


def overlaps(a_start: float, a_end: float, b_start: float, b_end: float) -> bool:
    return a_start < b_end and b_start < a_end


def classify_overlap(offset: float, first_duration: float, preamble_duration: float) -> str:
    """Relation of a second arrival starting ``offset`` s after the first.

    ``"separate"`` when it starts after the first has ended, ``"missed"`` when
    the two preambles land within one preamble length (their correlation peaks
    merge), otherwise ``"collision"``.
    """
    if offset < 0:
        raise ValueError("offset must be measured from the earlier arrival")
    if offset >= first_duration:
        return "separate"
    if offset < preamble_duration:
        return "missed"
    return "collision"


class EsnrProcess:
    """Piecewise-constant ESNR trace: ``[(t0, esnr0), (t1, esnr1), ...]``."""

    def __init__(self, breakpoints):
        if isinstance(breakpoints, (int, float)):
            breakpoints = [(0.0, float(breakpoints))]
        pts = sorted((float(t), float(v)) for t, v in breakpoints)
        if not pts:
            raise ConfigError("ESNR trace needs at least one breakpoint")
        self.times = [t for t, _ in pts]
        self.values = [v for _, v in pts]

    def at(self, t: float) -> float:
        i = bisect.bisect_right(self.times, t) - 1
        return self.values[max(i, 0)]


# Detection probability of the 40 ms, 6 kHz LFM preamble in AWGN versus
# in-band SNR (dB), from a 10^4-trial run of chirp.detection_curve (seed 2024)
# over full-band SNR -25..-13 dB, shifted by the band ratio.
FULLBAND_TO_INBAND_DB = 10.0 * math.log10(48000.0 / (2 * 6000.0))
DETECTION_SNR_DB = tuple(s + FULLBAND_TO_INBAND_DB for s in range(-25, -12))
DETECTION_PROB = (0.001, 0.002, 0.0039, 0.0127, 0.0367, 0.0874, 0.2019, 0.4159,
                  0.6729, 0.8857, 0.9783, 0.9983, 1.0)


@dataclass
class DetectionModel:
    """Preamble detection probability as a function of link in-band SNR."""

    constant: float | None = None
    snr_db: Sequence[float] = DETECTION_SNR_DB
    prob: Sequence[float] = DETECTION_PROB

    def probability(self, snr_db: float) -> float:
        if self.constant is not None:
            return self.constant
        return float(np.interp(snr_db, self.snr_db, self.prob, left=0.0, right=self.prob[-1]))


@dataclass
class ChannelState:
    esnr: EsnrProcess | None = None
    per_link: dict = field(default_factory=dict)
    jitter_std: float = 0.0
    forced_per: float | None = None
    per_params: PerParams = field(default_factory=PerParams)
    detection: DetectionModel = field(default_factory=DetectionModel)
    capture_first: bool = False

    def __post_init__(self):
        if self.forced_per is not None and not 0.0 <= self.forced_per <= 1.0:
            raise ConfigError(f"forced_per must lie in [0, 1], got {self.forced_per!r}")
        if self.jitter_std < 0:
            raise ConfigError("jitter_std must be non-negative")


def true_esnr(channel: ChannelState, link, t: float) -> float:
    proc = channel.per_link.get(link, channel.esnr)
    if proc is None:
        raise ConfigError(f"no ESNR process configured for link {link!r}")
    return proc.at(t)


def esnr_sample(channel: ChannelState, link, t: float, rng=None) -> float:
    """ESNR the receiver reports for ``link`` at time ``t`` (with estimation jitter)."""
    value = true_esnr(channel, link, t)
    if channel.jitter_std > 0:
        value += channel.jitter_std * float(rng.standard_normal())
    return value


@dataclass
class SinkArrival:
    """Bookkeeping for one arrival at the sink."""

    arrival: Arrival
    detected: bool = True
    deaf: bool = False  # sink was transmitting during part of the arrival
    notified: bool = False  # already covered by an earlier NACK2
    captured: bool = False

    @property
    def start(self) -> float:
        return self.arrival.start

    @property
    def end(self) -> float:
        return self.arrival.end

    @property
    def sender(self) -> int:
        return self.arrival.frame.sender


def resolve_reception(target: SinkArrival, others: Sequence[SinkArrival], channel: ChannelState,
                      rng) -> RxOutcome:
    """Outcome for ``target`` at the end of its arrival.

    ``others`` are the other arrivals at the same receiver; only those whose
    windows intersect ``target`` matter.
    """
    frame = target.arrival.frame
    if target.deaf or not target.detected:
        return RxOutcome("missed")
    group = [o for o in others if o is not target and overlaps(o.start, o.end, target.start, target.end)]
    if any(o.captured for o in group):
        return RxOutcome("missed")
    if not group or (channel.capture_first and all(o.start > target.start for o in group)):
        link = frame.sender
        esnr = true_esnr(channel, link, target.start)
        if frame.kind == "CONTROL":
            per = 0.0
        elif channel.forced_per is not None:
            per = channel.forced_per
        else:
            per = per_model(frame.mode, esnr, channel.per_params)
        u = rng.random()
        if u >= per:
            if group:
                target.captured = True
            return RxOutcome("decoded", esnr_sample(channel, link, target.start, rng))
        if group:
            return RxOutcome("missed")
        return RxOutcome("preamble_only")
    if all(o.detected for o in group):
        senders = (target.sender,) + tuple(o.sender for o in group if not o.notified)
        return RxOutcome("collision_detected", senders=senders)
    return RxOutcome("missed")


class ControlFrameGuard:
    """Asserts that control frames never overlap at any node."""

    def __init__(self):
        self._last_end: dict[int, float] = {}

    def arrive(self, node: int, start: float, end: float) -> None:
        prev = self._last_end.get(node, -math.inf)
        if start < prev - 1e-12:
            raise AssertionError(f"control frames overlap at node {node} ({start} < {prev})")
        self._last_end[node] = end
