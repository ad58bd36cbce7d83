"""Scenario configuration: dataclasses, JSON loading and validation."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .medium import ConfigError
from .phy import MODES, OfdmTiming, TransmissionMode, get_mode, packet_duration


@dataclass
class ChannelConfig:
    esnr_db: float | None = 20.0
    # optional piecewise trace [[t, esnr], ...]; overrides esnr_db
    esnr_trace: list | None = None
    # per-node overrides {"3": 7.5} or {"3": [[0, -2], [100, 15]]}
    per_link: dict = field(default_factory=dict)
    jitter_std: float = 0.0
    forced_per: float | None = None
    transmit_power: float = 2.0
    noise_level: float = 100.0
    center_frequency: float = 9.0
    detection_prob: float | None = None  # None: look up from the link budget
    capture_first: bool = False


@dataclass
class MacConfig:
    cw_min: int = 4
    cw_max: int = 64
    slot: float | None = None  # None: maximum node-to-sink delay of the region
    max_retries: int = 3
    t_ack: float = 0.5
    t_nack: float = 0.5
    t_probe: float = 0.5
    t_other: float = 0.1
    timeout_margin: float = 0.1
    pause_duration: float | None = None  # None: 10 x mode-1 packet duration
    cross_layer: bool = True


@dataclass
class PhyConfig:
    per_slope: float = 2.0
    per_target: float = 0.01
    thresholds: list = field(default_factory=lambda: [-1.0, 1.8, 4.8, 6.8, 9.0, 13.0])
    modes: list | None = None  # override rows {index, bits_per_symbol, diversity_order, coding_rate, data_rate}
    header_duration: float = 0.480
    frame_overhead: float = 0.0145


@dataclass
class ScenarioConfig:
    node_count: int = 1
    region_side: float = 1000.0
    delay_scale: float = 1.0
    sound_speed: float = 1500.0
    offered_load: float = 1.0  # aggregate packets/s over all nodes
    payload_bytes: int = 400
    mode_policy: str = "adaptive"  # "adaptive" or "fixed"
    fixed_mode: int = 1
    duration: float = 2000.0
    warmup_packets: int = 0
    seed: int = 0
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)

    # derived quantities -------------------------------------------------
    @property
    def side(self) -> float:
        return self.region_side * self.delay_scale

    @property
    def max_delay(self) -> float:
        return math.hypot(self.side / 2, self.side / 2) / self.sound_speed

    @property
    def slot(self) -> float:
        return self.mac.slot if self.mac.slot is not None else self.max_delay

    def timing(self) -> OfdmTiming:
        return OfdmTiming(header_duration=self.phy.header_duration, frame_overhead=self.phy.frame_overhead)

    def modes(self) -> tuple[TransmissionMode, ...]:
        if self.phy.modes is None:
            return MODES
        return tuple(TransmissionMode(int(m["index"]), int(m["bits_per_symbol"]), int(m["diversity_order"]),
                                      Fraction(str(m["coding_rate"])), float(m["data_rate"]))
                     for m in self.phy.modes)

    def t_data(self, mode: int) -> float:
        return packet_duration(get_mode(mode, self.modes()), self.payload_bytes, self.timing())

    @property
    def pause_duration(self) -> float:
        if self.mac.pause_duration is not None:
            return self.mac.pause_duration
        return 10.0 * self.t_data(1)

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with top-level or dotted (``"mac.cw_min"``) fields replaced."""
        cfg = from_dict(to_dict(self))
        for key, value in changes.items():
            obj = cfg
            *path, name = key.replace("__", ".").split(".")
            for p in path:
                obj = getattr(obj, p)
            if not hasattr(obj, name):
                raise ConfigError(f"unknown field {key!r}")
            setattr(obj, name, value)
        validate(cfg)
        return cfg


def to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


def effective_dict(cfg: ScenarioConfig) -> dict:
    """Config with every automatic default resolved, for echoing next to results."""
    d = to_dict(cfg)
    d["mac"]["slot"] = cfg.slot
    d["mac"]["pause_duration"] = cfg.pause_duration
    if d["phy"]["modes"] is None:
        d["phy"]["modes"] = [
            {"index": m.index, "bits_per_symbol": m.bits_per_symbol, "diversity_order": m.diversity_order,
             "coding_rate": str(m.coding_rate), "data_rate": m.data_rate} for m in cfg.modes()]
    return d


_SECTIONS = {"channel": ChannelConfig, "mac": MacConfig, "phy": PhyConfig}


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}: unknown field")
    kwargs = {}
    for key, value in data.items():
        if cls is ScenarioConfig and key in _SECTIONS:
            value = _build(_SECTIONS[key], value, f"{key}.")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, data, "")
    validate(cfg)
    return cfg


def _check(cond: bool, field_name: str, msg: str):
    if not cond:
        raise ConfigError(f"{field_name}: {msg}")


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate(cfg: ScenarioConfig) -> None:
    _check(isinstance(cfg.node_count, int) and cfg.node_count >= 1, "node_count", "must be an integer >= 1")
    for name in ("region_side", "delay_scale", "sound_speed", "duration"):
        v = getattr(cfg, name)
        _check(_num(v) and v > 0, name, f"must be a positive number, got {v!r}")
    _check(_num(cfg.offered_load) and cfg.offered_load >= 0, "offered_load", "must be >= 0")
    _check(isinstance(cfg.payload_bytes, int) and cfg.payload_bytes > 0, "payload_bytes", "must be a positive integer")
    _check(cfg.mode_policy in ("adaptive", "fixed"), "mode_policy", "must be 'adaptive' or 'fixed'")
    _check(isinstance(cfg.warmup_packets, int) and cfg.warmup_packets >= 0, "warmup_packets", "must be >= 0")
    _check(isinstance(cfg.seed, int) and 0 <= cfg.seed < 2**64, "seed", "must be an unsigned 64-bit integer")

    ch = cfg.channel
    _check(ch.esnr_db is None or _num(ch.esnr_db), "channel.esnr_db", "must be a number or null")
    _check(ch.esnr_db is not None or ch.esnr_trace is not None or ch.per_link, "channel.esnr_db",
           "no ESNR configured (set esnr_db, esnr_trace or per_link)")
    _check(ch.forced_per is None or (_num(ch.forced_per) and 0.0 <= ch.forced_per <= 1.0),
           "channel.forced_per", f"must lie in [0, 1], got {ch.forced_per!r}")
    _check(_num(ch.jitter_std) and ch.jitter_std >= 0, "channel.jitter_std", "must be >= 0")
    _check(ch.detection_prob is None or (_num(ch.detection_prob) and 0 <= ch.detection_prob <= 1),
           "channel.detection_prob", "must lie in [0, 1]")
    for name in ("transmit_power", "center_frequency"):
        _check(_num(getattr(ch, name)) and getattr(ch, name) > 0, f"channel.{name}", "must be positive")

    m = cfg.mac
    _check(isinstance(m.cw_min, int) and m.cw_min >= 1, "mac.cw_min", "must be an integer >= 1")
    _check(isinstance(m.cw_max, int) and m.cw_max >= m.cw_min, "mac.cw_max", "must be an integer >= cw_min")
    _check(m.slot is None or (_num(m.slot) and m.slot > 0), "mac.slot", "must be positive or null")
    _check(isinstance(m.max_retries, int) and m.max_retries >= 0, "mac.max_retries", "must be >= 0")
    for name in ("t_ack", "t_nack", "t_probe", "t_other", "timeout_margin"):
        _check(_num(getattr(m, name)) and getattr(m, name) >= 0, f"mac.{name}", "must be >= 0")
    _check(m.pause_duration is None or (_num(m.pause_duration) and m.pause_duration > 0),
           "mac.pause_duration", "must be positive or null")

    p = cfg.phy
    _check(_num(p.per_slope) and p.per_slope > 0, "phy.per_slope", "must be positive")
    _check(_num(p.per_target) and 0 < p.per_target < 1, "phy.per_target", "must lie in (0, 1)")
    _check(len(p.thresholds) == 6 and all(a < b for a, b in zip(p.thresholds, p.thresholds[1:])),
           "phy.thresholds", "must be 6 strictly increasing ESNR values")
    try:
        modes = cfg.modes()
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"phy.modes: malformed mode row ({exc})") from None
    _check(sorted(md.index for md in modes) == list(range(1, 7)), "phy.modes", "must define modes 1..6")
    _check(cfg.mode_policy != "fixed" or cfg.fixed_mode in range(1, 7), "fixed_mode", "must be in 1..6")


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from None
    return from_dict(data)
