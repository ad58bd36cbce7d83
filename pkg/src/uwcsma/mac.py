"""Modified CSMA/CA with PHY-informed loss disambiguation.

No RTS/CTS: a sender learns the channel is busy from the NAV field of an
overheard header. Receiver feedback distinguishes

* ACK(esnr)  - delivered; the ESNR picks the next transmission mode,
* NACK1      - lone preamble, payload lost to the channel: retransmit at once
               one mode lower,
* NACK2      - collision detected: binary exponential backoff, same mode,
* timeout    - nothing heard: treated like NACK2.

Both ``sender_step`` and ``receiver_step`` are pure; the network simulation
executes the returned actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

from .phy import DEFAULT_THRESHOLDS, ModeThresholds, select_mode

PHASES = ("idle", "backoff", "deferring", "transmitting", "awaiting_ack", "paused")
SENDER_EVENTS = ("packet_ready", "channel_busy", "nav_expired", "backoff_zero", "tx_end",
                 "ack", "nack1", "nack2", "timeout", "pause_expired")


class ProtocolViolation(RuntimeError):
    """An event arrived in a phase where the protocol does not allow it."""


@dataclass(frozen=True)
class HeaderInfo:
    source: int
    destination: int
    mode: int
    payload_bytes: int
    busy_duration: float


@dataclass(frozen=True)
class Packet:
    packet_id: int
    source: int
    created: float
    payload_bytes: int


@dataclass(frozen=True)
class MacParams:
    cw_min: int = 4
    cw_max: int = 64
    slot: float = 0.4714
    max_retries: int = 3
    adaptive: bool = True
    fixed_mode: int = 1
    # False gives the layered baseline: the receiver never sends NACKs
    cross_layer: bool = True
    t_ack: float = 0.5
    t_nack: float = 0.5
    t_probe: float = 0.5
    t_other: float = 0.1
    max_delay: float = 0.4714
    timeout_margin: float = 0.1
    pause_duration: float = 53.6
    thresholds: ModeThresholds = DEFAULT_THRESHOLDS


@dataclass(frozen=True)
class MacNodeState:
    node_id: int
    phase: str = "idle"
    cw: int = 4
    backoff_remaining: int | None = None  # None: no countdown drawn
    backoff_started: float | None = None
    nav_until: float = 0.0
    retries: int = 0
    current_mode: int = 1
    last_esnr: float | None = None
    queue: tuple = ()
    measured_delay: float = 0.0
    probing: bool = False
    immediate: bool = False  # NACK1 retransmission waiting only for the NAV


def initial_state(node_id: int, params: MacParams, measured_delay: float = 0.0) -> MacNodeState:
    mode = 1 if params.adaptive else params.fixed_mode
    return MacNodeState(node_id, cw=params.cw_min, current_mode=mode, measured_delay=measured_delay)


@dataclass(frozen=True)
class MacEvent:
    kind: str
    packet: Packet | None = None
    esnr: float | None = None
    header: HeaderInfo | None = None
    rx_start: float | None = None


@dataclass(frozen=True)
class MacAction:
    """``kind`` is one of start_transmission, set_timer, cancel_timer,
    set_nav, drop_packet, record_metric."""

    kind: str
    timer: str | None = None
    delay: float | None = None
    until: float | None = None
    frame_kind: str | None = None
    mode: int | None = None
    packet: Packet | None = None
    busy_duration: float | None = None
    metric: str | None = None
    value: Any = None


def t_busy(t_data: float, t_ack: float, t_delay: float, t_other: float) -> float:
    """Channel reservation announced in the header NAV field."""
    for v in (t_data, t_ack, t_delay, t_other):
        if v < 0:
            raise ValueError("durations must be non-negative")
    return t_data + t_ack + 2.0 * t_delay + t_other


def timeout_value(t_data: float, max_delay: float, t_ack: float, t_other: float,
                  margin: float = 0.1) -> float:
    """ACK wait, measured from the start of the sender's transmission."""
    for v in (t_data, max_delay, t_ack, t_other):
        if v < 0:
            raise ValueError("durations must be non-negative")
    return t_data + 2.0 * max_delay + t_ack + t_other + margin


def _illegal(state: MacNodeState, event: MacEvent):
    raise ProtocolViolation(f"node {state.node_id}: event {event.kind!r} in phase {state.phase!r}")


def _draw(rng, cw: int) -> int:
    return int(rng.integers(0, cw + 1))


def _contend(state: MacNodeState, now: float, params: MacParams, rng, actions: list) -> MacNodeState:
    """Enter backoff (or deferral under an active NAV) for the head-of-line frame."""
    if not state.queue and not state.probing:
        return replace(state, phase="idle", backoff_remaining=None, backoff_started=None)
    remaining = state.backoff_remaining
    if remaining is None:
        remaining = _draw(rng, state.cw)
    if now < state.nav_until:
        actions.append(MacAction("set_timer", timer="nav", delay=state.nav_until - now))
        return replace(state, phase="deferring", backoff_remaining=remaining, backoff_started=None)
    actions.append(MacAction("set_timer", timer="backoff", delay=remaining * params.slot))
    return replace(state, phase="backoff", backoff_remaining=remaining, backoff_started=now)


def _transmit(state: MacNodeState, params: MacParams, t_data_of, actions: list) -> MacNodeState:
    if state.probing:
        kind, dur, mode, pkt = "CONTROL", params.t_probe, 0, None
    else:
        kind, mode, pkt = "DATA", state.current_mode, state.queue[0]
        dur = t_data_of(mode, pkt.payload_bytes)
    busy = t_busy(dur, params.t_ack, state.measured_delay, params.t_other)
    actions.append(MacAction("start_transmission", frame_kind=kind, mode=mode, packet=pkt,
                             delay=dur, busy_duration=busy))
    actions.append(MacAction("set_timer", timer="timeout",
                             delay=timeout_value(dur, params.max_delay, params.t_ack, params.t_other,
                                                 params.timeout_margin)))
    return replace(state, phase="transmitting", backoff_remaining=None, backoff_started=None,
                   immediate=False)


def _next_packet(state: MacNodeState, now, params, rng, actions) -> MacNodeState:
    state = replace(state, retries=0, cw=params.cw_min, backoff_remaining=None, immediate=False)
    if state.current_mode == 0:
        actions.append(MacAction("set_timer", timer="pause", delay=params.pause_duration))
        return replace(state, phase="paused", backoff_started=None)
    return _contend(state, now, params, rng, actions)


def _fail(state: MacNodeState, now, params, rng, actions, lower_mode: bool) -> MacNodeState:
    retries = state.retries + 1
    if retries > params.max_retries:
        pkt = state.queue[0]
        actions.append(MacAction("drop_packet", packet=pkt))
        return _next_packet(replace(state, queue=state.queue[1:]), now, params, rng, actions)
    actions.append(MacAction("record_metric", metric="retransmission", value=retries))
    if lower_mode:
        mode = max(1, state.current_mode - 1) if params.adaptive else state.current_mode
        state = replace(state, retries=retries, current_mode=mode, backoff_remaining=0)
        if now < state.nav_until:
            actions.append(MacAction("set_timer", timer="nav", delay=state.nav_until - now))
            return replace(state, phase="deferring", immediate=True, backoff_started=None)
        return state
    cw = min(2 * state.cw, params.cw_max)
    state = replace(state, retries=retries, cw=cw, backoff_remaining=_draw(rng, cw))
    return _contend(state, now, params, rng, actions)


def sender_step(state: MacNodeState, event: MacEvent, rng, params: MacParams, now: float,
                t_data_of) -> tuple[MacNodeState, list[MacAction]]:
    """Advance one sender by one event.

    ``t_data_of(mode, payload_bytes)`` gives the DATA airtime; ``rng`` draws
    backoff slots. Returns the new state and the actions to execute, in order.
    """
    phase = state.phase
    kind = event.kind
    actions: list[MacAction] = []

    if kind == "packet_ready":
        state = replace(state, queue=state.queue + (event.packet,))
        if phase == "idle":
            state = _contend(state, now, params, rng, actions)
        return state, actions

    if kind == "channel_busy":
        if phase == "transmitting":
            _illegal(state, event)  # half-duplex: a transmitting node hears nothing
        until = max(state.nav_until, event.rx_start + event.header.busy_duration)
        state = replace(state, nav_until=until)
        actions.append(MacAction("set_nav", until=until))
        if phase == "backoff":
            # freeze: slots already counted down are kept
            elapsed = int(math.floor((now - state.backoff_started) / params.slot + 1e-9))
            remaining = max(0, state.backoff_remaining - elapsed)
            actions.append(MacAction("cancel_timer", timer="backoff"))
            if now < until:
                actions.append(MacAction("set_timer", timer="nav", delay=until - now))
                state = replace(state, phase="deferring", backoff_remaining=remaining, backoff_started=None)
            else:
                state = replace(state, backoff_remaining=remaining)
                state = _contend(state, now, params, rng, actions)
        elif phase == "deferring" and until > now:
            actions.append(MacAction("set_timer", timer="nav", delay=until - now))
        return state, actions

    if kind == "nav_expired":
        if phase != "deferring":
            _illegal(state, event)
        if now < state.nav_until:
            actions.append(MacAction("set_timer", timer="nav", delay=state.nav_until - now))
            return state, actions
        if state.immediate:
            return _transmit(state, params, t_data_of, actions), actions
        return _contend(state, now, params, rng, actions), actions

    if kind == "backoff_zero":
        if phase != "backoff":
            _illegal(state, event)
        return _transmit(state, params, t_data_of, actions), actions

    if kind == "tx_end":
        if phase != "transmitting":
            _illegal(state, event)
        return replace(state, phase="awaiting_ack"), actions

    if kind == "pause_expired":
        if phase != "paused":
            _illegal(state, event)
        # probe the channel with a short control frame before resuming data
        state = replace(state, probing=True, backoff_remaining=None)
        return _contend(state, now, params, rng, actions), actions

    if kind in ("ack", "nack1", "nack2", "timeout"):
        if phase != "awaiting_ack":
            _illegal(state, event)
        if kind != "timeout":
            actions.append(MacAction("cancel_timer", timer="timeout"))

        if state.probing:
            if kind in ("nack1", "nack2"):
                _illegal(state, event)
            state = replace(state, probing=False)
            if kind == "ack":
                state = replace(state, last_esnr=event.esnr,
                                current_mode=select_mode(event.esnr, params.thresholds))
            return _next_packet(state, now, params, rng, actions), actions

        if kind == "ack":
            pkt = state.queue[0]
            actions.append(MacAction("record_metric", metric="delivered", packet=pkt,
                                     mode=state.current_mode, value=event.esnr))
            mode = select_mode(event.esnr, params.thresholds) if params.adaptive else state.current_mode
            state = replace(state, queue=state.queue[1:], last_esnr=event.esnr, current_mode=mode)
            return _next_packet(state, now, params, rng, actions), actions
        if kind == "nack1":
            state = _fail(state, now, params, rng, actions, lower_mode=True)
            if state.phase == "awaiting_ack":
                state = _transmit(state, params, t_data_of, actions)
            return state, actions
        return _fail(state, now, params, rng, actions, lower_mode=False), actions

    raise ProtocolViolation(f"unknown event {kind!r}")


@dataclass(frozen=True)
class RxOutcome:
    """Reception outcome at the sink for one frame (or overlap group)."""

    kind: str  # decoded | preamble_only | collision_detected | missed
    esnr: float | None = None
    senders: tuple = ()


@dataclass(frozen=True)
class Response:
    kind: str  # ACK | NACK1 | NACK2 | CONTROL
    addressee: int | None  # None = broadcast
    esnr: float | None = None
    involved: tuple = field(default_factory=tuple)


def receiver_step(outcome: RxOutcome, sender: int, cross_layer: bool = True,
                  probe: bool = False) -> Response | None:
    """Sink reaction to a reception outcome; ``None`` is silence."""
    k = outcome.kind
    if k == "decoded":
        return Response("CONTROL" if probe else "ACK", sender, outcome.esnr)
    if k == "missed" or not cross_layer or probe:
        return None
    if k == "preamble_only":
        return Response("NACK1", sender)
    if k == "collision_detected":
        return Response("NACK2", None, involved=tuple(outcome.senders))
    raise ValueError(f"unknown outcome {k!r}")
