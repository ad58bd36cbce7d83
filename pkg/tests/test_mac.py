from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwcsma.mac import (PHASES, SENDER_EVENTS, HeaderInfo, MacEvent, MacNodeState, MacParams, Packet,
                        ProtocolViolation, Response, RxOutcome, initial_state, receiver_step,
                        sender_step, t_busy, timeout_value)

P = MacParams()
PKT = Packet(0, 1, 0.0, 400)
HDR = HeaderInfo(source=2, destination=0, mode=1, payload_bytes=400, busy_duration=7.0)


def t_data(mode, nbytes):
    return {1: 5.36, 2: 3.424, 3: 2.456, 4: 2.456, 5: 1.488, 6: 1.488}[mode]


def rng():
    return np.random.default_rng(0)


def state(phase, **kw):
    base = dict(node_id=1, phase=phase, cw=P.cw_min, queue=(PKT,))
    if phase == "backoff":
        base.update(backoff_remaining=3, backoff_started=0.0)
    if phase == "deferring":
        base.update(backoff_remaining=2, nav_until=5.0)
    if phase == "idle":
        base.update(queue=())
    base.update(kw)
    return MacNodeState(**base)


def event(kind):
    return MacEvent(kind, packet=PKT, esnr=8.0, header=HDR, rx_start=0.5)


def step(s, kind, now=1.0, params=P):
    return sender_step(s, event(kind), rng(), params, now, t_data)


def kinds(actions):
    return [(a.kind, a.timer or a.frame_kind or a.metric) for a in actions]


# (phase, event) -> resulting phase, or None when the pair is illegal
TABLE = {
    ("idle", "packet_ready"): "backoff",
    ("idle", "channel_busy"): "idle",
    ("backoff", "packet_ready"): "backoff",
    ("backoff", "channel_busy"): "deferring",
    ("backoff", "backoff_zero"): "transmitting",
    ("deferring", "packet_ready"): "deferring",
    ("deferring", "channel_busy"): "deferring",
    ("deferring", "nav_expired"): "backoff",
    ("transmitting", "packet_ready"): "transmitting",
    ("transmitting", "tx_end"): "awaiting_ack",
    ("awaiting_ack", "packet_ready"): "awaiting_ack",
    ("awaiting_ack", "channel_busy"): "awaiting_ack",
    ("awaiting_ack", "ack"): "idle",  # queue holds a single packet
    ("awaiting_ack", "nack1"): "transmitting",
    ("awaiting_ack", "nack2"): "backoff",
    ("awaiting_ack", "timeout"): "backoff",
    ("paused", "packet_ready"): "paused",
    ("paused", "channel_busy"): "paused",
    ("paused", "pause_expired"): "backoff",
}


@pytest.mark.parametrize("phase", PHASES)
@pytest.mark.parametrize("kind", SENDER_EVENTS)
def test_transition_table(phase, kind):
    s = state(phase)
    expected = TABLE.get((phase, kind))
    if expected is None:
        with pytest.raises(ProtocolViolation):
            step(s, kind, now=1.0)
    else:
        new, _ = step(s, kind, now=1.0 if kind != "nav_expired" else 6.0)
        assert new.phase == expected


def test_case_one_success_and_mode_update():
    s, acts = step(state("awaiting_ack"), "ack")
    assert ("record_metric", "delivered") in kinds(acts)
    assert s.current_mode == 4 and s.cw == P.cw_min and s.retries == 0 and s.queue == ()


def test_ack_with_mode_zero_esnr_pauses():
    s = state("awaiting_ack", queue=(PKT, PKT))
    new, acts = sender_step(s, MacEvent("ack", esnr=-3.0), rng(), P, 1.0, t_data)
    assert new.phase == "paused"
    assert ("set_timer", "pause") in kinds(acts)


def test_pause_ends_with_probe_and_control_reply_sets_mode():
    s = state("paused", current_mode=0)
    s, _ = step(s, "pause_expired")
    assert s.probing
    s, acts = sender_step(s, MacEvent("backoff_zero"), rng(), P, 3.0, t_data)
    tx = [a for a in acts if a.kind == "start_transmission"][0]
    assert tx.frame_kind == "CONTROL" and tx.delay == P.t_probe
    s, _ = sender_step(s, MacEvent("tx_end"), rng(), P, 3.5, t_data)
    s, _ = sender_step(s, MacEvent("ack", esnr=10.0), rng(), P, 4.5, t_data)
    assert not s.probing and s.current_mode == 5 and s.phase == "backoff"


def test_probe_timeout_repauses_at_mode_zero():
    s = state("awaiting_ack", current_mode=0, probing=True)
    s, acts = step(s, "timeout")
    assert s.phase == "paused"
    with pytest.raises(ProtocolViolation):
        step(state("awaiting_ack", probing=True), "nack1")


def test_nack1_retransmits_immediately_at_lower_mode():
    s = state("awaiting_ack", current_mode=3)
    new, acts = step(s, "nack1")
    assert new.phase == "transmitting" and new.current_mode == 2 and new.retries == 1
    assert new.cw == P.cw_min
    assert not any(a.timer == "backoff" for a in acts)
    tx = [a for a in acts if a.kind == "start_transmission"][0]
    assert tx.mode == 2


def test_nack1_floor_at_mode_one():
    new, _ = step(state("awaiting_ack", current_mode=1), "nack1")
    assert new.current_mode == 1


def test_nack1_under_nav_defers_without_backoff():
    s = state("awaiting_ack", current_mode=3, nav_until=4.0)
    new, acts = step(s, "nack1", now=1.0)
    assert new.phase == "deferring" and new.immediate and new.backoff_remaining == 0
    new, acts = sender_step(new, MacEvent("nav_expired"), rng(), P, 4.0, t_data)
    assert new.phase == "transmitting"
    assert not any(a.timer == "backoff" for a in acts)


@pytest.mark.parametrize("kind", ["nack2", "timeout"])
def test_collision_path_doubles_cw_up_to_max(kind):
    s = state("awaiting_ack", cw=4)
    seen = []
    for _ in range(3):
        s, acts = step(s, kind)
        seen.append(s.cw)
        assert s.phase == "backoff" and s.current_mode == 1
        s = replace(s, phase="awaiting_ack")
    assert seen == [8, 16, 32]
    capped, _ = step(state("awaiting_ack", cw=64), kind)
    assert capped.cw == 64


def test_fourth_failure_drops_packet():
    s = state("awaiting_ack")
    drops = 0
    for i in range(4):
        s, acts = step(s, "timeout")
        drops += sum(a.kind == "drop_packet" for a in acts)
        if i < 3:
            assert drops == 0 and s.retries == i + 1
            s = replace(s, phase="awaiting_ack")
    assert drops == 1 and s.queue == () and s.phase == "idle" and s.cw == P.cw_min


def test_backoff_freeze_keeps_counted_slots():
    s = state("backoff", backoff_remaining=5, backoff_started=0.0)
    now = 2.5 * P.slot
    new, acts = sender_step(s, MacEvent("channel_busy", header=HDR, rx_start=now), rng(), P, now, t_data)
    assert new.phase == "deferring" and new.backoff_remaining == 3
    assert new.nav_until == pytest.approx(now + 7.0)
    new, acts = sender_step(new, MacEvent("nav_expired"), rng(), P, now + 7.0, t_data)
    assert new.phase == "backoff"
    timer = [a for a in acts if a.timer == "backoff"][0]
    assert timer.delay == pytest.approx(3 * P.slot)


def test_transmitting_node_cannot_overhear():
    with pytest.raises(ProtocolViolation):
        step(state("transmitting"), "channel_busy")


def test_fixed_mode_never_adapts():
    p = replace(P, adaptive=False, fixed_mode=5)
    s = initial_state(1, p)
    assert s.current_mode == 5
    s = replace(s, phase="awaiting_ack", queue=(PKT,))
    new, _ = sender_step(s, MacEvent("ack", esnr=-5.0), rng(), p, 1.0, t_data)
    assert new.current_mode == 5 and new.phase == "idle"
    new, _ = sender_step(s, MacEvent("nack1"), rng(), p, 1.0, t_data)
    assert new.current_mode == 5


def test_header_busy_and_timeout():
    assert t_busy(5.36, 0.5, 0.4, 0.1) == pytest.approx(6.76)
    assert timeout_value(5.36, 0.4714, 0.5, 0.1) == pytest.approx(5.36 + 0.9428 + 0.6 + 0.1)
    with pytest.raises(ValueError):
        t_busy(-1, 0, 0, 0)


def test_transmission_announces_busy_duration():
    s = state("backoff", measured_delay=0.3)
    _, acts = step(s, "backoff_zero")
    tx = acts[0]
    assert tx.kind == "start_transmission"
    assert tx.busy_duration == pytest.approx(5.36 + 0.5 + 0.6 + 0.1)


@pytest.mark.parametrize("outcome,expected", [
    (RxOutcome("decoded", 12.0), Response("ACK", 3, 12.0)),
    (RxOutcome("preamble_only"), Response("NACK1", 3)),
    (RxOutcome("collision_detected", senders=((3, 0), (4, 1))), Response("NACK2", None, involved=((3, 0), (4, 1)))),
    (RxOutcome("missed"), None),
])
def test_receiver_cases(outcome, expected):
    assert receiver_step(outcome, 3) == expected


def test_receiver_layered_baseline_is_silent_on_failure():
    for k in ("preamble_only", "collision_detected", "missed"):
        assert receiver_step(RxOutcome(k), 1, cross_layer=False) is None
    assert receiver_step(RxOutcome("decoded", 4.0), 1, cross_layer=False).kind == "ACK"
    assert receiver_step(RxOutcome("decoded", 4.0), 1, probe=True).kind == "CONTROL"
    with pytest.raises(ValueError):
        receiver_step(RxOutcome("weird"), 1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["ack", "nack1", "nack2", "timeout"]), min_size=1, max_size=30),
       st.integers(0, 2**32 - 1))
def test_random_feedback_invariants(feedback, seed):
    r = np.random.default_rng(seed)
    s = initial_state(1, P)
    s, _ = sender_step(s, MacEvent("packet_ready", packet=PKT), r, P, 0.0, t_data)
    s = replace(s, queue=tuple(Packet(i, 1, 0.0, 400) for i in range(40)))
    now = 0.0
    for kind in feedback:
        now += 1.0
        if s.phase in ("backoff",):
            s, _ = sender_step(s, MacEvent("backoff_zero"), r, P, now, t_data)
        if s.phase == "deferring":
            s, _ = sender_step(s, MacEvent("nav_expired"), r, P, max(now, s.nav_until), t_data)
            if s.phase == "backoff":
                s, _ = sender_step(s, MacEvent("backoff_zero"), r, P, now, t_data)
        if s.phase == "transmitting":
            s, _ = sender_step(s, MacEvent("tx_end"), r, P, now, t_data)
        if s.phase != "awaiting_ack":
            break
        ev = MacEvent(kind, esnr=float(r.uniform(0, 20)))
        s, acts = sender_step(s, ev, r, P, now, t_data)
        assert P.cw_min <= s.cw <= P.cw_max
        assert 0 <= s.retries <= P.max_retries
        assert 1 <= s.current_mode <= 6
        if s.backoff_remaining is not None:
            assert 0 <= s.backoff_remaining <= s.cw
