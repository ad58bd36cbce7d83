"""Star-network simulation: N sources around a central sink."""

from __future__ import annotations

import csv
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .acoustics import LinkBudgetParams, link_snr
from .config import ScenarioConfig
from .engine import Simulator, rng_stream
from .mac import (HeaderInfo, MacEvent, MacParams, Packet, initial_state, receiver_step,
                  sender_step)
from .medium import (AirFrame, ChannelState, ControlFrameGuard, DetectionModel, EsnrProcess,
                     SinkArrival, overlaps, propagate, resolve_reception)
from .phy import ModeThresholds, PerParams

SINK = 0
TRAFFIC_STREAM = 0
MEDIUM_STREAM = 1
PLACEMENT_STREAM = 2
NODE_STREAM_BASE = 16

_TIMER_EVENTS = {"backoff": "backoff_zero", "nav": "nav_expired", "timeout": "timeout",
                 "pause": "pause_expired"}


@dataclass
class RunMetrics:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    collisions: int = 0
    retransmissions: int = 0
    delivered_bits: int = 0
    sim_time: float = 0.0
    mode_usage: Counter = field(default_factory=Counter)
    # measurement window after warm-up (equal to the totals when warm-up is 0)
    window_delivered: int = 0
    window_bits: int = 0
    window_airtime: float = 0.0
    window_time: float = 0.0
    mean_delay: float = 0.0  # node-to-sink, averaged over nodes

    def conserved(self) -> bool:
        return self.delivered + self.dropped + self.in_flight == self.generated


def place_nodes(cfg: ScenarioConfig) -> np.ndarray:
    """Sink at the centre of the square, sources uniform over it."""
    rng = rng_stream(cfg.seed, PLACEMENT_STREAM)
    side = cfg.side
    pos = np.empty((cfg.node_count + 1, 2))
    pos[SINK] = (side / 2, side / 2)
    pos[1:] = rng.uniform(0.0, side, size=(cfg.node_count, 2))
    return pos


def build_channel(cfg: ScenarioConfig) -> ChannelState:
    ch = cfg.channel
    default = None
    if ch.esnr_trace is not None:
        default = EsnrProcess(ch.esnr_trace)
    elif ch.esnr_db is not None:
        default = EsnrProcess(ch.esnr_db)
    per_link = {int(k): EsnrProcess(v) for k, v in ch.per_link.items()}
    per = PerParams(cfg.phy.per_target, cfg.phy.per_slope, ModeThresholds(tuple(cfg.phy.thresholds)))
    return ChannelState(default, per_link, ch.jitter_std, ch.forced_per, per,
                        DetectionModel(constant=ch.detection_prob), ch.capture_first)


def mac_params(cfg: ScenarioConfig) -> MacParams:
    m = cfg.mac
    return MacParams(cw_min=m.cw_min, cw_max=m.cw_max, slot=cfg.slot, max_retries=m.max_retries,
                     adaptive=cfg.mode_policy == "adaptive", fixed_mode=cfg.fixed_mode,
                     cross_layer=m.cross_layer, t_ack=m.t_ack, t_nack=m.t_nack, t_probe=m.t_probe,
                     t_other=m.t_other, max_delay=cfg.max_delay, timeout_margin=m.timeout_margin,
                     pause_duration=cfg.pause_duration,
                     thresholds=ModeThresholds(tuple(cfg.phy.thresholds)))


class NetworkSimulation:
    def __init__(self, cfg: ScenarioConfig, trace: bool = False):
        self.cfg = cfg
        n = cfg.node_count
        self.positions = place_nodes(cfg)
        d = self.positions[:, None, :] - self.positions[None, :, :]
        self.distances = np.hypot(d[..., 0], d[..., 1])
        self.delays = self.distances / cfg.sound_speed
        self.params = mac_params(cfg)
        self.channel = build_channel(cfg)
        budget = LinkBudgetParams(cfg.channel.transmit_power, cfg.channel.noise_level,
                                  cfg.channel.center_frequency, cfg.sound_speed)
        det = self.channel.detection
        self.p_detect = np.array([[det.probability(link_snr(self.distances[i, j], budget))
                                   for j in range(n + 1)] for i in range(n + 1)])
        self.preamble = cfg.timing().preamble_duration
        self.t_data = lru_cache(maxsize=None)(lambda mode, nbytes: cfg.replace(payload_bytes=nbytes).t_data(mode)
                                              if nbytes != cfg.payload_bytes else cfg.t_data(mode))
        self.horizon = 2.0 * max(max(self.t_data(m.index, cfg.payload_bytes) for m in cfg.modes()),
                                 cfg.mac.t_probe)

        self.sim = Simulator(self._dispatch)
        self.traffic_rng = rng_stream(cfg.seed, TRAFFIC_STREAM)
        self.medium_rng = rng_stream(cfg.seed, MEDIUM_STREAM)
        self.node_rngs = [None] + [rng_stream(cfg.seed, NODE_STREAM_BASE + i) for i in range(1, n + 1)]
        self.states = [None] + [initial_state(i, self.params, float(self.delays[i, SINK]))
                                for i in range(1, n + 1)]
        self.timers: dict = {}
        self.outstanding: list = [None] * (n + 1)
        self.tx_log = [deque(maxlen=4) for _ in range(n + 1)]
        self.rx_starts = [deque() for _ in range(n + 1)]
        self.sink_arrivals: list[SinkArrival] = []
        self.sink_tx: deque = deque()
        self.sink_free_at = 0.0
        self.guard = ControlFrameGuard()
        self.metrics = RunMetrics()
        self.metrics.mean_delay = float(np.mean(self.delays[1:, SINK])) if n else 0.0
        self._frame_id = 0
        self._window_start = 0.0 if cfg.warmup_packets == 0 else None
        self.trace = [] if trace else None
        self.per_node_delivered = Counter()

    # -- driving ---------------------------------------------------------
    def run(self) -> RunMetrics:
        rate = self.cfg.offered_load / self.cfg.node_count
        if rate > 0:
            for node in range(1, self.cfg.node_count + 1):
                self.sim.schedule(self.traffic_rng.exponential(1.0 / rate), payload=("gen", node))
        self.sim.run_until(self.cfg.duration)
        m = self.metrics
        m.sim_time = self.cfg.duration
        m.in_flight = sum(len(s.queue) for s in self.states[1:])
        if self._window_start is None:
            m.window_time = self.cfg.duration
        else:
            m.window_time = self.cfg.duration - self._window_start
        return m

    def _dispatch(self, ev):
        p = ev.payload
        kind = p[0]
        if kind == "timer":
            _, node, name = p
            self.timers.pop((node, name), None)
            if name == "timeout":
                self.outstanding[node] = None
            self._step(node, MacEvent(_TIMER_EVENTS[name]))
        elif kind == "gen":
            self._generate(p[1])
        elif kind == "tx_end":
            self._step(p[1], MacEvent("tx_end"))
        elif kind == "sink_start":
            self._sink_start(p[1])
        elif kind == "sink_end":
            self._sink_end(p[1])
        elif kind == "hdr":
            self._overhear(p[1])
        elif kind == "ctl":
            self._control_arrival(p[1], p[2])
        else:
            raise RuntimeError(f"unknown event {kind!r}")

    def _generate(self, node):
        m = self.metrics
        pkt = Packet(m.generated, node, self.sim.now, self.cfg.payload_bytes)
        m.generated += 1
        self._step(node, MacEvent("packet_ready", packet=pkt))
        rate = self.cfg.offered_load / self.cfg.node_count
        self.sim.schedule_in(self.traffic_rng.exponential(1.0 / rate), payload=("gen", node))

    def _step(self, node, event: MacEvent):
        before = self.states[node]
        after, actions = sender_step(before, event, self.node_rngs[node], self.params, self.sim.now,
                                     self.t_data)
        self.states[node] = after
        if self.trace is not None:
            self.trace.append((self.sim.now, node, before.phase, event.kind, after.phase,
                               ";".join(a.kind + (f":{a.timer}" if a.timer else "") for a in actions)))
        for a in actions:
            k = a.kind
            if k == "set_timer":
                old = self.timers.pop((node, a.timer), None)
                if old is not None:
                    old.cancel()
                self.timers[(node, a.timer)] = self.sim.schedule_in(a.delay, payload=("timer", node, a.timer))
            elif k == "cancel_timer":
                old = self.timers.pop((node, a.timer), None)
                if old is not None:
                    old.cancel()
            elif k == "start_transmission":
                self._transmit(node, a)
            elif k == "drop_packet":
                self.metrics.dropped += 1
            elif k == "record_metric":
                if a.metric == "retransmission":
                    self.metrics.retransmissions += 1
                elif a.metric == "delivered":
                    self._delivered(a)

    def _delivered(self, action):
        m = self.metrics
        m.delivered += 1
        bits = 8 * action.packet.payload_bytes
        m.delivered_bits += bits
        m.mode_usage[action.mode] += 1
        self.per_node_delivered[action.packet.source] += 1
        if self._window_start is None:
            if m.delivered == self.cfg.warmup_packets:
                self._window_start = self.sim.now
            return
        m.window_delivered += 1
        m.window_bits += bits
        m.window_airtime += self.t_data(action.mode, action.packet.payload_bytes)

    # -- medium ----------------------------------------------------------
    def _transmit(self, node, action):
        now = self.sim.now
        self._frame_id += 1
        pkt = action.packet
        nbytes = pkt.payload_bytes if pkt is not None else 0
        header = HeaderInfo(node, SINK, action.mode, nbytes, action.busy_duration)
        frame = AirFrame(action.frame_kind, node, SINK, action.mode, now, action.delay, header, nbytes,
                         self._frame_id, pkt)
        self.outstanding[node] = frame.frame_id
        self.tx_log[node].append((now, frame.tx_end))
        self.sim.schedule(frame.tx_end, payload=("tx_end", node))
        for arr in propagate(frame, self.delays):
            if arr.node == SINK:
                sa = SinkArrival(arr)
                self.sim.schedule(arr.start, payload=("sink_start", sa))
                self.sim.schedule(arr.end, payload=("sink_end", sa))
            else:
                self.rx_starts[arr.node].append((arr.start, frame.frame_id))
                self.sim.schedule(min(arr.start + self.preamble, arr.end), payload=("hdr", arr))

    def _sink_transmitting(self, t0, t1=None):
        if t1 is None:
            return any(s <= t0 < e for s, e in self.sink_tx)
        return any(overlaps(s, e, t0, t1) for s, e in self.sink_tx)

    def _sink_start(self, sa: SinkArrival):
        now = self.sim.now
        cutoff = now - self.horizon
        self.sink_arrivals = [o for o in self.sink_arrivals if o.end >= cutoff]
        while self.sink_tx and self.sink_tx[0][1] < cutoff:
            self.sink_tx.popleft()
        for o in self.sink_arrivals:
            if abs(o.start - sa.start) < self.preamble:
                o.detected = False
                sa.detected = False
        if self._sink_transmitting(sa.start):
            sa.detected = False
            sa.deaf = True
        p = self.p_detect[sa.sender, SINK]
        if p < 1.0 and self.medium_rng.random() >= p:
            sa.detected = False
        self.sink_arrivals.append(sa)

    def _sink_end(self, sa: SinkArrival):
        now = self.sim.now
        if self._sink_transmitting(sa.start, sa.end):
            sa.deaf = True
        group = [o for o in self.sink_arrivals
                 if o is not sa and overlaps(o.start, o.end, sa.start, sa.end)]
        if group:
            self.metrics.collisions += 1
        if sa.notified:
            return
        outcome = resolve_reception(sa, self.sink_arrivals, self.channel, self.medium_rng)
        frame = sa.arrival.frame
        resp = receiver_step(outcome, frame.sender, self.params.cross_layer, probe=frame.kind == "CONTROL")
        if resp is None:
            return
        involved = ()
        if resp.kind == "NACK2":
            members = [sa] + [o for o in group if not o.notified]
            for o in members:
                o.notified = True
            involved = tuple((o.sender, o.arrival.frame.frame_id) for o in members)
        dur = self.params.t_ack if resp.kind in ("ACK", "CONTROL") else self.params.t_nack
        start = max(now + self.params.t_other, self.sink_free_at)
        self._frame_id += 1
        reply = AirFrame(resp.kind, SINK, resp.addressee, 0, start, dur, frame_id=self._frame_id,
                         esnr=resp.esnr, involved=involved or ((frame.sender, frame.frame_id),))
        self.sink_tx.append((start, reply.tx_end))
        self.sink_free_at = reply.tx_end
        for arr in propagate(reply, self.delays):
            self.guard.arrive(arr.node, arr.start, arr.end)
            if any(s == arr.node for s, _ in reply.involved):
                self.sim.schedule(arr.end, payload=("ctl", arr.node, reply))

    def _overhear(self, arr):
        node = arr.node
        frame = arr.frame
        if frame.header is None:
            return
        now = self.sim.now
        if any(overlaps(s, e, arr.start, now + 1e-12) for s, e in self.tx_log[node]):
            return
        starts = self.rx_starts[node]
        while starts and starts[0][0] < now - 2 * self.horizon:
            starts.popleft()
        if any(fid != frame.frame_id and abs(t - arr.start) < self.preamble for t, fid in starts):
            return
        p = self.p_detect[frame.sender, node]
        if p < 1.0 and self.medium_rng.random() >= p:
            return
        self._step(node, MacEvent("channel_busy", header=frame.header, rx_start=arr.start))

    def _control_arrival(self, node, reply: AirFrame):
        fid = next(f for s, f in reply.involved if s == node)
        st = self.states[node]
        if self.outstanding[node] != fid or st.phase != "awaiting_ack":
            return  # stale reply
        self.outstanding[node] = None
        if reply.kind in ("ACK", "CONTROL"):
            self._step(node, MacEvent("ack", esnr=reply.esnr))
        elif reply.kind == "NACK1":
            self._step(node, MacEvent("nack1"))
        else:
            self._step(node, MacEvent("nack2"))

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "node", "phase_before", "event", "phase_after", "actions"])
            for row in self.trace or ():
                w.writerow([repr(row[0]), *row[1:]])


def simulate(cfg: ScenarioConfig, trace: bool = False) -> RunMetrics:
    return NetworkSimulation(cfg, trace).run()
