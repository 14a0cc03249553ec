"""LTE-like path model: fixed sender/core hops plus a disturbed receiver last mile.

A path is three delay segments in series.  The receiver last mile owns a
base-station FIFO drained at link capacity, a signal-strength process, and
disturbance events (signal drops, cell handovers) whose latency impact is a
multiplicative spike that decays linearly back to 1.0 over a recovery time.
"""
from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
import random

from .engine import US_PER_S, draw, us_from_ms, us_from_s

SPIKE_STEP_DB = 2.0
SPIKE_BASE = 1.7
SPIKE_CAP = 10.0
HANDOVER_SPIKE = 10.0
NOISE_FLOOR_DBM = -110.0
INTERFERENCE_LOSS_THRESHOLD = 0.05
SIGNAL_MIN_DBM = -120.0
SIGNAL_MAX_DBM = -40.0
# A drop holds at its floor this long before ramping back, so a 1 Hz sampler
# always catches the full magnitude at least once.
SIGNAL_HOLD_S = 1.5
TRUTH_WINDOW_US = US_PER_S  # rolling window for utilization / loss truth


def spike_factor(magnitude_db: float, cap: float = SPIKE_CAP) -> float:
    """Latency spike for a signal drop: 1.7x per 2 dB, saturating at the cap."""
    if magnitude_db < 0:
        raise ValueError(f"drop magnitude must be >= 0 dB, got {magnitude_db}")
    return min(SPIKE_BASE ** (magnitude_db / SPIKE_STEP_DB), cap)


@dataclass
class NetworkEvent:
    kind: str  # "signal_drop" | "handover"
    path_id: int
    at_us: int
    recovery_s: float
    magnitude_db: float = 0.0  # signal_drop only
    new_bsid: str = ""  # handover only


@dataclass
class MobilityProfile:
    """Per-path disturbance rates; all rates are events per second on one path."""

    name: str
    drop_rate: float = 0.0
    handover_follow_prob: float = 0.0
    standalone_handover_rate: float = 0.0
    small_drop_prob: float = 1.0  # P(magnitude <= 8 dB)
    small_drop_levels: tuple = (2, 4, 6, 8)
    large_drop_levels: tuple = (10, 12, 14)
    recovery_min_s: float = 2.0
    recovery_max_s: float = 7.0
    follow_delay_max_s: float = 2.0


# Five-minute per-path budgets: walking 20 events (13.5 drops + 6.5 handovers),
# driving 27 (16.8 + 10.2), i.e. +35% events and +57% handovers overall.
STATIC = MobilityProfile("static")
WALKING = MobilityProfile(
    "walking",
    drop_rate=13.5 / 300.0,
    handover_follow_prob=0.43,
    standalone_handover_rate=0.7 / 300.0,
    small_drop_prob=0.69,
    recovery_min_s=2.0,
    recovery_max_s=7.0,
)
DRIVING = MobilityProfile(
    "driving",
    drop_rate=16.8 / 300.0,
    handover_follow_prob=0.52,
    standalone_handover_rate=1.5 / 300.0,
    small_drop_prob=0.25,
    recovery_min_s=4.0,
    recovery_max_s=12.0,
)

PROFILES = {"static": STATIC, "walking": WALKING, "driving": DRIVING}


def generate_events(
    profile: MobilityProfile,
    horizon_s: float,
    rng: random.Random,
    path_id: int = 1,
    rate_scale: float = 1.0,
    bsid_start: int = 0,
) -> list[NetworkEvent]:
    """Draw the disturbance timeline for one path over [0, horizon).

    Drops arrive as a Poisson process; each may be followed by a handover
    0..follow_delay_max_s later; standalone handovers form a second Poisson
    process.  Events are returned time-ordered with consecutive cell ids.
    """
    if rate_scale < 0:
        raise ValueError(f"rate_scale must be >= 0, got {rate_scale}")
    events: list[NetworkEvent] = []
    horizon_us = us_from_s(horizon_s)

    def recovery() -> float:
        return draw(rng, ("uniform", profile.recovery_min_s, profile.recovery_max_s))

    drop_rate = profile.drop_rate * rate_scale
    if drop_rate > 0:
        t = 0.0
        while True:
            t += draw(rng, ("exponential", drop_rate))
            at = us_from_s(t)
            if at >= horizon_us:
                break
            small = draw(rng, ("bernoulli", profile.small_drop_prob))
            levels = profile.small_drop_levels if small else profile.large_drop_levels
            mag = levels[draw(rng, ("categorical", [1.0] * len(levels)))]
            events.append(
                NetworkEvent("signal_drop", path_id, at, recovery(), magnitude_db=mag)
            )
            if draw(rng, ("bernoulli", profile.handover_follow_prob)):
                gap = draw(rng, ("uniform", 0.0, profile.follow_delay_max_s))
                ho_at = at + us_from_s(gap)
                if ho_at < horizon_us:
                    events.append(
                        NetworkEvent("handover", path_id, ho_at, recovery())
                    )
    ho_rate = profile.standalone_handover_rate * rate_scale
    if ho_rate > 0:
        t = 0.0
        while True:
            t += draw(rng, ("exponential", ho_rate))
            at = us_from_s(t)
            if at >= horizon_us:
                break
            events.append(NetworkEvent("handover", path_id, at, recovery()))

    events.sort(key=lambda e: e.at_us)
    seq = bsid_start
    for ev in events:
        if ev.kind == "handover":
            seq += 1
            ev.new_bsid = f"P{path_id}-{seq}"
    return events


@dataclass
class LastHopTruth:
    """Ground-truth snapshot of one receiver last mile."""

    path_id: int
    signal_dbm: float
    snr_db: float
    channel_utilization: float
    path_loss_pct: float
    queue_len_bytes: int
    interference: bool


class BottleneckQueue:
    """Byte FIFO drained at a fixed capacity; shareable between paths."""

    def __init__(self, capacity_mbps: float, max_bytes: int):
        if capacity_mbps <= 0:
            raise ValueError(f"capacity must be > 0 Mbps, got {capacity_mbps}")
        self.capacity_mbps = capacity_mbps
        self.max_bytes = max_bytes
        self.free_at_us = 0
        self.entries: deque[tuple[int, int]] = deque()  # (departure_us, size)
        self.pending_bytes = 0
        # disjoint, time-ordered service intervals with a running total of
        # busy microseconds, so any window's busy time is two lookups
        self._busy_starts: list[int] = []
        self._busy_ends: list[int] = []
        self._busy_cums: list[int] = []
        self.bytes_in = 0
        self.bytes_out = 0
        self.bytes_tail_dropped = 0

    def prune(self, now_us: int) -> None:
        entries = self.entries
        while entries and entries[0][0] <= now_us:
            _, size = entries.popleft()
            self.bytes_out += size
            self.pending_bytes -= size

    def occupancy(self, now_us: int) -> int:
        self.prune(now_us)
        return self.pending_bytes

    def _busy_before(self, t_us: int) -> int:
        """Total busy microseconds accumulated strictly before t_us."""
        i = bisect.bisect_left(self._busy_ends, t_us)
        total = self._busy_cums[i - 1] if i > 0 else 0
        if i < len(self._busy_starts) and self._busy_starts[i] < t_us:
            total += t_us - self._busy_starts[i]
        return total

    def utilization(self, now_us: int) -> float:
        """Busy fraction of the last rolling second."""
        if not self._busy_ends:
            return 0.0
        busy = self._busy_before(now_us) - self._busy_before(
            now_us - TRUTH_WINDOW_US
        )
        return min(1.0, busy / TRUTH_WINDOW_US)

    def offer(
        self, size: int, arrive_us: int, not_before_us: int, rate_scale: float
    ) -> int | None:
        """Enqueue size bytes arriving at arrive_us; returns departure time or
        None on tail drop.  rate_scale < 1 models airtime wasted on link-layer
        retries while the hop is error-prone."""
        if self.occupancy(arrive_us) + size > self.max_bytes:
            self.bytes_tail_dropped += size
            return None
        start = max(arrive_us, self.free_at_us, not_before_us)
        service = size * 8 / (self.capacity_mbps * max(rate_scale, 1e-6))
        depart = start + max(1, round(service))
        self.free_at_us = depart
        self.entries.append((depart, size))
        self.pending_bytes += size
        prev = self._busy_cums[-1] if self._busy_cums else 0
        self._busy_starts.append(start)
        self._busy_ends.append(depart)
        self._busy_cums.append(prev + (depart - start))
        self.bytes_in += size
        return depart


class LinkPath:
    """One end-to-end path: sender hop + core + LTE-like receiver last mile."""

    def __init__(
        self,
        path_id: int,
        capacity_mbps: float = 16.0,
        sender_ms: float = 2.0,
        core_ms: float = 20.0,
        receiver_ms: float = 5.0,
        bs_queue_bytes: int = 2_000_000,
        loss_prob: float = 0.0,
        signal_dbm: float = -75.0,
        bsid: str | None = None,
        spike_scale: float = 1.0,
        handover_outage_ms: float = 300.0,
        rng: random.Random | None = None,
        queue: BottleneckQueue | None = None,
    ):
        if capacity_mbps <= 0:
            raise ValueError(f"paths[{path_id}].capacity_mbps must be > 0")
        if not 0.0 <= loss_prob <= 1.0:
            raise ValueError(f"paths[{path_id}].loss_prob must be in [0, 1]")
        self.path_id = path_id
        self.capacity_mbps = capacity_mbps
        self.sender_us = us_from_ms(sender_ms)
        self.core_us = us_from_ms(core_ms)
        self.receiver_us = us_from_ms(receiver_ms)
        self.receiver_ms = receiver_ms
        self.loss_prob = loss_prob
        self.base_signal_dbm = signal_dbm
        self.bsid = bsid or f"P{path_id}-0"
        self.spike_scale = spike_scale
        self.handover_outage_us = us_from_ms(handover_outage_ms)
        self.rng = rng or random.Random(0)
        self.queue = queue or BottleneckQueue(capacity_mbps, bs_queue_bytes)
        self.outage_until_us = 0
        self._ho_count = 0
        # active disturbances: (t0_us, recovery_us, peak multiplier)
        self._spikes: list[tuple[int, int, float]] = []
        # active signal drops: (t0_us, recovery_us, magnitude_db)
        self._drops: list[tuple[int, int, float]] = []
        self.applied_events: list[NetworkEvent] = []
        self.bytes_random_dropped = 0
        self.pkts_random_dropped = 0
        self.pkts_offered = 0
        self._recent: list[tuple[int, bool]] = []  # (time_us, lost) for loss truth

    # -- disturbance state ----------------------------------------------------

    def apply_event(self, ev: NetworkEvent, now_us: int) -> None:
        if ev.path_id != self.path_id:
            raise ValueError(
                f"event for path {ev.path_id} applied to path {self.path_id}"
            )
        rec_us = us_from_s(ev.recovery_s)
        if ev.kind == "signal_drop":
            peak = 1.0 + (spike_factor(ev.magnitude_db) - 1.0) * self.spike_scale
            self._spikes.append((now_us, rec_us, peak))
            self._drops.append((now_us, rec_us, ev.magnitude_db))
        elif ev.kind == "handover":
            self._spikes.append((now_us, rec_us, HANDOVER_SPIKE))
            self._drops.clear()  # new cell: signal restarts from baseline
            self._ho_count += 1
            self.bsid = ev.new_bsid or f"P{self.path_id}-{self._ho_count}"
            self.outage_until_us = max(
                self.outage_until_us, now_us + self.handover_outage_us
            )
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
        self.applied_events.append(ev)

    def latency_multiplier(self, now_us: int) -> float:
        """Max over active spikes of the linearly decaying multiplier; 1.0 idle."""
        self._spikes = [s for s in self._spikes if s[0] + s[1] > now_us]
        mult = 1.0
        for t0, rec, peak in self._spikes:
            cur = peak - (peak - 1.0) * (now_us - t0) / rec
            mult = max(mult, cur)
        return mult

    def signal_dbm(self, now_us: int) -> float:
        """Baseline minus active drop residuals (hold, then linear ramp back)."""
        self._drops = [d for d in self._drops if d[0] + d[1] > now_us]
        level = self.base_signal_dbm
        for t0, rec, mag in self._drops:
            held_us = min(us_from_s(SIGNAL_HOLD_S), rec)
            age = now_us - t0
            if age <= held_us:
                level -= mag
            else:
                level -= mag * (1.0 - (age - held_us) / max(rec - held_us, 1))
        return min(SIGNAL_MAX_DBM, max(SIGNAL_MIN_DBM, level))

    # -- packet forwarding ----------------------------------------------------

    def transmit(self, size: int, now_us: int) -> int | None:
        """Send one packet; returns the delivery time at the receiver, or None
        if it was lost (random loss before the queue, or tail drop)."""
        self.pkts_offered += 1
        lost = self.loss_prob > 0 and self.rng.random() < self.loss_prob
        self._recent.append((now_us, lost))
        if lost:
            self.bytes_random_dropped += size
            self.pkts_random_dropped += 1
            return None
        arrive = now_us + self.sender_us + self.core_us
        barrier = self.outage_until_us if self.outage_until_us > arrive else 0
        mult = self.latency_multiplier(now_us)
        # error retries eat airtime; a disturbance also slows radio service,
        # so backlog built during a spike drains over the whole recovery
        rate_scale = (1.0 - self.loss_prob) / mult
        depart = self.queue.offer(size, arrive, barrier, rate_scale)
        if depart is None:
            self._recent[-1] = (now_us, True)
            return None
        return depart + round(self.receiver_us * mult)

    def ack_delay_us(self, now_us: int) -> int:
        """Reverse-direction delay for a (small) ACK leaving the receiver now."""
        wait = max(0, self.outage_until_us - now_us)
        mult = self.latency_multiplier(now_us)
        return wait + round(self.receiver_us * mult) + self.core_us + self.sender_us

    def base_rtt_ms(self) -> float:
        return 2 * (self.sender_us + self.core_us + self.receiver_us) / 1000.0

    def receiver_lasthop_delay_ms(self, now_us: int) -> float:
        """Current one-way receiver last-mile delay including queue backlog."""
        backlog_us = max(0, self.queue.free_at_us - now_us)
        transit_us = self.receiver_us * self.latency_multiplier(now_us)
        return (transit_us + backlog_us) / 1000.0

    # -- ground truth ---------------------------------------------------------

    def last_hop_truth(self, now_us: int) -> LastHopTruth:
        cutoff = now_us - TRUTH_WINDOW_US
        self._recent = [r for r in self._recent if r[0] > cutoff]
        attempts = len(self._recent)
        losses = sum(1 for _, lost in self._recent if lost)
        sig = self.signal_dbm(now_us)
        return LastHopTruth(
            path_id=self.path_id,
            signal_dbm=sig,
            snr_db=sig - NOISE_FLOOR_DBM,
            channel_utilization=self.queue.utilization(now_us),
            path_loss_pct=losses / attempts if attempts else 0.0,
            queue_len_bytes=self.queue.occupancy(now_us),
            interference=(self.loss_prob > INTERFERENCE_LOSS_THRESHOLD)
            or now_us < self.outage_until_us,
        )


def signal_series(
    events: list[NetworkEvent],
    horizon_s: float,
    baseline_dbm: float = -75.0,
    path_id: int = 1,
    tick_s: float = 1.0,
) -> list[tuple[float, int, float, str]]:
    """Sample the signal process implied by an event list at a fixed tick.

    Returns (time_s, path_id, rssi_dbm, bsid) rows, the same shape the live
    sampler logs.  Used to synthesize labeled traces without a full run.
    """
    link = LinkPath(path_id, signal_dbm=baseline_dbm)
    rows = []
    pending = sorted(events, key=lambda e: e.at_us)
    i = 0
    t = 0.0
    while t < horizon_s:
        now_us = us_from_s(t)
        while i < len(pending) and pending[i].at_us <= now_us:
            link.apply_event(pending[i], pending[i].at_us)
            i += 1
        rows.append((t, path_id, round(link.signal_dbm(now_us), 1), link.bsid))
        t += tick_s
    return rows
