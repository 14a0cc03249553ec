"""Per-subflow TCP state: RTT estimation, timeout handling, congestion control.

Windows are counted in segments.  Coupled algorithms (lia/olia/balia) see the
connection's other subflows through the `siblings` argument and degenerate to
Reno when a connection has a single subflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

MSS = 1460
INITIAL_CWND = 10.0
DEFAULT_RTO_FLOOR_MS = 200.0
RTO_CAP_MS = 60_000.0
MIN_SSTHRESH = 2.0
DUPACK_THRESHOLD = 3
# delay-based slow-start exit: leave slow start once the smoothed RTT rises a
# clamped fraction above the path floor, but never below this window size
SS_EXIT_MIN_CWND = 16.0
SS_EXIT_MIN_DELAY_MS = 4.0
SS_EXIT_MAX_DELAY_MS = 16.0


@dataclass
class SegmentRecord:
    """One unacked segment on a subflow."""

    ssn: int  # first byte offset in the subflow stream
    dsn: int  # first byte offset in the connection stream
    size: int
    sent_at_us: int  # most recent transmission
    first_sent_at_us: int
    retransmits: int = 0
    reinjection: bool = False

    @property
    def ssn_end(self) -> int:
        return self.ssn + self.size


class SubflowState:
    """Sender-side state of one TCP subflow."""

    def __init__(
        self,
        path_id: int,
        cc: "CongestionControl",
        rto_floor_ms: float = DEFAULT_RTO_FLOOR_MS,
        initial_cwnd: float = INITIAL_CWND,
    ):
        self.path_id = path_id
        self.cc = cc
        self.rto_floor_ms = rto_floor_ms
        self.active = True
        self.srtt_ms = 0.0  # 0 means no sample yet
        self.rttvar_ms = 0.0
        self.rto_ms = max(rto_floor_ms, 1000.0)
        self.cwnd = initial_cwnd
        self.ssthresh = float("inf")
        self.in_flight: list[SegmentRecord] = []
        self.next_ssn = 0
        self.subflow_acked = 0  # cumulative ssn acked by the peer
        self.dup_ack_count = 0
        self.recover_ssn = 0  # loss-recovery episode right edge
        self.retransmit_count = 0
        self.bytes_sent = 0
        self.bytes_acked = 0
        self.initial_rtt_ms = 0.0
        self.last_send_us = 0
        self.min_rtt_ms = 0.0
        # volume acked in the current / previous loss epochs (used by olia)
        self.epoch_acked = 0
        self.prev_epoch_acked = 0

    # -- RTT estimator (srtt/rttvar with a floor-clamped timeout) -------------

    def on_rtt_sample(self, sample_ms: float) -> None:
        if sample_ms <= 0:
            raise ValueError(f"rtt sample must be > 0 ms, got {sample_ms}")
        if self.srtt_ms == 0.0:
            self.srtt_ms = sample_ms
            self.rttvar_ms = sample_ms / 2.0
        else:
            self.rttvar_ms = 0.75 * self.rttvar_ms + 0.25 * abs(
                self.srtt_ms - sample_ms
            )
            self.srtt_ms = 0.875 * self.srtt_ms + 0.125 * sample_ms
        self.rto_ms = min(
            RTO_CAP_MS, max(self.rto_floor_ms, self.srtt_ms + 4.0 * self.rttvar_ms)
        )
        if self.min_rtt_ms == 0.0 or sample_ms < self.min_rtt_ms:
            self.min_rtt_ms = sample_ms
        self._maybe_exit_slow_start()

    def _maybe_exit_slow_start(self) -> None:
        """Stop exponential growth once queueing shows up in the smoothed RTT,
        before any loss occurs; mirrors delay-triggered slow-start exit."""
        if self.cwnd < SS_EXIT_MIN_CWND or self.cwnd >= self.ssthresh:
            return
        gate = min(
            max(self.min_rtt_ms / 8.0, SS_EXIT_MIN_DELAY_MS), SS_EXIT_MAX_DELAY_MS
        )
        if self.srtt_ms >= self.min_rtt_ms + gate:
            self.ssthresh = self.cwnd
            self.cc.on_slow_start_exit(self)

    def on_loss(self, cause: str) -> None:
        """Collapse the window; cause is "triple_dupack" or "rto"."""
        self.cc.on_loss(self, cause)
        self.prev_epoch_acked = self.epoch_acked
        self.epoch_acked = 0
        if cause == "rto":
            self.rto_ms = min(RTO_CAP_MS, self.rto_ms * 2.0)

    def should_retransmit(self, now_us: int) -> list[SegmentRecord]:
        """Segments whose last transmission has outlived the current timeout."""
        rto_us = round(self.rto_ms * 1000)
        return [s for s in self.in_flight if s.sent_at_us + rto_us < now_us]

    # -- window bookkeeping ----------------------------------------------------

    def in_flight_segments(self) -> int:
        return len(self.in_flight)

    def in_flight_bytes(self) -> int:
        return sum(s.size for s in self.in_flight)

    def cwnd_room(self, scale: float = 1.0) -> bool:
        return len(self.in_flight) < int(self.cwnd * scale)

    def oldest_unacked(self) -> SegmentRecord | None:
        return self.in_flight[0] if self.in_flight else None


# -- congestion control -------------------------------------------------------


class CongestionControl:
    """Reno: slow start below ssthresh, +1/cwnd per acked segment above it."""

    name = "reno"

    def ca_increase(self, sf: SubflowState, siblings: list[SubflowState]) -> float:
        return 1.0 / sf.cwnd

    def on_segments_acked(
        self, sf: SubflowState, siblings: list[SubflowState], n: int,
        now_us: int, cwnd_limited: bool = True,
    ) -> None:
        if not cwnd_limited:
            self.on_growth_paused()
            return
        for _ in range(n):
            if sf.cwnd < sf.ssthresh:
                sf.cwnd += 1.0
            else:
                sf.cwnd += self.ca_increase(sf, siblings)

    def on_growth_paused(self) -> None:
        """The window is not the limiter; growth is suspended."""

    def on_slow_start_exit(self, sf: SubflowState) -> None:
        """Slow start ended without a loss."""

    def on_loss(self, sf: SubflowState, cause: str) -> None:
        sf.ssthresh = max(sf.cwnd / 2.0, MIN_SSTHRESH)
        sf.cwnd = 1.0 if cause == "rto" else sf.ssthresh


class CubicCc(CongestionControl):
    """Cubic window growth around the last loss size (concave/convex), with the
    Reno-equivalent floor for the TCP-friendly region."""

    name = "cubic"
    C = 0.4
    BETA = 0.7

    def __init__(self):
        self.w_max = 0.0
        self.k_s = 0.0
        self.epoch_start_us: int | None = None

    def on_growth_paused(self):
        self.epoch_start_us = None  # restamp when the window binds again

    def on_slow_start_exit(self, sf):
        if self.w_max == 0.0:
            self.w_max = sf.cwnd
            self.k_s = 0.0
            self.epoch_start_us = None

    def on_segments_acked(self, sf, siblings, n, now_us, cwnd_limited=True):
        if not cwnd_limited:
            self.on_growth_paused()
            return
        for _ in range(n):
            if sf.cwnd < sf.ssthresh:
                sf.cwnd += 1.0
                continue
            if self.w_max == 0.0:
                # no loss yet: keep growing like slow start
                sf.cwnd += 1.0
                continue
            if self.epoch_start_us is None:
                self.epoch_start_us = now_us
            t = (now_us - self.epoch_start_us) / 1e6 + sf.srtt_ms / 1000.0
            target = self.C * (t - self.k_s) ** 3 + self.w_max
            rtt_s = max(sf.srtt_ms / 1000.0, 1e-3)
            w_est = self.w_max * self.BETA + (
                3.0 * (1.0 - self.BETA) / (1.0 + self.BETA)
            ) * (t / rtt_s)
            if target > sf.cwnd:
                sf.cwnd += (target - sf.cwnd) / sf.cwnd
            if sf.cwnd < w_est:
                sf.cwnd = w_est

    def on_loss(self, sf, cause):
        self.w_max = max(sf.cwnd, 1.0)
        self.k_s = ((self.w_max * (1.0 - self.BETA)) / self.C) ** (1.0 / 3.0)
        self.epoch_start_us = None  # restamped on the next ack
        sf.ssthresh = max(sf.cwnd * self.BETA, MIN_SSTHRESH)
        sf.cwnd = 1.0 if cause == "rto" else sf.ssthresh


def _coupled_states(sf: SubflowState, siblings: list[SubflowState]):
    """Subflows that participate in coupling: those with an RTT estimate."""
    group = [s for s in siblings if s.srtt_ms > 0]
    if sf not in group:
        group = group + [sf]
    return group


class LiaCc(CongestionControl):
    """Coupled increase: min(alpha/total_cwnd, 1/cwnd) per acked segment."""

    name = "lia"

    def ca_increase(self, sf, siblings):
        group = _coupled_states(sf, siblings)
        if len(group) == 1 or sf.srtt_ms == 0:
            return 1.0 / sf.cwnd
        total = sum(s.cwnd for s in group)
        best = max(s.cwnd / (s.srtt_ms * s.srtt_ms) for s in group)
        denom = sum(s.cwnd / s.srtt_ms for s in group) ** 2
        alpha = total * best / denom
        return min(alpha / total, 1.0 / sf.cwnd)


class OliaCc(CongestionControl):
    """Coupled increase balancing toward the paths that recently moved the most
    data per RTT, compensated by shrinking the largest windows."""

    name = "olia"

    def ca_increase(self, sf, siblings):
        group = _coupled_states(sf, siblings)
        if len(group) == 1 or sf.srtt_ms == 0:
            return 1.0 / sf.cwnd
        rtt = {s: s.srtt_ms / 1000.0 for s in group}
        denom = sum(s.cwnd / rtt[s] for s in group) ** 2
        base = (sf.cwnd / rtt[sf] ** 2) / denom

        def volume(s):
            return max(s.epoch_acked, s.prev_epoch_acked)

        best_score = max(volume(s) ** 2 / rtt[s] for s in group)
        best = {s for s in group if volume(s) ** 2 / rtt[s] == best_score}
        max_w = max(s.cwnd for s in group)
        max_paths = {s for s in group if s.cwnd == max_w}
        collected = best - max_paths
        n = len(group)
        alpha = 0.0
        if collected:
            if sf in collected:
                alpha = 1.0 / (n * len(collected))
            elif sf in max_paths:
                alpha = -1.0 / (n * len(max_paths))
        return max(base + alpha / sf.cwnd, 0.0)


class BaliaCc(CongestionControl):
    """Coupled increase weighted by the ratio of the best path rate to this
    path's rate; single-path case reduces to 1/cwnd exactly."""

    name = "balia"

    def ca_increase(self, sf, siblings):
        group = _coupled_states(sf, siblings)
        if len(group) == 1 or sf.srtt_ms == 0:
            return 1.0 / sf.cwnd
        rtt = {s: s.srtt_ms / 1000.0 for s in group}
        x = {s: s.cwnd / rtt[s] for s in group}
        total = sum(x.values())
        a = max(x.values()) / x[sf]
        return (x[sf] / (rtt[sf] * total * total)) * ((1.0 + a) / 2.0) * (
            (4.0 + a) / 5.0
        )


CC_KINDS = {
    "reno": CongestionControl,
    "cubic": CubicCc,
    "lia": LiaCc,
    "olia": OliaCc,
    "balia": BaliaCc,
}


def make_cc(kind: str) -> CongestionControl:
    try:
        return CC_KINDS[kind]()
    except KeyError:
        raise ValueError(f"unknown congestion control {kind!r}") from None
