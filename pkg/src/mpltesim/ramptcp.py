"""Receiver-assisted multipath extension.

The receiver rides a fresh last-mile snapshot for every path on every ACK it
emits, whichever path carries the ACK.  The sender uses those reports to keep
per-path activity status (marking disturbed paths inactive, with hysteresis on
the way back) and to shrink the new-data budget of paths whose last-mile
latency has spiked.  With the extension disabled a run is byte-identical to
the default scheduler.
"""
from __future__ import annotations

from dataclasses import dataclass

from .linkmodel import NOISE_FLOOR_DBM

ACTIVE = "active"
INACTIVE = "inactive"


@dataclass
class ReceiverMetrics:
    """One path's last-mile snapshot as shipped on an ACK."""

    path_id: int
    snr_db: float
    channel_utilization: float
    path_loss_pct: float
    queue_len_bytes: int
    interference: bool
    generated_at_us: int


@dataclass
class PathDelayEstimate:
    """Additive split of a smoothed RTT into sender/core/receiver segments."""

    sender_ms: float
    core_ms: float
    receiver_ms: float

    @property
    def total_ms(self) -> float:
        return self.sender_ms + self.core_ms + self.receiver_ms


def decompose_srtt(
    srtt_ms: float, sender_est_ms: float, receiver_est_ms: float
) -> PathDelayEstimate:
    """Attribute srtt to path segments: core gets the remainder, and if the
    edge estimates already exceed srtt they are scaled down proportionally."""
    if srtt_ms < 0 or sender_est_ms < 0 or receiver_est_ms < 0:
        raise ValueError("delays must be non-negative")
    edges = sender_est_ms + receiver_est_ms
    if edges <= srtt_ms:
        return PathDelayEstimate(
            sender_est_ms, srtt_ms - edges, receiver_est_ms
        )
    if edges == 0:
        return PathDelayEstimate(0.0, srtt_ms, 0.0)
    sender = sender_est_ms * (srtt_ms / edges)
    return PathDelayEstimate(sender, 0.0, srtt_ms - sender)


@dataclass
class PathPolicyState:
    status: str = ACTIVE
    clear_since_us: int | None = None
    last_report_us: int = -1


@dataclass
class Transition:
    path_id: int
    old_status: str
    new_status: str
    reason: str


def evaluate_policy(
    state: PathPolicyState,
    report: ReceiverMetrics,
    now_us: int,
    signal_threshold_dbm: float = -95.0,
    hysteresis_us: int = 500_000,
    staleness_limit_us: int = 3_000_000,
) -> Transition | None:
    """Advance one path's activity status from a report; returns the transition
    if the status changed.  Stale reports carry no information."""
    if now_us - report.generated_at_us > staleness_limit_us:
        return None
    state.last_report_us = max(state.last_report_us, report.generated_at_us)
    signal_dbm = report.snr_db + NOISE_FLOOR_DBM
    disturbed = report.interference or signal_dbm < signal_threshold_dbm
    if disturbed:
        state.clear_since_us = None
        if state.status == ACTIVE:
            state.status = INACTIVE
            reason = "interference" if report.interference else "weak_signal"
            return Transition(report.path_id, ACTIVE, INACTIVE, reason)
        return None
    if state.status == INACTIVE:
        if state.clear_since_us is None:
            state.clear_since_us = now_us
        if now_us - state.clear_since_us >= hysteresis_us:
            state.status = ACTIVE
            state.clear_since_us = None
            return Transition(report.path_id, INACTIVE, ACTIVE, "recovered")
    return None


def injection_scale(
    receiver_ms: float, baseline_ms: float, threshold_factor: float = 2.0
) -> float:
    """New-data budget multiplier for one path: 1 while the last mile sits
    below threshold_factor x baseline, shrinking as baseline/current beyond."""
    if baseline_ms <= 0:
        return 1.0
    if receiver_ms <= threshold_factor * baseline_ms:
        return 1.0
    return baseline_ms / receiver_ms


class AssistController:
    """Sender/receiver halves of the receiver-assisted mode for one connection."""

    def __init__(
        self,
        sim,
        links,
        signal_threshold_dbm: float = -95.0,
        hysteresis_ms: float = 500.0,
        staleness_limit_ms: float = 3000.0,
        budget_threshold_factor: float = 2.0,
        noise_sigma_db: float = 0.0,
    ):
        self.sim = sim
        self.links = {l.path_id: l for l in links}
        self.signal_threshold_dbm = signal_threshold_dbm
        self.hysteresis_us = round(hysteresis_ms * 1000)
        self.staleness_limit_us = round(staleness_limit_ms * 1000)
        self.budget_threshold_factor = budget_threshold_factor
        self.noise_sigma_db = noise_sigma_db
        self.states = {pid: PathPolicyState() for pid in self.links}
        self.budgets = {pid: 1.0 for pid in self.links}
        self.estimates: dict[int, PathDelayEstimate] = {}
        self.baseline_receiver_ms = {
            pid: l.receiver_ms for pid, l in self.links.items()
        }
        self.policy_rows: list[tuple[int, int, str, str, str]] = []
        self.conn = None

    def attach(self, conn):
        self.conn = conn

    # -- receiver side -----------------------------------------------------------

    def build_reports(self, now_us: int) -> list[ReceiverMetrics]:
        """Snapshot every path's last mile; called for each outgoing ACK."""
        reports = []
        for pid in sorted(self.links):
            truth = self.links[pid].last_hop_truth(now_us)
            snr = truth.snr_db
            if self.noise_sigma_db > 0:
                snr += self.sim.stream("assist.noise").gauss(0, self.noise_sigma_db)
            reports.append(
                ReceiverMetrics(
                    path_id=pid,
                    snr_db=snr,
                    channel_utilization=truth.channel_utilization,
                    path_loss_pct=truth.path_loss_pct,
                    queue_len_bytes=truth.queue_len_bytes,
                    interference=truth.interference,
                    generated_at_us=now_us,
                )
            )
        return reports

    # -- sender side -------------------------------------------------------------

    def on_reports(self, reports: list[ReceiverMetrics], now_us: int):
        for report in reports:
            pid = report.path_id
            state = self.states[pid]
            transition = evaluate_policy(
                state,
                report,
                now_us,
                self.signal_threshold_dbm,
                self.hysteresis_us,
                self.staleness_limit_us,
            )
            if transition is not None:
                self.policy_rows.append(
                    (now_us, pid, transition.old_status, transition.new_status,
                     transition.reason)
                )
            link = self.links[pid]
            # budget reacts to disturbance latency (spikes), not to backlog the
            # sender itself queued: the congestion window already owns that.
            spike_ms = link.receiver_ms * link.latency_multiplier(now_us)
            self.budgets[pid] = injection_scale(
                spike_ms,
                self.baseline_receiver_ms[pid],
                self.budget_threshold_factor,
            )
            if self.conn is not None:
                sf = self.conn.subflows.get(pid)
                if sf is not None:
                    self.estimates[pid] = decompose_srtt(
                        sf.srtt_ms,
                        2 * link.sender_us / 1000.0,
                        2 * link.receiver_lasthop_delay_ms(now_us),
                    )

    def allows(self, path_id: int, reinjection: bool) -> bool:
        return self.states[path_id].status == ACTIVE

    def budget_scale(self, path_id: int) -> float:
        return self.budgets[path_id]

    def report_age_us(self, path_id: int, now_us: int) -> int:
        return now_us - self.states[path_id].last_report_us

    def policy_lines(self):
        yield "time_us,path_id,old_status,new_status,reason"
        for t, pid, old, new, reason in self.policy_rows:
            yield f"{t},{pid},{old},{new},{reason}"
