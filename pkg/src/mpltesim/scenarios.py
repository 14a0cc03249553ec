"""Named experiments: build a seeded run from a ScenarioConfig, execute it,
and assemble the metrics report plus trace / signal / event / policy logs."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .config import (
    CompetitorConfig,
    ConfigError,
    DropInjectionConfig,
    InjectionConfig,
    PathConfig,
    ScenarioConfig,
    SharedQueueConfig,
    WorkloadConfig,
    apply_override,
    validate,
)
from .connection import MptcpConnection, Trace
from .engine import Simulator, us_from_s
from .linkmodel import (
    PROFILES,
    BottleneckQueue,
    LinkPath,
    NetworkEvent,
    generate_events,
    signal_series,
)
from .ramptcp import AssistController
from .workload import BulkTransfer, DashSession

REPORT_SCHEMA_VERSION = 1
# a bulk size no desk-scale run can finish: "send until the clock runs out"
ENDLESS_BYTES = 1 << 40


@dataclass
class RunResult:
    config: ScenarioConfig
    report: dict
    trace: Trace
    signal_rows: list = field(default_factory=list)
    event_rows: list = field(default_factory=list)
    policy_lines: list = field(default_factory=list)
    qoe_lines: list | None = None
    conn: MptcpConnection | None = None
    competitor: MptcpConnection | None = None

    def trace_lines(self):
        return self.trace.lines()

    def signal_lines(self):
        yield "time_s,path_id,rssi_dbm,bsid"
        for t, pid, rssi, bsid in self.signal_rows:
            yield f"{t:.1f},{pid},{rssi:.1f},{bsid}"

    def event_lines(self):
        yield "time_s,path_id,kind,magnitude_db,recovery_s,new_bsid"
        for ev in self.event_rows:
            yield (
                f"{ev.at_us / 1e6:.6f},{ev.path_id},{ev.kind},"
                f"{ev.magnitude_db},{ev.recovery_s},{ev.new_bsid}"
            )


def _build_link(sim: Simulator, p: PathConfig, queues) -> LinkPath:
    return LinkPath(
        p.path_id,
        capacity_mbps=p.capacity_mbps,
        sender_ms=p.sender_ms,
        core_ms=p.core_ms,
        receiver_ms=p.receiver_ms,
        bs_queue_bytes=p.bs_queue_bytes,
        loss_prob=p.loss_prob,
        signal_dbm=p.signal_dbm,
        spike_scale=p.spike_scale,
        handover_outage_ms=p.handover_outage_ms,
        rng=sim.stream(f"link.path{p.path_id}"),
        queue=queues.get(p.shared_queue),
    )


def _build_workload(cfg: ScenarioConfig):
    w = cfg.workload
    if w.kind == "bulk":
        return BulkTransfer(w.bytes)
    return DashSession(
        segment_s=w.segment_s,
        duration_s=cfg.duration_s,
        buffer_target_s=w.buffer_target_s,
        safety=w.abr_safety,
        ewma_half_life_segments=w.ewma_half_life_segments,
    )


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    validate(cfg)
    sim = Simulator(cfg.seed)
    queues = {
        q.name: BottleneckQueue(q.capacity_mbps, q.max_bytes)
        for q in cfg.shared_queues
    }
    links = {p.path_id: _build_link(sim, p, queues) for p in cfg.paths}

    # last-mile disturbances: profile-drawn events plus handcrafted drops
    profile = PROFILES[cfg.mobility.profile]
    events_by_path: dict[int, list[NetworkEvent]] = {}
    for pid in sorted(links):
        events_by_path[pid] = generate_events(
            profile,
            cfg.duration_s,
            sim.stream(f"events.path{pid}"),
            path_id=pid,
            rate_scale=cfg.mobility.rate_scale,
        )
    for d in cfg.drop_injections:
        events_by_path[d.path_id].append(
            NetworkEvent(
                "signal_drop", d.path_id, us_from_s(d.at_s), d.recovery_s,
                magnitude_db=d.magnitude_db,
            )
        )
    all_events: list[NetworkEvent] = []
    for pid, evs in sorted(events_by_path.items()):
        evs.sort(key=lambda e: e.at_us)
        all_events.extend(evs)
        link = links[pid]
        for ev in evs:
            sim.schedule(ev.at_us, lambda e=ev, l=link: l.apply_event(e, sim.now))
    all_events.sort(key=lambda e: (e.at_us, e.path_id))

    # timed loss-rate changes on the receiver last mile
    for inj in cfg.injections:
        link = links[inj.path_id]
        base = link.loss_prob
        sim.schedule(
            us_from_s(inj.at_s),
            lambda l=link, v=inj.loss_prob: setattr(l, "loss_prob", v),
        )
        if inj.until_s is not None:
            sim.schedule(
                us_from_s(inj.until_s),
                lambda l=link, v=base: setattr(l, "loss_prob", v),
            )

    # endpoints
    if cfg.protocol in ("mptcp", "ramptcp"):
        conn_links = [links[p.path_id] for p in cfg.paths]
    else:
        index = 0 if cfg.protocol == "tcp_path1" else 1
        if index >= len(cfg.paths):
            raise ConfigError(f"protocol {cfg.protocol} needs paths[{index}]")
        conn_links = [links[cfg.paths[index].path_id]]
    assist = None
    if cfg.protocol == "ramptcp" and cfg.assist.enabled:
        assist = AssistController(
            sim,
            conn_links,
            signal_threshold_dbm=cfg.assist.signal_threshold_dbm,
            hysteresis_ms=cfg.assist.hysteresis_ms,
            staleness_limit_ms=cfg.assist.staleness_limit_ms,
            budget_threshold_factor=cfg.assist.budget_threshold_factor,
            noise_sigma_db=cfg.assist.noise_sigma_db,
        )
    workload = _build_workload(cfg)
    trace = Trace()
    conn = MptcpConnection(
        sim,
        "conn0",
        conn_links,
        cc_kind=cfg.cc,
        ofo_capacity=cfg.ofo_capacity_bytes,
        rto_floor_ms=cfg.rto_floor_ms,
        initial_cwnd=cfg.initial_cwnd,
        workload=workload,
        assist=assist,
        trace=trace,
    )

    competitor = None
    if cfg.competitor.enabled:
        comp_path = copy.deepcopy(cfg.paths[0])
        comp_path.path_id = cfg.competitor.path_id
        comp_link = _build_link(sim, comp_path, queues)
        competitor = MptcpConnection(
            sim,
            "competitor0",
            [comp_link],
            cc_kind=cfg.competitor.cc,
            ofo_capacity=cfg.ofo_capacity_bytes,
            rto_floor_ms=cfg.rto_floor_ms,
            initial_cwnd=cfg.initial_cwnd,
            workload=BulkTransfer(ENDLESS_BYTES),
            trace=trace,
        )

    finishes = cfg.workload.kind == "bulk" and cfg.workload.bytes < ENDLESS_BYTES
    if finishes and not cfg.competitor.enabled:
        conn.on_complete = lambda c: sim.stop()

    conn.kick()
    if competitor is not None:
        if cfg.competitor.start_s > 0:
            sim.schedule(us_from_s(cfg.competitor.start_s), competitor.kick)
        else:
            competitor.kick()
    sim.run_until(us_from_s(cfg.duration_s))
    if isinstance(workload, DashSession):
        workload.finalize(sim.now)

    signal_rows = []
    for pid in sorted(links):
        signal_rows.extend(
            signal_series(
                events_by_path[pid],
                cfg.duration_s,
                baseline_dbm=next(
                    p.signal_dbm for p in cfg.paths if p.path_id == pid
                ),
                path_id=pid,
            )
        )
    signal_rows.sort(key=lambda r: (r[0], r[1]))

    report = build_report(
        cfg, sim, conn, links, events_by_path, assist, competitor, workload
    )
    return RunResult(
        config=cfg,
        report=report,
        trace=trace,
        signal_rows=signal_rows,
        event_rows=all_events,
        policy_lines=list(assist.policy_lines()) if assist else [],
        qoe_lines=list(workload.qoe_lines())
        if isinstance(workload, DashSession) else None,
        conn=conn,
        competitor=competitor,
    )


# -- report assembly ---------------------------------------------------------------


def _percentiles(values, qs=(50, 75, 90, 95)) -> dict:
    if len(values) == 0:
        return {f"p{q}": 0.0 for q in qs} | {"max": 0.0}
    arr = np.asarray(values, dtype=np.float64)
    out = {f"p{q}": float(np.percentile(arr, q)) for q in qs}
    out["max"] = float(arr.max())
    return out


def _peak_normalized_rtt(conn: MptcpConnection) -> float:
    peak = 0.0
    for pid, sf in conn.subflows.items():
        initial = sf.initial_rtt_ms
        if initial <= 0:
            continue
        samples = [(t, s) for (t, p, s) in conn.rtt_samples if p == pid]
        if not samples:
            continue
        bysec: dict[int, list[float]] = {}
        for t, s in samples:
            bysec.setdefault(t // 1_000_000, []).append(s)
        for sec_vals in bysec.values():
            peak = max(peak, (sum(sec_vals) / len(sec_vals)) / initial)
    return peak


def _srtt_crossover_us(rows, lossy: int, other: int, onset_us: int,
                       ratio: float = 1.05):
    """First time after onset the lossy path's smoothed RTT clearly exceeds
    the healthy path's — the moment the lowest-SRTT scheduler durably stops
    preferring it.  The ratio guards against baseline jitter flips.

    A timeout-driven retransmission burst (cwnd collapsed to one segment)
    exiles the path just as surely, but leaves the estimator starved of
    samples while every outstanding segment carries a retransmission mark,
    so the earlier of the two signals is used.  None when neither fires."""
    last = {lossy: None, other: None}
    for r in rows:
        t, pid, kind = r[0], r[2], r[4]
        if t >= onset_us and pid == lossy and r[3] == "snd" \
                and kind == "rtx" and r[10] <= 1.0:
            return t
        if kind != "ack":
            continue
        srtt = r[8]
        if pid not in last:
            continue
        last[pid] = srtt
        if t < onset_us or last[lossy] is None or last[other] is None:
            continue
        if last[lossy] > ratio * last[other]:
            return t
    return None


def _retrans_window_stats(rows, onset_us: int, end_us: int, lossy: int) -> dict:
    """Share of new data packets put on the lossy path inside the window, and
    how many of those ended up retransmitted (same-ssn rtx or reinjected)."""
    new_total = 0
    lossy_segs: list[tuple[int, int, int]] = []  # (dsn, end, ssn)
    rtx_ssns: set[int] = set()
    reinj_spans: list[tuple[int, int]] = []
    for r in rows:
        t, pid, direction, kind = r[0], r[2], r[3], r[4]
        if direction != "snd":
            continue
        if kind == "data" and onset_us < t <= end_us:
            new_total += 1
            if pid == lossy:
                lossy_segs.append((r[5], r[5] + r[7], r[6]))
        if t > onset_us:
            if kind == "rtx" and pid == lossy:
                rtx_ssns.add(r[6])
            elif kind == "reinj":
                reinj_spans.append((r[5], r[5] + r[7]))
    retransmitted = 0
    for dsn, dsn_end, ssn in lossy_segs:
        hit = ssn in rtx_ssns or any(
            s < dsn_end and dsn < e for s, e in reinj_spans
        )
        retransmitted += 1 if hit else 0
    return {
        "window_new_packets": new_total,
        "lossy_new_packets": len(lossy_segs),
        "lossy_new_share": len(lossy_segs) / new_total if new_total else 0.0,
        "lossy_retransmitted_share": (
            retransmitted / len(lossy_segs) if lossy_segs else 0.0
        ),
    }


def _policy_summary(assist: AssistController, end_us: int) -> dict:
    inactive_s: dict[str, float] = {}
    since: dict[int, int | None] = {pid: None for pid in assist.states}
    for t, pid, old, new, reason in assist.policy_rows:
        if new == "inactive" and since.get(pid) is None:
            since[pid] = t
        elif new == "active" and since.get(pid) is not None:
            key = str(pid)
            inactive_s[key] = inactive_s.get(key, 0.0) + (t - since[pid]) / 1e6
            since[pid] = None
    for pid, t0 in since.items():
        if t0 is not None:
            key = str(pid)
            inactive_s[key] = inactive_s.get(key, 0.0) + (end_us - t0) / 1e6
    return {
        "transitions": len(assist.policy_rows),
        "inactive_s_by_path": dict(sorted(inactive_s.items())),
    }


def build_report(cfg, sim, conn, links, events_by_path, assist, competitor,
                 workload) -> dict:
    completed = conn.completed_at_us is not None
    download_time_s = (
        (conn.completed_at_us - conn.established_at_us) / 1e6
        if completed else cfg.duration_s
    )
    elapsed_s = max(download_time_s if completed else cfg.duration_s, 1e-9)
    delivered = conn.delivered_bytes()
    raw_rtts = [s for (_, _, s) in conn.rtt_samples]
    queuing = (
        (np.asarray(raw_rtts) - min(raw_rtts)).tolist() if raw_rtts else []
    )
    ofo_vals = [v for _, v in conn.ofo_samples]
    inflight_vals = [v for _, v in conn.inflight_samples]
    u = conn.utilization_share()

    per_path = []
    for pid in sorted(conn.subflows):
        sf = conn.subflows[pid]
        c = conn.counters[pid]
        link = links.get(pid)
        evs = events_by_path.get(pid, [])
        per_path.append({
            "path_id": pid,
            "bytes_sent": c.bytes_sent,
            "bytes_acked": c.bytes_acked,
            "new_data_pkts": c.new_data_pkts,
            "rtx_pkts": c.rtx_pkts,
            "reinj_pkts": c.reinj_pkts,
            "probe_pkts": c.probe_pkts,
            "arrived_bytes": conn.arrived_by_path.get(pid, 0),
            "initial_rtt_ms": sf.initial_rtt_ms,
            "final_srtt_ms": sf.srtt_ms,
            "drops_injected": sum(1 for e in evs if e.kind == "signal_drop"),
            "handovers_injected": sum(1 for e in evs if e.kind == "handover"),
            "pkts_lost_random": link.pkts_random_dropped if link else 0,
            "bytes_tail_dropped": link.queue.bytes_tail_dropped if link else 0,
        })

    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": cfg.name,
        "seed": cfg.seed,
        "protocol": cfg.protocol,
        "cc": cfg.cc,
        "duration_s": cfg.duration_s,
        "completed": completed,
        "incomplete": (cfg.workload.kind == "bulk") and not completed,
        "download_time_s": download_time_s,
        "bytes_delivered": delivered,
        "goodput_mbps": delivered * 8 / elapsed_s / 1e6,
        "throughput_mbps": conn.arrived_data_bytes * 8 / elapsed_s / 1e6,
        "retransmissions": conn.total_retransmissions(),
        "retransmission_rate": (
            conn.total_retransmissions() / max(conn.total_data_packets(), 1)
        ),
        "mean_ofo_bytes": float(np.mean(ofo_vals)) if ofo_vals else 0.0,
        "p95_ofo_bytes": float(np.percentile(ofo_vals, 95)) if ofo_vals else 0.0,
        "mean_bytes_in_flight": (
            float(np.mean(inflight_vals)) if inflight_vals else 0.0
        ),
        "min_rtt_ms": min(raw_rtts) if raw_rtts else 0.0,
        "queuing_delay_ms": _percentiles(queuing),
        "peak_normalized_rtt": _peak_normalized_rtt(conn),
        "u_fraction": u,
        "skew": 2.0 * abs(u - 0.5),
        "events_injected": sum(len(v) for v in events_by_path.values()),
        "per_path": per_path,
    }

    if isinstance(workload, DashSession):
        report["qoe"] = workload.qoe_report(cfg.duration_s)

    extras: dict = {}
    if cfg.injections and len(conn.subflows) >= 2:
        inj = cfg.injections[0]
        onset_us = us_from_s(inj.at_s)
        pids = sorted(conn.subflows)
        lossy = inj.path_id
        other = next(p for p in pids if p != lossy)
        cross = _srtt_crossover_us(conn.trace.rows, lossy, other, onset_us)
        end_us = cross if cross is not None else sim.now
        stats = _retrans_window_stats(conn.trace.rows, onset_us, end_us, lossy)
        extras["loss_injection"] = {
            "onset_s": inj.at_s,
            "lossy_path": lossy,
            "crossover_s": cross / 1e6 if cross is not None else None,
            **stats,
        }
    if competitor is not None:
        comp_delivered = competitor.delivered_bytes()
        comp_goodput = comp_delivered * 8 / cfg.duration_s / 1e6
        main_goodput = delivered * 8 / cfg.duration_s / 1e6
        # share is judged after both flows are out of slow start, otherwise the
        # two-subflow connection's double ramp-up dominates the comparison
        measure_us = us_from_s(cfg.competitor.measure_from_s)
        window_bytes = {conn.conn_id: 0, competitor.conn_id: 0}
        for row in conn.trace.rows:
            if (row[0] >= measure_us and row[3] == "rcv"
                    and row[4] in ("data", "rtx", "reinj")
                    and row[1] in window_bytes):
                window_bytes[row[1]] += row[7]
        comp_window = window_bytes[competitor.conn_id]
        extras["bottleneck"] = {
            "competitor_goodput_mbps": comp_goodput,
            "mptcp_goodput_mbps": main_goodput,
            "measure_from_s": cfg.competitor.measure_from_s,
            "goodput_ratio": (
                window_bytes[conn.conn_id] / comp_window if comp_window
                else math.inf
            ),
            "goodput_ratio_full_run": (
                main_goodput / comp_goodput if comp_goodput else math.inf
            ),
        }
    if assist is not None:
        extras["policy"] = _policy_summary(assist, sim.now)
    if extras:
        report["extras"] = extras
    return report


# -- scenario registry ---------------------------------------------------------------


def _paths(capacity_mbps: float, n: int = 2, **kw) -> list[PathConfig]:
    return [PathConfig(path_id=i + 1, capacity_mbps=capacity_mbps, **kw)
            for i in range(n)]


def _base(name: str, **kw) -> ScenarioConfig:
    cfg = ScenarioConfig(name=name, **kw)
    return cfg


def exp_static() -> ScenarioConfig:
    cfg = _base("exp_static", duration_s=120.0, protocol="mptcp", cc="cubic")
    cfg.paths = _paths(16.0)
    # receive buffer just under the two-path bandwidth-delay product: both
    # paths stay busy, but interleaving keeps the aggregate below 2x a single
    # path, which is what phones with stock buffer autotuning actually see
    cfg.ofo_capacity_bytes = 182_000
    cfg.workload = WorkloadConfig(kind="bulk", bytes=60_000_000)
    cfg.mobility.profile = "static"
    return cfg


def exp_walking() -> ScenarioConfig:
    cfg = exp_static()
    cfg.name = "exp_walking"
    cfg.mobility.profile = "walking"
    cfg.mobility.rate_scale = 2.0
    return cfg


def exp_driving() -> ScenarioConfig:
    cfg = exp_static()
    cfg.name = "exp_driving"
    cfg.mobility.profile = "driving"
    cfg.mobility.rate_scale = 2.0
    return cfg


def exp_retrans() -> ScenarioConfig:
    cfg = _base("exp_retrans", duration_s=15.0)
    cfg.paths = _paths(12.0)
    # receive window ~= 2x one path's bandwidth-delay product: both paths sit
    # flat at the base RTT before the errors start (so the scheduler's
    # preference flip is cleanly observable), yet each flight is deep enough
    # that a 20% loss rate yields multi-hole recovery episodes
    cfg.ofo_capacity_bytes = 170_000
    cfg.workload = WorkloadConfig(kind="bulk", bytes=ENDLESS_BYTES)
    cfg.injections = [InjectionConfig(at_s=2.0, path_id=2, loss_prob=0.2)]
    return cfg


def exp_ramptcp() -> ScenarioConfig:
    cfg = _base("exp_ramptcp", duration_s=30.0)
    cfg.paths = _paths(8.0)
    # window sized so one path's loss episodes back pressure the whole
    # connection through the shared receive buffer unless the bad path is
    # proactively sidelined
    cfg.ofo_capacity_bytes = 300_000
    cfg.workload = WorkloadConfig(kind="bulk", bytes=10_000_000)
    cfg.injections = [
        InjectionConfig(at_s=2.0, path_id=1, loss_prob=0.25, until_s=5.0)
    ]
    return cfg


def _exp_dash(segment_s: float) -> ScenarioConfig:
    name = f"exp_dash_{segment_s:g}s"
    cfg = _base(name, duration_s=60.0)
    cfg.paths = _paths(8.0)
    cfg.ofo_capacity_bytes = 240_000
    cfg.workload = WorkloadConfig(kind="dash", segment_s=segment_s)
    cfg.mobility.profile = "driving"
    cfg.mobility.rate_scale = 4.0
    return cfg


def _exp_cc(cc: str) -> ScenarioConfig:
    cfg = exp_driving()
    cfg.name = f"exp_cc_{cc}"
    cfg.cc = cc
    return cfg


def exp_bottleneck() -> ScenarioConfig:
    cfg = _base("exp_bottleneck", duration_s=45.0, cc="lia")
    cfg.shared_queues = [
        SharedQueueConfig(name="core", capacity_mbps=20.0, max_bytes=128_000)
    ]
    cfg.paths = _paths(20.0, shared_queue="core")
    cfg.ofo_capacity_bytes = 1_000_000
    cfg.workload = WorkloadConfig(kind="bulk", bytes=ENDLESS_BYTES)
    cfg.competitor = CompetitorConfig(enabled=True, cc="reno", path_id=3)
    return cfg


def exp_drop() -> ScenarioConfig:
    """Single handcrafted signal drop on a lightly loaded transfer."""
    cfg = _base("exp_drop", duration_s=12.0)
    cfg.paths = _paths(16.0)
    cfg.ofo_capacity_bytes = 80_000
    cfg.workload = WorkloadConfig(kind="bulk", bytes=ENDLESS_BYTES)
    cfg.drop_injections = [
        DropInjectionConfig(at_s=3.0, path_id=1, magnitude_db=6.0, recovery_s=4.0)
    ]
    return cfg


SCENARIOS = {
    "exp_static": exp_static,
    "exp_walking": exp_walking,
    "exp_driving": exp_driving,
    "exp_retrans": exp_retrans,
    "exp_ramptcp": exp_ramptcp,
    "exp_dash_1s": lambda: _exp_dash(1.0),
    "exp_dash_6s": lambda: _exp_dash(6.0),
    "exp_dash_15s": lambda: _exp_dash(15.0),
    "exp_cc_reno": lambda: _exp_cc("reno"),
    "exp_cc_lia": lambda: _exp_cc("lia"),
    "exp_cc_olia": lambda: _exp_cc("olia"),
    "exp_cc_balia": lambda: _exp_cc("balia"),
    "exp_bottleneck": exp_bottleneck,
    "exp_drop": exp_drop,
}


def make_scenario(name: str, seed: int | None = None,
                  overrides: list[tuple[str, str]] | None = None) -> ScenarioConfig:
    if name not in SCENARIOS:
        raise ConfigError(
            f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}"
        )
    cfg = SCENARIOS[name]()
    if seed is not None:
        cfg.seed = seed
    for key, value in overrides or []:
        apply_override(cfg, key, value)
    validate(cfg)
    return cfg


def sweep(name: str, axis: str, values: list[str], seed: int = 1,
          overrides: list[tuple[str, str]] | None = None) -> list[RunResult]:
    """One seeded run per axis value; run i uses seed + i."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    results = []
    for i, value in enumerate(values):
        cfg = make_scenario(name, seed=seed + i, overrides=overrides)
        if axis != "seed":
            apply_override(cfg, axis, value)
            validate(cfg)
        else:
            cfg.seed = int(value)
        results.append(run_scenario(cfg))
    return results


SWEEP_COLUMNS = [
    "axis_value", "seed", "completed", "download_time_s", "throughput_mbps",
    "goodput_mbps", "retransmissions", "retransmission_rate",
    "mean_ofo_bytes", "p95_queuing_delay_ms", "peak_normalized_rtt",
    "u_fraction", "switches_per_minute", "mean_bitrate_mbps", "stall_seconds",
]


def sweep_table(axis_values: list[str], results: list[RunResult]):
    yield ",".join(SWEEP_COLUMNS)
    for value, res in zip(axis_values, results):
        r = res.report
        qoe = r.get("qoe", {})
        row = [
            value,
            r["seed"],
            int(r["completed"]),
            f"{r['download_time_s']:.3f}",
            f"{r['throughput_mbps']:.4f}",
            f"{r['goodput_mbps']:.4f}",
            r["retransmissions"],
            f"{r['retransmission_rate']:.4f}",
            f"{r['mean_ofo_bytes']:.1f}",
            f"{r['queuing_delay_ms']['p95']:.3f}",
            f"{r['peak_normalized_rtt']:.4f}",
            f"{r['u_fraction']:.4f}",
            f"{qoe.get('switches_per_minute', 0.0):.4f}",
            f"{qoe.get('mean_bitrate_mbps', 0.0):.4f}",
            f"{qoe.get('stall_seconds', 0.0):.4f}",
        ]
        yield ",".join(str(x) for x in row)
