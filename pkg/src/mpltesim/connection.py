"""Multipath connection machinery: scheduler, reorder buffer, reinjection.

One MptcpConnection object holds both endpoints; packets and ACKs travel as
engine events.  Data bytes carry two sequence numbers: the connection-level
offset (dsn) used for in-order delivery, and the subflow-level offset (ssn)
used for per-path loss detection and cumulative ACKs.
"""
from __future__ import annotations

from dataclasses import dataclass

from .engine import Simulator, us_from_ms
from .linkmodel import LinkPath
from .subflow import (
    DUPACK_THRESHOLD,
    MSS,
    SegmentRecord,
    SubflowState,
    make_cc,
)

WIRE_OVERHEAD = 40  # header bytes on the wire per data packet
UNBOUNDED_WINDOW = 1 << 40
SAMPLE_PERIOD_US = 100_000
PROBE_IDLE_US = 500_000


class SpanSet:
    """Sorted disjoint half-open byte spans [start, end)."""

    def __init__(self):
        self.spans: list[tuple[int, int]] = []

    def add(self, start: int, end: int) -> list[tuple[int, int]]:
        """Insert a span; returns the sub-spans that were actually new."""
        if end <= start:
            return []
        new = []
        cur = start
        for s, e in self.spans:
            if e <= cur or s >= end:
                continue
            if cur < s:
                new.append((cur, s))
            cur = max(cur, e)
        if cur < end:
            new.append((cur, end))
        ns, ne = start, end
        out = []
        for s, e in self.spans:
            if e < ns or s > ne:
                out.append((s, e))
            else:
                ns = min(ns, s)
                ne = max(ne, e)
        out.append((ns, ne))
        out.sort()
        self.spans = out
        return new

    def total(self) -> int:
        return sum(e - s for s, e in self.spans)

    def pop_leading(self, base: int) -> int:
        """Remove and return the new base after draining spans contiguous with it."""
        while self.spans and self.spans[0][0] <= base:
            s, e = self.spans.pop(0)
            base = max(base, e)
        return base

    def covers(self, start: int, end: int) -> bool:
        for s, e in self.spans:
            if s <= start and end <= e:
                return True
        return False


class OfoBuffer:
    """Receiver-side reorder buffer keyed by connection-level offsets.

    In-order bytes pass straight to the application; out-of-order spans are
    held (deduplicated) until the gap fills, and arrivals that do not fit in
    the free space are discarded for later retransmission.
    """

    def __init__(self, capacity_bytes: int | None = 1_000_000):
        self.capacity = capacity_bytes  # None: unbounded
        self.next_expected = 0
        self.held = SpanSet()
        self.delivered_bytes = 0
        self.discarded_pkts = 0

    def held_bytes(self) -> int:
        return self.held.total()

    def window(self) -> int:
        if self.capacity is None:
            return UNBOUNDED_WINDOW
        return self.capacity - self.held.total()

    def on_data(self, dsn: int, size: int) -> tuple[int, bool]:
        """Accept one packet; returns (bytes newly delivered in order, accepted)."""
        start = max(dsn, self.next_expected)
        end = dsn + size
        if end <= start:
            return 0, True  # stale duplicate
        if start == self.next_expected:
            self.next_expected = self.held.pop_leading(end)
            delivered = self.next_expected - start
            self.delivered_bytes += delivered
            return delivered, True
        fresh = sum(e - s for s, e in self._peek_new(start, end))
        if self.capacity is not None and self.held.total() + fresh > self.capacity:
            self.discarded_pkts += 1
            return 0, False
        self.held.add(start, end)
        return 0, True

    def _peek_new(self, start: int, end: int) -> list[tuple[int, int]]:
        new = []
        cur = start
        for s, e in self.held.spans:
            if e <= cur or s >= end:
                continue
            if cur < s:
                new.append((cur, s))
            cur = max(cur, e)
        if cur < end:
            new.append((cur, end))
        return new


@dataclass
class PathCounters:
    bytes_sent: int = 0
    bytes_acked: int = 0
    data_pkts: int = 0
    new_data_pkts: int = 0
    rtx_pkts: int = 0
    rtx_bytes: int = 0
    reinj_pkts: int = 0
    probe_pkts: int = 0


class Trace:
    """Packet-level trace rows shared by every connection in a run."""

    COLUMNS = (
        "time_us,conn_id,path_id,dir,kind,dsn,ssn,size,"
        "srtt_ms,rtt_ms,cwnd,ofo_bytes"
    )

    def __init__(self):
        self.rows: list[tuple] = []

    def add(self, time_us, conn_id, path_id, direction, kind, dsn, ssn, size,
            srtt_ms, rtt_ms, cwnd, ofo_bytes):
        # rtt_ms is the raw per-packet sample (0 when the row carries none).
        self.rows.append(
            (time_us, conn_id, path_id, direction, kind, dsn, ssn, size,
             srtt_ms, rtt_ms, cwnd, ofo_bytes)
        )

    def lines(self):
        yield self.COLUMNS
        for r in self.rows:
            yield (
                f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]},{r[5]},{r[6]},{r[7]},"
                f"{r[8]:.3f},{r[9]:.3f},{r[10]:.3f},{r[11]}"
            )


class MptcpConnection:
    """A multipath (or single-path) connection between one sender and receiver."""

    def __init__(
        self,
        sim: Simulator,
        conn_id: str,
        links: list[LinkPath],
        cc_kind: str = "cubic",
        ofo_capacity: int | None = 1_000_000,
        rto_floor_ms: float = 200.0,
        initial_cwnd: float = 10.0,
        workload=None,
        assist=None,
        trace: Trace | None = None,
    ):
        if not links:
            raise ValueError("a connection needs at least one path")
        ids = [l.path_id for l in links]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate path ids in {ids}")
        self.sim = sim
        self.conn_id = conn_id
        self.links = {l.path_id: l for l in links}
        self.subflows: dict[int, SubflowState] = {}
        self.counters: dict[int, PathCounters] = {}
        self.trace = trace if trace is not None else Trace()
        self.workload = workload
        self.assist = assist
        self.cc_kind = cc_kind

        # sender state
        self.send_next_dsn = 0
        self.data_acked = 0
        self.peer_window = (
            UNBOUNDED_WINDOW if ofo_capacity is None else ofo_capacity
        )
        self.reinjection_pending: list[tuple[int, int, int]] = []  # (start, end, origin)
        self.reinjected = SpanSet()
        self._rto_handle: dict[int, int | None] = {}

        # receiver state
        self.ofo = OfoBuffer(ofo_capacity)
        self.ssn_tracker: dict[int, SpanSet] = {}
        self.ssn_base: dict[int, int] = {}
        self.arrived_data_bytes = 0
        self.arrived_by_path: dict[int, int] = {}

        # metrics
        self.established_at_us = sim.now
        self.completed_at_us: int | None = None
        self.rtt_samples: list[tuple[int, int, float]] = []  # (t, path, ms)
        self.inflight_samples: list[tuple[int, int]] = []
        self.ofo_samples: list[tuple[int, int]] = []
        self.on_complete = None

        for link in links:
            sf = SubflowState(
                link.path_id, make_cc(cc_kind), rto_floor_ms, initial_cwnd
            )
            rtt0 = link.base_rtt_ms()
            sf.on_rtt_sample(rtt0)
            sf.initial_rtt_ms = rtt0
            self.subflows[link.path_id] = sf
            self.counters[link.path_id] = PathCounters()
            self.ssn_tracker[link.path_id] = SpanSet()
            self.ssn_base[link.path_id] = 0
            self._rto_handle[link.path_id] = None
            self.arrived_by_path[link.path_id] = 0
        for pid in sorted(self.subflows):
            sf = self.subflows[pid]
            # establishment row: carries the handshake RTT used to seed srtt
            self.trace.add(
                sim.now, conn_id, pid, "snd", "init", 0, 0, 0,
                sf.srtt_ms, sf.initial_rtt_ms, sf.cwnd, 0,
            )
        if workload is not None:
            workload.attach(self)
        if assist is not None:
            assist.attach(self)
        self._sample_metrics()

    # -- sampling ---------------------------------------------------------------

    def _sample_metrics(self):
        inflight = sum(sf.in_flight_bytes() for sf in self.subflows.values())
        self.inflight_samples.append((self.sim.now, inflight))
        self.ofo_samples.append((self.sim.now, self.ofo.held_bytes()))
        if self.completed_at_us is None:
            self.sim.schedule_in(SAMPLE_PERIOD_US, self._sample_metrics)

    # -- scheduler ----------------------------------------------------------------

    def schedule_packet(
        self,
        size: int,
        now_us: int,
        reinjection: bool = False,
        exclude_path: int | None = None,
    ) -> SubflowState | None:
        """Pick the sendable subflow with the lowest smoothed RTT.

        A subflow qualifies when it is active, has congestion-window room
        (scaled by any receiver-assist budget for new data), and is allowed by
        the assist policy.  Ties break toward the lowest path id.
        """
        best = None
        for pid in sorted(self.subflows):
            if pid == exclude_path:
                continue
            sf = self.subflows[pid]
            if not sf.active:
                continue
            scale = 1.0
            if self.assist is not None:
                if not self.assist.allows(pid, reinjection):
                    continue
                if not reinjection:
                    scale = self.assist.budget_scale(pid)
                    if scale <= 0.0:
                        continue
            if not sf.cwnd_room(scale):
                continue
            if best is None or (sf.srtt_ms, pid) < (best.srtt_ms, best.path_id):
                best = sf
        return best

    def _flow_window_ok(self, dsn: int, size: int) -> bool:
        if dsn == self.data_acked:
            return True  # left edge must always be able to move
        return dsn + size <= self.data_acked + self.peer_window

    def try_send(self, now_us: int) -> int:
        """Send as much as windows allow; reinjected spans take priority."""
        sent = 0
        while True:
            placed = False
            chunk = self._peek_reinjection()
            if chunk is not None:
                start, end, origin = chunk
                size = min(MSS, end - start)
                if self._flow_window_ok(start, size):
                    sf = self.schedule_packet(
                        size, now_us, reinjection=True, exclude_path=origin
                    )
                    if sf is not None:
                        self._consume_reinjection(start, start + size)
                        self._send_segment(sf, start, size, now_us, reinjection=True)
                        sent += 1
                        placed = True
            if not placed and self.workload is not None:
                avail = self.workload.available_new_bytes(now_us)
                if avail > 0:
                    size = min(MSS, avail)
                    dsn = self.send_next_dsn
                    if self._flow_window_ok(dsn, size):
                        sf = self.schedule_packet(size, now_us)
                        if sf is not None:
                            self.send_next_dsn += size
                            self._send_segment(sf, dsn, size, now_us)
                            sent += 1
                            placed = True
            if not placed:
                break
        sent += self._probe_idle_subflows(now_us)
        return sent

    def _probe_idle_subflows(self, now_us: int) -> int:
        """Refresh the RTT estimate of subflows the scheduler has been avoiding.

        A subflow that carries nothing gets no samples, so a stale high SRTT
        would sideline it forever.  Re-sending one already-delivered segment
        per idle interval keeps the estimate live without risking a new hole.
        """
        if len(self.subflows) < 2:
            return 0
        size = min(MSS, self.data_acked)
        if size <= 0:
            return 0
        sent = 0
        for pid in sorted(self.subflows):
            sf = self.subflows[pid]
            if sf.in_flight or now_us - sf.last_send_us < PROBE_IDLE_US:
                continue
            if self.assist is not None and not self.assist.allows(pid, False):
                continue
            self._send_segment(sf, self.data_acked - size, size, now_us,
                               probe=True)
            sent += 1
        return sent

    def _peek_reinjection(self):
        while self.reinjection_pending:
            start, end, origin = self.reinjection_pending[0]
            start = max(start, self.data_acked)
            if start >= end:
                self.reinjection_pending.pop(0)
                continue
            return start, end, origin
        return None

    def _consume_reinjection(self, start: int, upto: int):
        s, e, origin = self.reinjection_pending[0]
        if upto >= e:
            self.reinjection_pending.pop(0)
        else:
            self.reinjection_pending[0] = (upto, e, origin)

    def _send_segment(
        self, sf: SubflowState, dsn: int, size: int, now_us: int,
        reinjection=False, probe=False,
    ):
        seg = SegmentRecord(
            ssn=sf.next_ssn,
            dsn=dsn,
            size=size,
            sent_at_us=now_us,
            first_sent_at_us=now_us,
            reinjection=reinjection,
        )
        sf.next_ssn += size
        sf.in_flight.append(seg)
        sf.last_send_us = now_us
        c = self.counters[sf.path_id]
        c.bytes_sent += size
        c.data_pkts += 1
        if probe:
            c.probe_pkts += 1
        elif reinjection:
            c.reinj_pkts += 1
        else:
            c.new_data_pkts += 1
        kind = "probe" if probe else ("reinj" if reinjection else "data")
        self.trace.add(
            now_us, self.conn_id, sf.path_id, "snd", kind, dsn, seg.ssn, size,
            sf.srtt_ms, 0.0, sf.cwnd, self.ofo.held_bytes(),
        )
        self._transmit(sf, seg, kind, now_us)
        self._arm_rto(sf)

    def _transmit(self, sf: SubflowState, seg: SegmentRecord, kind: str, now_us: int):
        link = self.links[sf.path_id]
        deliver_at = link.transmit(seg.size + WIRE_OVERHEAD, now_us)
        if deliver_at is not None:
            self.sim.schedule(
                deliver_at,
                lambda p=sf.path_id, s=seg.ssn, d=seg.dsn, z=seg.size, k=kind:
                    self._on_data_arrival(p, s, d, z, k),
            )

    def _retransmit(self, sf: SubflowState, seg: SegmentRecord, now_us: int):
        seg.retransmits += 1
        seg.sent_at_us = now_us
        sf.last_send_us = now_us
        sf.retransmit_count += 1
        self.counters[sf.path_id].rtx_pkts += 1
        self.counters[sf.path_id].rtx_bytes += seg.size
        self.trace.add(
            now_us, self.conn_id, sf.path_id, "snd", "rtx", seg.dsn, seg.ssn,
            seg.size, sf.srtt_ms, 0.0, sf.cwnd, self.ofo.held_bytes(),
        )
        self._transmit(sf, seg, "rtx", now_us)

    # -- receiver side ------------------------------------------------------------

    def _on_data_arrival(self, path_id: int, ssn: int, dsn: int, size: int, kind: str):
        now = self.sim.now
        self.arrived_data_bytes += size
        self.arrived_by_path[path_id] += size
        delivered, accepted = self.ofo.on_data(dsn, size)
        if accepted:
            tracker = self.ssn_tracker[path_id]
            tracker.add(ssn, ssn + size)
            self.ssn_base[path_id] = tracker.pop_leading(self.ssn_base[path_id])
        self.trace.add(
            now, self.conn_id, path_id, "rcv", kind, dsn, ssn, size,
            self.subflows[path_id].srtt_ms, 0.0, self.subflows[path_id].cwnd,
            self.ofo.held_bytes(),
        )
        if delivered and self.workload is not None:
            self.workload.on_delivered(self.ofo.next_expected, now)
        self._emit_ack(path_id, now)

    def _emit_ack(self, path_id: int, now_us: int):
        link = self.links[path_id]
        reports = self.assist.build_reports(now_us) if self.assist else None
        ack = (
            path_id,
            self.ssn_base[path_id],
            self.ofo.next_expected,
            self.ofo.window(),
            reports,
        )
        self.sim.schedule(
            now_us + link.ack_delay_us(now_us),
            lambda a=ack: self._on_ack(*a),
        )

    # -- sender side --------------------------------------------------------------

    def _on_ack(self, path_id: int, subflow_ack: int, data_ack: int, window: int,
                reports):
        now = self.sim.now
        sf = self.subflows[path_id]
        newly = [s for s in sf.in_flight if s.ssn_end <= subflow_ack]
        sample = 0.0
        if newly:
            # growth only counts when the window was actually the limiter
            cwnd_limited = len(sf.in_flight) >= int(sf.cwnd)
            sf.in_flight = [s for s in sf.in_flight if s.ssn_end > subflow_ack]
            # sample the oldest never-retransmitted segment this ack covers, so
            # time spent stuck behind a repaired hole shows up in the estimate
            fresh = [s for s in newly if s.retransmits == 0]
            if fresh:
                oldest = min(fresh, key=lambda s: (s.sent_at_us, s.ssn))
                sample = (now - oldest.sent_at_us) / 1000.0
                sf.on_rtt_sample(sample)
                self.rtt_samples.append((now, path_id, sample))
            bytes_acked = sum(s.size for s in newly)
            sf.bytes_acked += bytes_acked
            sf.epoch_acked += bytes_acked
            self.counters[path_id].bytes_acked += bytes_acked
            sf.dup_ack_count = 0
            sf.cc.on_segments_acked(
                sf, list(self.subflows.values()), len(newly), now,
                cwnd_limited=cwnd_limited,
            )
            if subflow_ack < sf.recover_ssn:
                # partial ack inside a recovery episode: repair the next hole
                # without another window cut
                oldest = sf.oldest_unacked()
                if oldest is not None and oldest.ssn < sf.recover_ssn:
                    self._retransmit(sf, oldest, now)
        elif subflow_ack == sf.subflow_acked and sf.in_flight:
            sf.dup_ack_count += 1
            if sf.dup_ack_count >= DUPACK_THRESHOLD:
                # one window cut per episode; later dupacks are part of the
                # same loss event until the episode's right edge is acked
                if sf.subflow_acked >= sf.recover_ssn:
                    sf.recover_ssn = sf.next_ssn
                    sf.on_loss("triple_dupack")
                    oldest = sf.oldest_unacked()
                    if oldest is not None:
                        self._retransmit(sf, oldest, now)
                sf.dup_ack_count = 0
        sf.subflow_acked = max(sf.subflow_acked, subflow_ack)
        self.data_acked = max(self.data_acked, data_ack)
        self.peer_window = window
        self.trace.add(
            now, self.conn_id, path_id, "rcv", "ack", data_ack, subflow_ack, 0,
            sf.srtt_ms, sample, sf.cwnd, self.ofo.held_bytes(),
        )
        if self.assist is not None and reports is not None:
            self.assist.on_reports(reports, now)
        self._check_complete(now)
        self._arm_rto(sf, restart=bool(newly))
        self.try_send(now)

    def _check_complete(self, now_us: int):
        if (
            self.completed_at_us is None
            and self.workload is not None
            and self.workload.done()
        ):
            self.completed_at_us = now_us
            if self.on_complete is not None:
                self.on_complete(self)

    # -- retransmission timer -------------------------------------------------------

    def _arm_rto(self, sf: SubflowState, restart: bool = False):
        # Classic timer discipline: starting a transmission arms the timer if
        # idle; an ack that advances the left edge restarts it from now.
        handle = self._rto_handle[sf.path_id]
        if not sf.in_flight:
            if handle is not None:
                self.sim.cancel(handle)
                self._rto_handle[sf.path_id] = None
            return
        if handle is not None:
            if not restart:
                return
            self.sim.cancel(handle)
        deadline = self.sim.now + round(sf.rto_ms * 1000) + 1
        self._rto_handle[sf.path_id] = self.sim.schedule(
            deadline, lambda pid=sf.path_id: self._on_rto_timer(pid)
        )

    def _on_rto_timer(self, path_id: int):
        now = self.sim.now
        sf = self.subflows[path_id]
        self._rto_handle[path_id] = None
        due = sf.should_retransmit(now)
        if due:
            sf.recover_ssn = sf.next_ssn
            sf.on_loss("rto")
            for seg in due:
                if not seg.reinjection:
                    self._queue_reinjection(seg.dsn, seg.dsn + seg.size, path_id)
            for seg in due:
                self._retransmit(sf, seg, now)
            self.try_send(now)
        self._arm_rto(sf, restart=True)

    def _queue_reinjection(self, start: int, end: int, origin: int):
        if len(self.subflows) < 2:
            return
        start = max(start, self.data_acked)
        if start >= end:
            return
        # reinject each span at most once; ssn-level retransmission covers copies
        for s, e in self.reinjected.add(start, end):
            self.reinjection_pending.append((s, e, origin))

    # -- lifecycle ------------------------------------------------------------------

    def kick(self):
        """Start pushing data; call once after construction."""
        self.try_send(self.sim.now)

    # -- reporting helpers ------------------------------------------------------------

    def total_retransmissions(self) -> int:
        return sum(c.rtx_pkts + c.reinj_pkts for c in self.counters.values())

    def total_data_packets(self) -> int:
        return sum(c.data_pkts + c.rtx_pkts for c in self.counters.values())

    def delivered_bytes(self) -> int:
        return self.ofo.delivered_bytes

    def utilization_share(self) -> float:
        """Share of sent bytes carried by the lowest-numbered subflow."""
        sent = {
            pid: c.bytes_sent + c.rtx_bytes for pid, c in self.counters.items()
        }
        total = sum(sent.values())
        if total == 0:
            return 0.5
        first = sent[min(sent)]
        return first / total
