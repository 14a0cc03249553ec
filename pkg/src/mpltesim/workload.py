"""Application workloads that feed a connection: greedy bulk transfer and an
adaptive-bitrate video session with a fixed rung ladder."""
from __future__ import annotations

from .engine import us_from_s

LADDER_MBPS = (0.05, 0.3, 1.0, 2.5, 5.0, 8.0, 12.0, 15.0)


class BulkTransfer:
    """Push total_bytes as fast as windows allow; done when the receiver has
    every byte in order."""

    def __init__(self, total_bytes: int):
        if total_bytes < 0:
            raise ValueError("workload.bytes must be >= 0")
        self.total_bytes = total_bytes
        self.conn = None
        self.delivered = 0

    def attach(self, conn):
        self.conn = conn

    def available_new_bytes(self, now_us: int) -> int:
        return self.total_bytes - self.conn.send_next_dsn

    def on_delivered(self, cum_bytes: int, now_us: int):
        self.delivered = cum_bytes

    def done(self) -> bool:
        return self.delivered >= self.total_bytes


def pick_bitrate(ewma_mbps: float, ladder=LADDER_MBPS, safety: float = 0.8) -> float:
    """Highest rung at or below safety x estimated throughput, else the lowest."""
    candidates = [r for r in ladder if r <= safety * ewma_mbps]
    return max(candidates) if candidates else min(ladder)


class DashSession:
    """Sequential segment downloads with throughput-EWMA rate selection.

    The next segment is requested as soon as the previous one lands, unless
    the playback buffer already holds buffer_target_s of video, in which case
    the request waits until the buffer drains back to the target.
    """

    def __init__(
        self,
        segment_s: float = 6.0,
        duration_s: float = 60.0,
        ladder=LADDER_MBPS,
        buffer_target_s: float = 30.0,
        safety: float = 0.8,
        ewma_half_life_segments: float = 3.0,
    ):
        if segment_s <= 0:
            raise ValueError("workload.segment_s must be > 0")
        self.segment_s = segment_s
        self.duration_s = duration_s
        self.ladder = tuple(sorted(ladder))
        self.buffer_target_s = buffer_target_s
        self.safety = safety
        self.ewma_decay = 0.5 ** (1.0 / ewma_half_life_segments)
        self.conn = None
        self.ewma_mbps = 0.0
        self.offered_end = 0
        self.segment_end_dsn = 0
        self.segment_start_us = 0
        self.current_bitrate = 0.0
        self.last_bitrate = None
        self.segment_idx = -1
        self.qoe_rows: list[tuple] = []  # idx, start_s, mbps, download_ms, switch, stalled_ms
        self.switches = 0
        # playback state
        self.playing = False
        self.buffer_s = 0.0
        self.stall_s = 0.0
        self._stall_mark = 0.0
        self._last_update_us = 0
        self._wake_handle = None

    def attach(self, conn):
        self.conn = conn
        self._request_next(conn.sim.now)

    # -- connection-facing interface --------------------------------------------

    def available_new_bytes(self, now_us: int) -> int:
        return self.offered_end - self.conn.send_next_dsn

    def on_delivered(self, cum_bytes: int, now_us: int):
        if self.segment_idx < 0 or cum_bytes < self.segment_end_dsn:
            return
        self._advance_playback(now_us)
        download_ms = (now_us - self.segment_start_us) / 1000.0
        seg_bytes = round(self.current_bitrate * 1e6 / 8 * self.segment_s)
        sample_mbps = seg_bytes * 8 / max(download_ms / 1000.0, 1e-6) / 1e6
        if self.ewma_mbps == 0.0:
            self.ewma_mbps = sample_mbps
        else:
            self.ewma_mbps = (
                self.ewma_decay * self.ewma_mbps
                + (1.0 - self.ewma_decay) * sample_mbps
            )
        switch = int(
            self.last_bitrate is not None and self.current_bitrate != self.last_bitrate
        )
        self.switches += switch
        stalled_ms = (self.stall_s - self._stall_mark) * 1000.0
        self._stall_mark = self.stall_s
        self.qoe_rows.append(
            (
                self.segment_idx,
                self.segment_start_us / 1e6,
                self.current_bitrate,
                download_ms,
                switch,
                stalled_ms,
            )
        )
        self.last_bitrate = self.current_bitrate
        if not self.playing:
            self.playing = True  # playback starts after the first segment
        self.buffer_s += self.segment_s
        self._schedule_next(now_us)

    def done(self) -> bool:
        return False  # a session runs until the scenario deadline

    # -- internals ----------------------------------------------------------------

    def _schedule_next(self, now_us: int):
        if now_us >= us_from_s(self.duration_s):
            return
        surplus = self.buffer_s - self.buffer_target_s
        if surplus <= 0:
            self._request_next(now_us)
            return
        wake_at = now_us + us_from_s(surplus)
        self._wake_handle = self.conn.sim.schedule(
            wake_at, lambda: self._on_wake()
        )

    def _on_wake(self):
        now = self.conn.sim.now
        if now >= us_from_s(self.duration_s):
            return
        self._advance_playback(now)
        self._request_next(now)
        self.conn.try_send(now)

    def _request_next(self, now_us: int):
        self.segment_idx += 1
        if self.segment_idx == 0:
            self.current_bitrate = min(self.ladder)
        else:
            self.current_bitrate = pick_bitrate(
                self.ewma_mbps, self.ladder, self.safety
            )
        seg_bytes = round(self.current_bitrate * 1e6 / 8 * self.segment_s)
        self.segment_start_us = now_us
        self.offered_end += seg_bytes
        self.segment_end_dsn = self.offered_end

    def _advance_playback(self, now_us: int):
        elapsed = (now_us - self._last_update_us) / 1e6
        self._last_update_us = now_us
        if not self.playing or elapsed <= 0:
            return
        drained = min(self.buffer_s, elapsed)
        self.buffer_s -= drained
        self.stall_s += elapsed - drained

    def finalize(self, now_us: int):
        self._advance_playback(now_us)

    # -- reporting ------------------------------------------------------------------

    def qoe_report(self, session_s: float) -> dict:
        minutes = max(session_s / 60.0, 1e-9)
        played = sum(r[2] * self.segment_s for r in self.qoe_rows)
        total_s = len(self.qoe_rows) * self.segment_s
        return {
            "segments": len(self.qoe_rows),
            "switches": self.switches,
            "switches_per_minute": self.switches / minutes,
            "stall_seconds": self.stall_s,
            "mean_bitrate_mbps": played / total_s if total_s else 0.0,
        }

    def qoe_lines(self):
        yield "segment_idx,start_s,bitrate_mbps,download_ms,switch,stalled_ms"
        for idx, start, mbps, dl, sw, st in self.qoe_rows:
            yield f"{idx},{start:.3f},{mbps},{dl:.3f},{sw},{st:.3f}"
