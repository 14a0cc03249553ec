"""Offline analytics over packet traces and 1Hz signal logs.

Pure functions over immutable arrays: last-mile event detection, mobility
classification, normalized RTT around events, queuing delay, utilization
histograms, and 1-sigma ellipse statistics for (delay, throughput) clouds.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

DROP_THRESHOLD_DB = 6.0
# absorb the one-decimal rounding of logged rssi values
_DB_SLACK = 0.05
MAX_SAMPLE_GAP_S = 1.5

# Classifier thresholds, calibrated on generator-labeled synthetic windows
# (see tests).  Counts are per 5-minute window summed over both paths.
CLASSIFIER_WINDOW_S = 300.0
HIGH_EVENT_COUNT = 45.0
HIGH_HANDOVER_COUNT = 24.0
LARGE_DROP_SHARE_CUT = 0.70
LARGE_DROP_DB = 9.0

LABEL_STATIC = "static"
LABEL_LOW = "low_speed"
LABEL_HIGH = "high_speed"


@dataclass
class DetectedEvent:
    kind: str  # "drop" | "handover"
    path_id: int
    time_s: float
    magnitude_db: float = 0.0


@dataclass
class DetectionResult:
    events: list = field(default_factory=list)
    mobility_start_s: float | None = None
    sampling_gaps: list = field(default_factory=list)  # (path_id, from_s, to_s)

    def drops(self):
        return [e for e in self.events if e.kind == "drop"]

    def handovers(self):
        return [e for e in self.events if e.kind == "handover"]


def detect_events(samples, threshold_db: float = DROP_THRESHOLD_DB) -> DetectionResult:
    """Flag last-mile events from (time_s, path_id, rssi_dbm, bsid) rows.

    A drop is a decrease >= threshold between consecutive samples of one path
    (magnitude = the decrease); a handover is any change of basestation id.
    The mobility-start stamp fires at the first event on either path, where
    increases >= threshold also count.  Sampling gaps are flagged, never
    interpolated.
    """
    result = DetectionResult()
    by_path: dict[int, list] = {}
    for t, pid, rssi, bsid in samples:
        by_path.setdefault(int(pid), []).append((float(t), float(rssi), str(bsid)))
    start_candidates = []
    for pid, rows in sorted(by_path.items()):
        rows.sort(key=lambda r: r[0])
        for (t0, rssi0, bsid0), (t1, rssi1, bsid1) in zip(rows, rows[1:]):
            if t1 - t0 > MAX_SAMPLE_GAP_S:
                result.sampling_gaps.append((pid, t0, t1))
            delta = rssi0 - rssi1
            if delta >= threshold_db - _DB_SLACK:
                result.events.append(DetectedEvent("drop", pid, t1, delta))
                start_candidates.append(t1)
            elif -delta >= threshold_db - _DB_SLACK:
                # increases do not form events but do mark mobility start
                start_candidates.append(t1)
            if bsid1 != bsid0:
                result.events.append(DetectedEvent("handover", pid, t1))
                start_candidates.append(t1)
    result.events.sort(key=lambda e: (e.time_s, e.path_id, e.kind))
    if start_candidates:
        result.mobility_start_s = min(start_candidates)
    return result


def window_features(events, window_s: float) -> dict:
    """Counts used by the mobility classifier, normalized to a 5-minute window."""
    scale = CLASSIFIER_WINDOW_S / window_s
    drops = [e for e in events if e.kind == "drop"]
    handovers = [e for e in events if e.kind == "handover"]
    large = [e for e in drops if e.magnitude_db >= LARGE_DROP_DB]
    return {
        "event_count": (len(drops) + len(handovers)) * scale,
        "handover_count": len(handovers) * scale,
        "large_drop_share": (len(large) / len(drops)) if drops else 0.0,
    }


def classify_mobility(events, window_s: float = CLASSIFIER_WINDOW_S) -> str:
    """Label one observation window as static / low_speed / high_speed."""
    if window_s < 60.0:
        raise ValueError(f"window of {window_s}s is too short to classify (< 60s)")
    feats = window_features(events, window_s)
    if feats["event_count"] == 0:
        return LABEL_STATIC
    if (
        feats["event_count"] >= HIGH_EVENT_COUNT
        or feats["handover_count"] >= HIGH_HANDOVER_COUNT
        or feats["large_drop_share"] > LARGE_DROP_SHARE_CUT
    ):
        return LABEL_HIGH
    return LABEL_LOW


# -- trace handling ----------------------------------------------------------------


@dataclass
class TraceData:
    time_us: np.ndarray
    conn_id: np.ndarray
    path_id: np.ndarray
    direction: np.ndarray
    kind: np.ndarray
    dsn: np.ndarray
    ssn: np.ndarray
    size: np.ndarray
    srtt_ms: np.ndarray
    rtt_ms: np.ndarray
    cwnd: np.ndarray
    ofo_bytes: np.ndarray

    def __len__(self):
        return len(self.time_us)

    def initial_rtt_ms(self, path_id: int) -> float:
        mask = (self.kind == "init") & (self.path_id == path_id)
        if not mask.any():
            raise ValueError(f"trace has no establishment row for path {path_id}")
        return float(self.rtt_ms[mask][0])

    def rtt_sample_rows(self, path_id: int | None = None):
        """(time_s, rtt_ms) of per-packet RTT samples, optionally one path."""
        mask = (self.kind == "ack") & (self.rtt_ms > 0)
        if path_id is not None:
            mask &= self.path_id == path_id
        return self.time_us[mask] / 1e6, self.rtt_ms[mask]


def parse_trace_rows(lines) -> TraceData:
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise ValueError("empty trace")
    expected = (
        "time_us,conn_id,path_id,dir,kind,dsn,ssn,size,srtt_ms,rtt_ms,cwnd,ofo_bytes"
    ).split(",")
    if [h.strip() for h in header] != expected:
        raise ValueError(f"unexpected trace header: {header}")
    cols = [[] for _ in expected]
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise ValueError(f"malformed trace row at line {lineno}: {row}")
        try:
            cols[0].append(int(row[0]))
            cols[1].append(row[1])
            cols[2].append(int(row[2]))
            cols[3].append(row[3])
            cols[4].append(row[4])
            cols[5].append(int(row[5]))
            cols[6].append(int(row[6]))
            cols[7].append(int(row[7]))
            cols[8].append(float(row[8]))
            cols[9].append(float(row[9]))
            cols[10].append(float(row[10]))
            cols[11].append(int(row[11]))
        except ValueError as exc:
            raise ValueError(f"malformed trace row at line {lineno}: {exc}") from None
    return TraceData(
        time_us=np.array(cols[0], dtype=np.int64),
        conn_id=np.array(cols[1]),
        path_id=np.array(cols[2], dtype=np.int64),
        direction=np.array(cols[3]),
        kind=np.array(cols[4]),
        dsn=np.array(cols[5], dtype=np.int64),
        ssn=np.array(cols[6], dtype=np.int64),
        size=np.array(cols[7], dtype=np.int64),
        srtt_ms=np.array(cols[8], dtype=np.float64),
        rtt_ms=np.array(cols[9], dtype=np.float64),
        cwnd=np.array(cols[10], dtype=np.float64),
        ofo_bytes=np.array(cols[11], dtype=np.int64),
    )


def load_trace(path) -> TraceData:
    with open(path, newline="") as fh:
        return parse_trace_rows(fh)


def load_signal(path):
    """Read (time_s, path_id, rssi_dbm, bsid) rows from a signal log."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
            "time_s", "path_id", "rssi_dbm", "bsid",
        ]:
            raise ValueError(f"unexpected signal header: {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), int(row[1]), float(row[2]), row[3]))
            except (ValueError, IndexError) as exc:
                raise ValueError(
                    f"malformed signal row at line {lineno}: {exc}"
                ) from None
    return rows


# -- RTT metrics -------------------------------------------------------------------


def normalized_rtt(trace: TraceData, event_at_s: float, recovery_s: float,
                   path_id: int) -> list[tuple[float, float]]:
    """Per-second mean of sample_rtt / establishment_rtt over the recovery window."""
    initial = trace.initial_rtt_ms(path_id)
    if initial <= 0:
        raise ValueError(f"trace lacks a positive establishment RTT for path {path_id}")
    times, rtts = trace.rtt_sample_rows(path_id)
    out = []
    second = math.floor(event_at_s)
    while second < event_at_s + recovery_s:
        mask = (times >= second) & (times < second + 1)
        if mask.any():
            out.append((float(second), float(np.mean(rtts[mask]) / initial)))
        second += 1
    return out


def isolated_events(events, recovery_s: float):
    """Keep events with no other event within one recovery window on any path."""
    times = sorted((e.time_s, i) for i, e in enumerate(events))
    keep = []
    for idx, (t, i) in enumerate(times):
        prev_ok = idx == 0 or t - times[idx - 1][0] > recovery_s
        next_ok = idx == len(times) - 1 or times[idx + 1][0] - t > recovery_s
        if prev_ok and next_ok:
            keep.append(events[i])
    return keep


def peak_normalized_rtt(trace: TraceData) -> float:
    """Max per-second normalized RTT over all paths (1.0 when only baseline)."""
    peak = 0.0
    for pid in np.unique(trace.path_id):
        pid = int(pid)
        try:
            initial = trace.initial_rtt_ms(pid)
        except ValueError:
            continue
        times, rtts = trace.rtt_sample_rows(pid)
        if len(times) == 0:
            continue
        seconds = np.floor(times).astype(np.int64)
        for s in np.unique(seconds):
            mean = float(np.mean(rtts[seconds == s]))
            peak = max(peak, mean / initial)
    return peak


def queuing_delay(rtt_ms: np.ndarray) -> np.ndarray:
    """Per-packet delay in excess of the minimum sample; >= 0 with one exact zero."""
    rtt_ms = np.asarray(rtt_ms, dtype=np.float64)
    if len(rtt_ms) == 0:
        raise ValueError("queuing delay needs at least one RTT sample")
    return rtt_ms - rtt_ms.min()


def queuing_delay_from_trace(trace: TraceData, path_id: int | None = None
                             ) -> np.ndarray:
    _, rtts = trace.rtt_sample_rows(path_id)
    return queuing_delay(rtts)


# -- utilization -------------------------------------------------------------------


def skew(u: float) -> float:
    return 2.0 * abs(u - 0.5)


def utilization_histogram(u_fractions) -> dict:
    """10-cell histogram over u in [0, 1] plus the mean skew of the batch."""
    us = np.asarray(list(u_fractions), dtype=np.float64)
    if len(us) == 0:
        raise ValueError("utilization histogram needs at least one run")
    if (us < 0).any() or (us > 1).any():
        raise ValueError("u fractions must lie in [0, 1]")
    counts, edges = np.histogram(us, bins=10, range=(0.0, 1.0))
    return {
        "bins": counts.tolist(),
        "edges": edges.tolist(),
        "mean_skew": float(np.mean(2.0 * np.abs(us - 0.5))),
    }


# -- ellipse statistics --------------------------------------------------------------


@dataclass
class EllipseStats:
    mean: tuple[float, float]
    median: tuple[float, float]
    covariance: list  # 2x2, row major
    axis_lengths: tuple[float, float]  # major, minor (1-sigma)
    orientation_deg: float  # major-axis angle from the delay axis


def ellipse(points) -> EllipseStats:
    """1-sigma ellipse of (delay_ms, throughput_mbps) points."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("ellipse needs at least two (delay, throughput) points")
    mean = pts.mean(axis=0)
    median = np.median(pts, axis=0)
    centered = pts - mean
    cov = centered.T @ centered / (pts.shape[0] - 1)
    # symmetric 2x2: eigh gives ascending real eigenvalues
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    major = math.sqrt(float(vals[1]))
    minor = math.sqrt(float(vals[0]))
    direction = vecs[:, 1] if vals[1] > 0 else np.array([1.0, 0.0])
    angle = math.degrees(math.atan2(float(direction[1]), float(direction[0])))
    if angle < -90.0:
        angle += 180.0
    elif angle > 90.0:
        angle -= 180.0
    return EllipseStats(
        mean=(float(mean[0]), float(mean[1])),
        median=(float(median[0]), float(median[1])),
        covariance=[[float(cov[0, 0]), float(cov[0, 1])],
                    [float(cov[1, 0]), float(cov[1, 1])]],
        axis_lengths=(major, minor),
        orientation_deg=angle,
    )


# -- throughput reconstruction -------------------------------------------------------


def goodput_series(trace: TraceData, bin_s: float = 1.0):
    """(bin_start_s, mbps) of in-order delivery progress reconstructed per bin."""
    mask = (trace.direction == "rcv") & (trace.kind != "ack")
    times = trace.time_us[mask]
    if len(times) == 0:
        return []
    order = np.argsort(times, kind="stable")
    times = times[order]
    starts = trace.dsn[mask][order]
    ends = starts + trace.size[mask][order]
    horizon = float(times[-1]) / 1e6
    spans: list[tuple[int, int]] = []
    frontier = 0
    out = []
    idx = 0
    t = 0.0
    while t <= horizon:
        limit = (t + bin_s) * 1e6
        before = frontier
        while idx < len(times) and times[idx] < limit:
            s, e = int(starts[idx]), int(ends[idx])
            idx += 1
            if e <= frontier:
                continue
            s = max(s, frontier)
            spans.append((s, e))
            spans.sort()
            merged = []
            for a, b in spans:
                if merged and a <= merged[-1][1]:
                    merged[-1] = (merged[-1][0], max(merged[-1][1], b))
                else:
                    merged.append((a, b))
            spans = merged
            while spans and spans[0][0] <= frontier:
                frontier = max(frontier, spans[0][1])
                spans.pop(0)
        out.append((t, (frontier - before) * 8 / bin_s / 1e6))
        t += bin_s
    return out
