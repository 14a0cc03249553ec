"""Discrete-event core: integer-microsecond clock, ordered event queue, seeded RNG streams.

Every source of randomness in a run is a named substream derived from the
master seed, so two runs with the same configuration and seed execute the
exact same event sequence.
"""
from __future__ import annotations

import hashlib
import heapq
import random
from typing import Callable

US_PER_MS = 1_000
US_PER_S = 1_000_000


def us_from_ms(ms: float) -> int:
    return round(ms * US_PER_MS)


def us_from_s(s: float) -> int:
    return round(s * US_PER_S)


def ms_from_us(us: int) -> float:
    return us / US_PER_MS


def s_from_us(us: int) -> float:
    return us / US_PER_S


class SchedulingError(RuntimeError):
    """An event was scheduled before the current clock."""


def substream_seed(master_seed: int, name: str) -> int:
    """Derive a stable 64-bit seed for a named substream of the master seed."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Simulator:
    """Single-run event loop.

    Events fire in (time, insertion order); ties at the same microsecond are
    FIFO, which keeps replays byte-identical.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0  # microseconds
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self._stopped = False
        self._streams: dict[str, random.Random] = {}

    # -- scheduling ---------------------------------------------------------

    def schedule(self, at_us: int, fn: Callable[[], None]) -> int:
        """Schedule fn at an absolute time; returns a handle usable by cancel()."""
        if at_us < self.now:
            raise SchedulingError(
                f"cannot schedule at {at_us}us, clock already at {self.now}us"
            )
        self._seq += 1
        heapq.heappush(self._heap, (int(at_us), self._seq, fn))
        return self._seq

    def schedule_in(self, delay_us: int, fn: Callable[[], None]) -> int:
        return self.schedule(self.now + int(delay_us), fn)

    def cancel(self, handle: int) -> None:
        self._cancelled.add(handle)

    def stop(self) -> None:
        """Stop the run after the current event finishes."""
        self._stopped = True

    def run_until(self, deadline_us: int) -> int:
        """Execute every event with time <= deadline, in order.

        Returns the final clock, which never exceeds the deadline.  An early
        stop() leaves the clock at the stopping event's time.
        """
        self._stopped = False
        while self._heap and self._heap[0][0] <= deadline_us:
            at, seq, fn = heapq.heappop(self._heap)
            if seq in self._cancelled:
                self._cancelled.discard(seq)
                continue
            self.now = at
            fn()
            if self._stopped:
                return self.now
        self.now = max(self.now, deadline_us)
        return self.now

    def pending(self) -> int:
        return sum(1 for _, seq, _ in self._heap if seq not in self._cancelled)

    # -- randomness ---------------------------------------------------------

    def stream(self, name: str) -> random.Random:
        """Named RNG substream; same (seed, name) always yields the same draws."""
        rng = self._streams.get(name)
        if rng is None:
            rng = random.Random(substream_seed(self.seed, name))
            self._streams[name] = rng
        return rng


def draw(rng: random.Random, dist: tuple) -> float | int:
    """Draw one value from a distribution spec tuple.

    Specs: ("uniform", lo, hi), ("exponential", rate), ("bernoulli", p),
    ("categorical", weights) -> index.
    """
    kind = dist[0]
    if kind == "uniform":
        _, lo, hi = dist
        if hi < lo:
            raise ValueError(f"uniform bounds reversed: ({lo}, {hi})")
        return rng.uniform(lo, hi)
    if kind == "exponential":
        _, rate = dist
        if rate <= 0:
            raise ValueError(f"exponential rate must be > 0, got {rate}")
        return rng.expovariate(rate)
    if kind == "bernoulli":
        _, p = dist
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli p must be in [0, 1], got {p}")
        return 1 if rng.random() < p else 0
    if kind == "categorical":
        _, weights = dist
        if not weights or any(w < 0 for w in weights):
            raise ValueError(f"categorical weights must be non-negative, got {weights}")
        total = float(sum(weights))
        if total <= 0:
            raise ValueError("categorical weights sum to zero")
        x = rng.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if x < acc:
                return i
        return len(weights) - 1
    raise ValueError(f"unknown distribution kind {kind!r}")
