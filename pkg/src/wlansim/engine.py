"""Deterministic discrete-event kernel.

Simulation time is an integer nanosecond count, so identical runs produce
identical clocks with no float drift.  Events fire in (time, sequence) order;
the sequence number makes same-time ordering follow insertion order, which is
what keeps traces reproducible.
"""

import heapq

import numpy as np

# time units, in nanoseconds
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000

# event kinds; the set is closed, trace lines use these names
ARRIVAL = "arrival"
CHANNEL = "channel"
BACKOFF = "backoff"
TIMER = "timer"
FRAME_START = "frame_start"
FRAME_END = "frame_end"
ACK_TIMEOUT = "ack_timeout"
ABORT = "abort"
INTERVAL = "interval"
SIM_END = "sim_end"


class Event:
    """One scheduled callback.  The object doubles as its own cancel handle."""

    __slots__ = ("fire_at", "seq", "kind", "node", "fn", "args", "cancelled")

    def __init__(self, fire_at, seq, kind, node, fn, args):
        self.fire_at = fire_at
        self.seq = seq
        self.kind = kind
        self.node = node
        self.fn = fn
        self.args = args
        self.cancelled = False


class Scheduler:
    """Min-heap event queue over integer-nanosecond time."""

    def __init__(self, trace=None):
        self._now = 0
        self._seq = 0
        self._heap = []
        self._trace = trace  # callable(time_ns, kind, node) or None

    def now(self):
        return self._now

    def schedule(self, fire_at, kind, node, fn, *args):
        """Queue fn(*args) to run at fire_at.  Returns the Event as a handle."""
        if fire_at < self._now:
            raise RuntimeError(
                f"scheduling into the past: {fire_at} < now {self._now}")
        ev = Event(int(fire_at), self._seq, kind, node, fn, args)
        self._seq += 1
        heapq.heappush(self._heap, (ev.fire_at, ev.seq, ev))
        return ev

    def cancel(self, ev):
        # lazy removal: the heap entry stays and is skipped on pop
        ev.cancelled = True

    def run_until(self, end):
        """Execute events with fire_at <= end; returns the executed count."""
        heap = self._heap
        trace = self._trace
        executed = 0
        while heap and heap[0][0] <= end:
            fire_at, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self._now = fire_at
            if trace is not None:
                trace(fire_at, ev.kind, ev.node)
            ev.fn(*ev.args)
            executed += 1
        if self._now < end:
            self._now = end
        return executed

    def pending(self):
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)


# purpose indices for the per-node RNG streams
BACKOFF_STREAM = 0
TRAFFIC_STREAM = 1
PER_STREAM = 2
PLACEMENT_STREAM = 3
AGENT_STREAM = 4
TUNING_STREAM = 5


def rng_stream(seed, trial, node, purpose):
    """Independent PCG64 generator keyed by (seed, trial, node, purpose).

    Same key gives bit-identical draws; any differing component gives a
    statistically independent stream.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial, node, purpose))
    return np.random.Generator(np.random.PCG64(ss))
