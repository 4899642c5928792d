"""Downlink traffic generation.

Loads are fractions of the link's maximum theoretical goodput, an analytic
zero-contention saturation bound, resolved to concrete bit rates before a
run starts.  All generators push 1,500 B packets into the AP queue.
"""

from . import phy
from .engine import ARRIVAL, SEC
from .mac import CW_MIN

PACKET_BYTES = 1500
BURST_PACKETS = 64
VR_FPS = 90

FULL_BUFFER = "full_buffer"
POISSON = "poisson"
BURSTY = "bursty"
VR = "vr"


def max_theoretical_goodput(width, mcs=11, nss=2, packet_bytes=PACKET_BYTES):
    """Payload bits of a maximal A-MPDU over one uncontended cycle, in bps.

    The cycle is DIFS + mean CW-16 backoff + RTS/SIFS/CTS/SIFS + data +
    SIFS + BA, with no errors and no contention.
    """
    n_mpdu = phy.MAX_AMPDU_BYTES // packet_bytes
    payload_bits = n_mpdu * packet_bytes * 8
    data_air = phy.frame_airtime(n_mpdu * packet_bytes, mcs, width, nss)
    cycle_ns = (phy.DIFS + (CW_MIN - 1) / 2 * phy.SLOT + phy.RTS_AIRTIME
                + phy.SIFS + phy.CTS_AIRTIME + phy.SIFS + data_air
                + phy.SIFS + phy.BA_AIRTIME)
    return payload_bits / (cycle_ns * 1e-9)


class FullBufferSource:
    """Keeps the queue pinned at capacity; no arrival events needed."""

    kind = FULL_BUFFER

    def __init__(self, bss, rng=None, packet_bytes=PACKET_BYTES):
        self.bss = bss
        self.packet_bytes = packet_bytes

    def start(self, sim):
        room = self.bss.queue.capacity - len(self.bss.queue)
        self.bss.on_arrival(self.bss.make_packets(room, self.packet_bytes, sim.now()))

    def on_release(self, count, now):
        self.bss.on_arrival(self.bss.make_packets(count, self.packet_bytes, now))

    def set_rate(self, rate_bps, sim):
        pass


class _RatedSource:
    """Common machinery for event-driven generators with a settable rate."""

    def __init__(self, bss, rng, rate_bps, packet_bytes=PACKET_BYTES):
        self.bss = bss
        self.rng = rng
        self.rate_bps = rate_bps
        self.packet_bytes = packet_bytes
        self._ev = None

    def start(self, sim):
        self._sim = sim
        self._schedule_next()

    def on_release(self, count, now):
        pass

    def set_rate(self, rate_bps, sim):
        # forget the pending arrival; the new rate takes over from now
        self.rate_bps = rate_bps
        if self._ev is not None:
            sim.cancel(self._ev)
        self._schedule_next()

    def _schedule_next(self):
        self._ev = self._sim.schedule(
            self._sim.now() + self._next_gap(), ARRIVAL, self.bss.ap_name,
            self._arrive)

    def _arrive(self):
        self._ev = None
        now = self._sim.now()
        n = self._batch_size()
        if n:
            self.bss.on_arrival(self.bss.make_packets(n, self.packet_bytes, now))
        self._schedule_next()


class PoissonSource(_RatedSource):
    kind = POISSON

    def _next_gap(self):
        mean_ns = self.packet_bytes * 8 / self.rate_bps * SEC
        return max(1, int(self.rng.exponential(mean_ns)))

    def _batch_size(self):
        return 1


class BurstySource(_RatedSource):
    kind = BURSTY

    def __init__(self, bss, rng, rate_bps, packet_bytes=PACKET_BYTES,
                 burst=BURST_PACKETS):
        super().__init__(bss, rng, rate_bps, packet_bytes)
        self.burst = burst

    def _next_gap(self):
        mean_ns = self.burst * self.packet_bytes * 8 / self.rate_bps * SEC
        return max(1, int(self.rng.exponential(mean_ns)))

    def _batch_size(self):
        return self.burst


class VrSource(_RatedSource):
    """Fixed 90 fps cadence; a fractional-byte accumulator keeps the long-run
    offered load exact despite whole-packet batches."""

    kind = VR

    def __init__(self, bss, rng, rate_bps, packet_bytes=PACKET_BYTES,
                 fps=VR_FPS):
        super().__init__(bss, rng, rate_bps, packet_bytes)
        self.fps = fps
        self.frame_gap = round(SEC / fps)
        self._owed_bytes = 0.0

    def _next_gap(self):
        return self.frame_gap

    def _batch_size(self):
        self._owed_bytes += self.rate_bps / 8.0 / self.fps
        n = int(self._owed_bytes // self.packet_bytes)
        self._owed_bytes -= n * self.packet_bytes
        return n


def make_source(kind, bss, rng, rate_bps=None, packet_bytes=PACKET_BYTES):
    if kind == FULL_BUFFER:
        return FullBufferSource(bss, rng, packet_bytes)
    if rate_bps is None or rate_bps <= 0:
        raise ValueError(f"{kind} traffic needs a positive rate")
    cls = {POISSON: PoissonSource, BURSTY: BurstySource, VR: VrSource}[kind]
    return cls(bss, rng, rate_bps, packet_bytes)
