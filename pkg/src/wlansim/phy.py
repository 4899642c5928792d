"""Spectrum model over four 20 MHz basic channels.

Covers propagation, MCS selection, PHY rates and airtimes, plus the shared
SpectrumState that every DCF state machine senses and transmits through.
Two busy views exist on purpose: deferral sensing counts everything on the
air, while the learning features F1/F2 exclude the observer's own BSS.
"""

import math
from collections import deque

from .engine import US, MS

# basic channels and the seven legal bonded groups, labelled #1..#7
BASIC_CHANNELS = (1, 2, 3, 4)
CHANNEL_GROUPS = ((1,), (2,), (3,), (4,), (1, 2), (3, 4), (1, 2, 3, 4))
GROUP_LABEL = {g: i + 1 for i, g in enumerate(CHANNEL_GROUPS)}

# 802.11ax SU timing
SLOT = 9 * US
SIFS = 16 * US
DIFS = SIFS + 2 * SLOT   # 34 us
PIFS = SIFS + SLOT       # 25 us
DATA_PREAMBLE = 44 * US
SYMBOL = 13_600          # ns, 12.8 us + 0.8 us GI

TX_POWER_DBM = 20.0
CCA_THRESHOLD_DBM = -82.0
FREQ_HZ = 5.0e9
PATH_LOSS_EXPONENT = 4.0

_FSPL_1M_DB = 20.0 * math.log10(4.0 * math.pi * FREQ_HZ / 3.0e8)

# MCS 0-11: (modulation bits, coding numerator, denominator, 20 MHz sensitivity dBm)
_MCS_TABLE = (
    (1, 1, 2, -82.0),
    (2, 1, 2, -79.0),
    (2, 3, 4, -77.0),
    (4, 1, 2, -74.0),
    (4, 3, 4, -70.0),
    (6, 2, 3, -66.0),
    (6, 3, 4, -65.0),
    (6, 5, 6, -64.0),
    (8, 3, 4, -59.0),
    (8, 5, 6, -57.0),
    (10, 3, 4, -54.0),
    (10, 5, 6, -52.0),
)

_SUBCARRIERS = {20: 234, 40: 468, 80: 980}

MAX_AMPDU_BYTES = 65_535

# control frames go at the lowest mandatory rate on a 20 MHz channel:
# 20 us preamble, 4 us symbols, 24 data bits per symbol, 16+6 service/tail bits
_CTRL_PREAMBLE = 20 * US
_CTRL_SYMBOL = 4 * US
_CTRL_BITS_PER_SYMBOL = 24

RTS = "rts"
CTS = "cts"
DATA = "data"
BA = "ba"


def path_loss_db(distance_m):
    """Log-distance path loss, free-space intercept at 1 m, exponent 4."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return _FSPL_1M_DB + 10.0 * PATH_LOSS_EXPONENT * math.log10(distance_m)


def rssi_dbm(distance_m):
    return TX_POWER_DBM - path_loss_db(distance_m)


def sensitivity_dbm(mcs, width):
    # +3 dB per bandwidth doubling relative to the 20 MHz column
    return _MCS_TABLE[mcs][3] + 3.0 * round(math.log2(width / 20))


def select_mcs(rssi, width=20):
    """Highest MCS index decodable at this RSSI, or ValueError if none is."""
    best = None
    for i in range(len(_MCS_TABLE)):
        if rssi >= sensitivity_dbm(i, width):
            best = i
    if best is None:
        raise ValueError(f"rssi {rssi:.1f} dBm below MCS 0 sensitivity at {width} MHz")
    return best


def mcs_range_m(mcs, width):
    """Maximum link distance at which mcs is still decodable."""
    margin = TX_POWER_DBM - sensitivity_dbm(mcs, width) - _FSPL_1M_DB
    return 10.0 ** (margin / (10.0 * PATH_LOSS_EXPONENT))


def phy_rate(mcs, width, nss=2):
    """Data rate in bits per second."""
    bits, num, den, _ = _MCS_TABLE[mcs]
    return _SUBCARRIERS[width] * bits * nss * num / den / (SYMBOL * 1e-9)


def frame_airtime(payload_bytes, mcs, width, nss=2):
    """Data-frame airtime in ns: preamble plus a whole number of OFDM symbols."""
    if payload_bytes > MAX_AMPDU_BYTES:
        raise ValueError(f"payload {payload_bytes} B exceeds {MAX_AMPDU_BYTES} B")
    bits, num, den, _ = _MCS_TABLE[mcs]
    # bits per symbol = subcarriers*bits*nss*num/den; keep the ceil exact in ints
    numer = payload_bytes * 8 * den
    denom = _SUBCARRIERS[width] * bits * nss * num
    n_symbols = -(-numer // denom)
    return DATA_PREAMBLE + n_symbols * SYMBOL


def control_airtime(nbytes):
    bits = 16 + 8 * nbytes + 6
    n_symbols = -(-bits // _CTRL_BITS_PER_SYMBOL)
    return _CTRL_PREAMBLE + n_symbols * _CTRL_SYMBOL


RTS_AIRTIME = control_airtime(20)   # 52 us
CTS_AIRTIME = control_airtime(14)   # 44 us
BA_AIRTIME = control_airtime(32)    # 68 us


class Transmission:
    """One frame on the air, spanning a set of basic channels."""

    __slots__ = ("bss", "src", "kind", "channels", "start", "end", "payload",
                 "corrupted")

    def __init__(self, bss, src, kind, channels, start, end, payload=None):
        self.bss = bss
        self.src = src
        self.kind = kind
        self.channels = channels
        self.start = start
        self.end = end
        self.payload = payload
        self.corrupted = False


class SpectrumState:
    """Shared view of the four basic channels.

    Tracks active transmissions, per-channel busy history for the occupancy
    features, and subscriber lists so contending nodes hear busy/idle edges
    on their primary channel.
    """

    def __init__(self, window=100 * MS):
        self.window = window
        self.active = {c: set() for c in BASIC_CHANNELS}
        self.last_busy_end = {c: 0 for c in BASIC_CHANNELS}
        # per channel: (start, end, bss) in end-time order
        self.history = {c: deque() for c in BASIC_CHANNELS}
        self._listeners = {c: [] for c in BASIC_CHANNELS}

    def subscribe(self, channel, listener):
        self._listeners[channel].append(listener)

    def unsubscribe(self, channel, listener):
        self._listeners[channel].remove(listener)

    def add(self, tx, now):
        """Put a frame on the air; overlapping frames corrupt each other."""
        for c in tx.channels:
            chan_active = self.active[c]
            if chan_active:
                for other in chan_active:
                    other.corrupted = True
                tx.corrupted = True
                chan_active.add(tx)
            else:
                chan_active.add(tx)
                for listener in tuple(self._listeners[c]):
                    listener.primary_busy(c, now)

    def remove(self, tx, now):
        for c in tx.channels:
            self.active[c].discard(tx)
            self.last_busy_end[c] = now
            self.history[c].append((tx.start, now, tx.bss))
            if not self.active[c]:
                for listener in tuple(self._listeners[c]):
                    listener.primary_idle(c, now)

    # -- deferral view (own BSS counts) --

    def deferral_busy(self, channel):
        return bool(self.active[channel])

    def idle_since(self, channel):
        """Start of the current idle stretch, or None while busy."""
        if self.active[channel]:
            return None
        return self.last_busy_end[channel]

    def pifs_idle(self, channel, now):
        """Idle through the PIFS ending at now.

        A frame starting exactly at now is invisible to this look-back, which
        is what lets two same-slot winners collide instead of one politely
        shrinking width.
        """
        for tx in self.active[channel]:
            if tx.start < now:
                return False
        return self.last_busy_end[channel] <= now - PIFS

    # -- feature view (own BSS excluded) --

    def feature_busy_flags(self, own_bss):
        return tuple(
            1 if any(tx.bss != own_bss for tx in self.active[c]) else 0
            for c in BASIC_CHANNELS)

    def occupancy(self, own_bss, now):
        """Fraction of the trailing window each channel was busy with foreign
        traffic.  Early in the run the denominator is the elapsed time."""
        horizon = max(0, now - self.window)
        denom = now - horizon
        if denom <= 0:
            return (0.0, 0.0, 0.0, 0.0)
        out = []
        for c in BASIC_CHANNELS:
            hist = self.history[c]
            while hist and hist[0][1] <= horizon:
                hist.popleft()
            spans = [(max(s, horizon), e) for s, e, b in hist if b != own_bss]
            spans += [(max(tx.start, horizon), now)
                      for tx in self.active[c] if tx.bss != own_bss]
            out.append(_union_length(spans) / denom)
        return tuple(out)


def _union_length(spans):
    if not spans:
        return 0
    spans.sort()
    total = 0
    cur_s, cur_e = spans[0]
    for s, e in spans[1:]:
        if s > cur_e:
            total += cur_e - cur_s
            cur_s, cur_e = s, e
        elif e > cur_e:
            cur_e = e
    return total + (cur_e - cur_s)
