"""Time-tagged coincidence processing for heralded photon counting.

Detector events arrive as picosecond timestamps on a herald channel (A) and
a transmitted channel (B).  A herald and a transmitted event form a
coincidence when the B tag falls inside the window after the A tag; matching
is greedy, earliest-first and one-to-one.  Consecutive blocks of nu heralds
form one measurement set whose transmitted count feeds the probe statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from ._io import parse_int, read_table
from .errors import DomainError, ParseError, StreamOrderError

# Hardware time-tag resolution; all timestamps are multiples of this.
RESOLUTION_PS = 25

DEFAULT_WINDOW_PS = 4000

TIMETAG_CSV_HEADER = "channel,timestamp_ps"


class Channel(Enum):
    HERALD = "A"
    TRANSMITTED = "B"


@dataclass(frozen=True)
class TimeTagEvent:
    channel: Channel
    timestamp_ps: int

    def __post_init__(self):
        if self.timestamp_ps < 0:
            raise DomainError("timestamps must be non-negative")
        if self.timestamp_ps % RESOLUTION_PS:
            raise DomainError(
                f"timestamps must be multiples of {RESOLUTION_PS} ps"
            )


@dataclass(frozen=True)
class CoincidenceConfig:
    """Coincidence window and set size used when reducing raw streams."""

    nu: int
    window_ps: int = DEFAULT_WINDOW_PS
    symmetric: bool = False

    def __post_init__(self):
        if self.nu < 1:
            raise DomainError("nu must be at least 1")
        if self.window_ps <= 0:
            raise DomainError("window must be positive")


@njit(cache=True)
def _match_forward(times_a, times_b, window):
    # One-sided greedy matching: B strictly before A can never match a later
    # A either, so a single forward pointer over B suffices.
    na = times_a.shape[0]
    nb = times_b.shape[0]
    cap = min(na, nb)
    out_a = np.empty(cap, dtype=np.int64)
    out_b = np.empty(cap, dtype=np.int64)
    n = 0
    b = 0
    for a in range(na):
        lo = times_a[a]
        hi = times_a[a] + window
        while b < nb and times_b[b] < lo:
            b += 1
        if b < nb and times_b[b] <= hi:
            out_a[n] = a
            out_b[n] = b
            n += 1
            b += 1
    return out_a[:n], out_b[:n]


@njit(cache=True)
def _match_symmetric(times_a, times_b, window):
    # Two-sided window needs explicit bookkeeping: a B tag skipped for one
    # herald may still be the earliest unmatched candidate for a later one.
    na = times_a.shape[0]
    nb = times_b.shape[0]
    cap = min(na, nb)
    out_a = np.empty(cap, dtype=np.int64)
    out_b = np.empty(cap, dtype=np.int64)
    used = np.zeros(nb, dtype=np.bool_)
    n = 0
    first = 0
    for a in range(na):
        lo = times_a[a] - window
        hi = times_a[a] + window
        while first < nb and (used[first] or times_b[first] < lo):
            first += 1
        b = first
        while b < nb and times_b[b] <= hi:
            if not used[b]:
                used[b] = True
                out_a[n] = a
                out_b[n] = b
                n += 1
                break
            b += 1
    return out_a[:n], out_b[:n]


def _as_sorted_stream(times, name: str) -> np.ndarray:
    t = np.ascontiguousarray(times, dtype=np.int64)
    if t.ndim != 1:
        raise DomainError(f"{name} stream must be one-dimensional")
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise StreamOrderError(f"{name} stream timestamps are not sorted")
    return t


def match_coincidences(times_a, times_b, window_ps: int = DEFAULT_WINDOW_PS,
                       symmetric: bool = False) -> np.ndarray:
    """Greedy one-to-one coincidence pairs between two sorted streams.

    Scanning heralds in time order, each A event takes the earliest unmatched
    B event with 0 <= t_B - t_A <= window_ps (|t_B - t_A| <= window_ps when
    symmetric).  Window boundaries are inclusive.

    Args:
        times_a: sorted herald timestamps (ps).
        times_b: sorted transmitted-channel timestamps (ps).
        window_ps: coincidence window.
        symmetric: accept B tags on both sides of the herald.

    Returns:
        int64 array of shape (n_pairs, 2) holding (a_index, b_index) rows,
        ordered by a_index.
    """
    if window_ps <= 0:
        raise DomainError("window must be positive")
    ta = _as_sorted_stream(times_a, "A")
    tb = _as_sorted_stream(times_b, "B")
    kernel = _match_symmetric if symmetric else _match_forward
    idx_a, idx_b = kernel(ta, tb, np.int64(window_ps))
    return np.column_stack((idx_a, idx_b))


def group_into_sets(times_a, pairs: np.ndarray, nu: int) -> np.ndarray:
    """Transmitted counts per set of nu consecutive heralds.

    The herald stream is cut into contiguous blocks of nu events; a trailing
    partial block is discarded.  Each block's count is the number of its
    heralds that appear in the matched pairs.

    Returns:
        int64 array with one count in [0, nu] per complete block; empty when
        the stream holds fewer than nu heralds.
    """
    if nu < 1:
        raise DomainError("nu must be at least 1")
    ta = np.asarray(times_a)
    n_blocks = ta.size // nu
    if n_blocks == 0:
        return np.zeros(0, dtype=np.int64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    a_idx = pairs[:, 0]
    if a_idx.size and (a_idx.min() < 0 or a_idx.max() >= ta.size):
        raise DomainError("pair indices fall outside the herald stream")
    a_idx = a_idx[a_idx < n_blocks * nu]
    return np.bincount(a_idx // nu, minlength=n_blocks).astype(np.int64)


def simulate_streams(herald_rate_hz: float, transmission: float,
                     duration_s: float, rng: np.random.Generator,
                     jitter_ps: int = 1000,
                     background_rate_hz: float = 0.0):
    """Synthetic detector streams for a constant-transmission interval.

    Heralds form a Poisson process at herald_rate_hz, quantised to the tag
    resolution.  Each herald independently spawns a transmitted event with
    probability `transmission`, delayed by a uniform amount in [0, jitter_ps].
    An optional uncorrelated background process adds accidental B tags.

    Returns:
        (times_a, times_b) sorted int64 picosecond arrays.
    """
    if herald_rate_hz <= 0:
        raise DomainError("herald rate must be positive")
    if duration_s < 0:
        raise DomainError("duration must be non-negative")
    if not 0.0 <= transmission <= 1.0:
        raise DomainError("transmission must lie in [0, 1]")
    if jitter_ps < 0 or background_rate_hz < 0:
        raise DomainError("jitter and background rate must be non-negative")

    def quantise(seconds):
        ps = seconds * 1e12 / RESOLUTION_PS
        return (np.rint(ps).astype(np.int64)) * RESOLUTION_PS

    n_heralds = rng.poisson(herald_rate_hz * duration_s)
    times_a = np.sort(quantise(rng.uniform(0.0, duration_s, n_heralds)))
    detected = rng.random(n_heralds) < transmission
    delays = rng.uniform(0.0, jitter_ps, int(detected.sum())) / 1e12
    times_b = times_a[detected] + quantise(delays)
    if background_rate_hz > 0:
        n_bg = rng.poisson(background_rate_hz * duration_s)
        bg = quantise(rng.uniform(0.0, duration_s, n_bg))
        times_b = np.concatenate((times_b, bg))
    return times_a, np.sort(times_b)


def write_timetag_csv(path: str, times_a, times_b) -> None:
    """Write both channels into one globally time-sorted CSV."""
    ta = np.asarray(times_a, dtype=np.int64)
    tb = np.asarray(times_b, dtype=np.int64)
    chan = np.concatenate((np.zeros(ta.size, dtype=np.int64),
                           np.ones(tb.size, dtype=np.int64)))
    times = np.concatenate((ta, tb))
    order = np.lexsort((chan, times))
    labels = (Channel.HERALD.value, Channel.TRANSMITTED.value)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TIMETAG_CSV_HEADER + "\n")
        for i in order:
            fh.write(f"{labels[chan[i]]},{times[i]}\n")


def write_channel_csv(path: str, times, channel: Channel) -> None:
    """Write a single channel in the same CSV format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TIMETAG_CSV_HEADER + "\n")
        for t in np.asarray(times, dtype=np.int64):
            fh.write(f"{channel.value},{t}\n")


def read_timetag_csv(*paths: str):
    """Read combined or per-channel CSVs back into two sorted streams.

    Returns:
        (times_a, times_b) int64 arrays.
    """
    ta: list[int] = []
    tb: list[int] = []
    for path in paths:
        for lineno, (chan, stamp) in read_table(path, TIMETAG_CSV_HEADER):
            t = parse_int(stamp, path, lineno, "timestamp_ps")
            if t < 0 or t % RESOLUTION_PS:
                raise ParseError(
                    f"timestamp {t} is not a non-negative multiple of "
                    f"{RESOLUTION_PS} ps", path, lineno)
            if chan == Channel.HERALD.value:
                ta.append(t)
            elif chan == Channel.TRANSMITTED.value:
                tb.append(t)
            else:
                raise ParseError(f"unknown channel {chan!r}", path, lineno)
    return (np.sort(np.array(ta, dtype=np.int64)),
            np.sort(np.array(tb, dtype=np.int64)))
