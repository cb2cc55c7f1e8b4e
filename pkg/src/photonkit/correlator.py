"""Multi-stop coincidence correlation of two time-tag streams.

Every pair ``(t_a, t_b)`` with ``|t_b - t_a| < tau_max`` is counted in the
half-open bin ``[k*w, (k+1)*w)`` containing ``t_b - t_a``. The sweep uses
binary search on the sorted ``b`` stream to find each ``a`` tag's window, so
cost is O((n + m) log m + pairs).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .tags import PS_PER_NS, PS_PER_S, TagStream

DEFAULT_BIN_WIDTH = 100  # ps
DEFAULT_TAU_MAX = 50_000  # ps
# caps the size of the temporary pair arrays in one sweep step
_MAX_PAIRS_PER_STEP = 1 << 22


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_width: int
    tau_max: int
    counts: np.ndarray
    total_pairs: int
    norm: Optional[float] = None

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.tau_max % self.bin_width:
            raise ValueError("tau_max must be a multiple of bin_width")
        counts = np.asarray(self.counts)
        if counts.shape != (2 * self.tau_max // self.bin_width,):
            raise ValueError("counts length does not match the bin layout")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if self.norm is not None and not self.norm > 0:
            raise ValueError("norm must be positive")
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self):
        return self.counts.size

    @property
    def edges(self):
        """Bin edges in ps, length ``n_bins + 1``."""
        return np.arange(-self.tau_max, self.tau_max + 1, self.bin_width, dtype=np.int64)

    @property
    def centers(self):
        """Bin centres in ps."""
        return self.edges[:-1] + 0.5 * self.bin_width

    @property
    def centers_ns(self):
        return self.centers / PS_PER_NS

    @property
    def normalized(self):
        if self.norm is None:
            raise ValueError("histogram has not been normalized")
        return self.counts / self.norm

    def __add__(self, other):
        if (self.bin_width, self.tau_max) != (other.bin_width, other.tau_max):
            raise ValueError("cannot merge histograms with different binning")
        return Histogram(self.bin_width, self.tau_max, self.counts + other.counts,
                         self.total_pairs + other.total_pairs)

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return (self.bin_width == other.bin_width and self.tau_max == other.tau_max
                and self.total_pairs == other.total_pairs and self.norm == other.norm
                and np.array_equal(self.counts, other.counts))


def _as_times(x):
    return x.times if isinstance(x, TagStream) else np.asarray(x, dtype=np.int64)


def _check_sorted(t, name):
    if t.size > 1 and np.any(t[1:] < t[:-1]):
        raise ValueError(f"stream {name} is not time-sorted")


def _delays(a, b, lo, hi):
    """All delays b[j] - a[i] for j in [lo[i], hi[i])."""
    n = hi - lo
    total = int(n.sum())
    a_idx = np.repeat(np.arange(a.size), n)
    first = np.repeat(np.cumsum(n) - n, n)
    b_idx = np.repeat(lo, n) + (np.arange(total) - first)
    return b[b_idx] - a[a_idx]


def _correlate_block(a, b, bin_width, tau_max):
    n_bins = 2 * tau_max // bin_width
    counts = np.zeros(n_bins, np.int64)
    if a.size == 0 or b.size == 0:
        return counts
    lo = np.searchsorted(b, a - tau_max, side="right")
    hi = np.searchsorted(b, a + tau_max, side="left")
    per_tag = hi - lo
    csum = np.cumsum(per_tag)
    start = 0
    while start < a.size:
        # advance so each step holds at most _MAX_PAIRS_PER_STEP pairs (or one tag)
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + _MAX_PAIRS_PER_STEP, side="right"))
        stop = max(stop, start + 1)
        d = _delays(a[start:stop], b, lo[start:stop], hi[start:stop])
        counts += np.bincount((d + tau_max) // bin_width, minlength=n_bins)
        start = stop
    return counts


def cross_correlate(a, b, bin_width=DEFAULT_BIN_WIDTH, tau_max=DEFAULT_TAU_MAX,
                    exclude_self=None):
    """Histogram of delays ``t_b - t_a`` over ``[-tau_max, tau_max)``.

    ``a`` and ``b`` are TagStreams or sorted int64 ps arrays. When both
    arguments are the same object the zero-delay self pairs are removed;
    pass ``exclude_self`` to force either behaviour.
    """
    bin_width, tau_max = int(bin_width), int(tau_max)
    if bin_width <= 0 or bin_width > tau_max:
        raise ValueError("require 0 < bin_width <= tau_max")
    if tau_max % bin_width:
        raise ValueError("tau_max must be a multiple of bin_width")
    if exclude_self is None:
        exclude_self = a is b
    ta, tb = _as_times(a), _as_times(b)
    _check_sorted(ta, "a")
    _check_sorted(tb, "b")
    counts = _correlate_block(ta, tb, bin_width, tau_max)
    if exclude_self:
        if ta.size != tb.size:
            raise ValueError("self-pair exclusion needs identical streams")
        counts[tau_max // bin_width] -= ta.size
    return Histogram(bin_width, tau_max, counts, int(counts.sum()))


def cross_correlate_chunked(a, b, bin_width=DEFAULT_BIN_WIDTH, tau_max=DEFAULT_TAU_MAX,
                            n_chunks=4, threads=1):
    """Same result as :func:`cross_correlate`, accumulated over time chunks.

    Stream ``a`` is cut into ``n_chunks`` disjoint time ranges; each chunk is
    correlated against the part of ``b`` within ``tau_max`` of its range and
    the integer histograms are summed.
    """
    bin_width, tau_max = int(bin_width), int(tau_max)
    ta, tb = _as_times(a), _as_times(b)
    _check_sorted(ta, "a")
    _check_sorted(tb, "b")
    if ta.size == 0:
        return cross_correlate(ta, tb, bin_width, tau_max)
    bounds = np.linspace(ta[0], ta[-1] + 1, n_chunks + 1).astype(np.int64)
    cut = np.searchsorted(ta, bounds, side="left")
    cut[-1] = ta.size

    def work(k):
        ca = ta[cut[k]:cut[k + 1]]
        if ca.size == 0:
            return np.zeros(2 * tau_max // bin_width, np.int64)
        j0 = np.searchsorted(tb, ca[0] - tau_max, side="right")
        j1 = np.searchsorted(tb, ca[-1] + tau_max, side="left")
        return _correlate_block(ca, tb[j0:j1], bin_width, tau_max)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(n_chunks)))
    else:
        parts = [work(k) for k in range(n_chunks)]
    counts = np.sum(parts, axis=0)
    if a is b:
        counts[tau_max // bin_width] -= ta.size
    return Histogram(bin_width, tau_max, counts, int(counts.sum()))


def brute_force_correlate(a, b, bin_width, tau_max, exclude_self=False):
    """O(n*m) reference histogram; only for small inputs and tests."""
    ta, tb = _as_times(a), _as_times(b)
    d = (tb[None, :] - ta[:, None])
    if exclude_self:
        d = d[~np.eye(ta.size, dtype=bool)]
    d = d.ravel()
    d = d[np.abs(d) < tau_max]
    n_bins = 2 * tau_max // bin_width
    return np.bincount((d + tau_max) // bin_width, minlength=n_bins)


def count_rate(s: TagStream):
    """Mean detected rate in counts per second."""
    if s.duration <= 0:
        raise ValueError("stream duration must be positive")
    return len(s) / s.duration_s


def normalize_g2(h: Histogram, rate_a, rate_b, duration):
    """Attach the uncorrelated-light normalization ``rate_a*rate_b*bin*T``.

    Rates in counts per second, ``duration`` in seconds.
    """
    if not (rate_a > 0 and rate_b > 0 and duration > 0):
        raise ValueError("rates and duration must be positive")
    norm = rate_a * rate_b * (h.bin_width / PS_PER_S) * duration
    return replace(h, norm=norm)


def correlate_streams(a: TagStream, b: TagStream, bin_width=DEFAULT_BIN_WIDTH,
                      tau_max=DEFAULT_TAU_MAX):
    """Correlate and normalize using the streams' own rates and duration."""
    h = cross_correlate(a, b, bin_width, tau_max)
    return normalize_g2(h, count_rate(a), count_rate(b), a.duration_s)


def pulsed_g2_zero(h: Histogram, rep_period, window=None, n_side_peaks=3):
    """Zero-delay peak area over the mean side-peak area.

    ``rep_period`` and ``window`` are in ns; ``window`` defaults to half the
    period. A bin belongs to a peak window when its centre lies within
    ``window/2`` of the peak position. Returns ``(g2_zero, sigma)`` with
    Poisson errors on each area.
    """
    if window is None:
        window = 0.5 * rep_period
    if not 0 < window < rep_period:
        raise ValueError("window must lie in (0, rep_period)")
    reach = n_side_peaks * rep_period + 0.5 * window
    if reach * PS_PER_NS > h.tau_max:
        raise ValueError("histogram does not span the requested side peaks")
    c = h.centers_ns
    counts = h.counts.astype(float)

    def area(k):
        return counts[np.abs(c - k * rep_period) < 0.5 * window].sum()

    central = area(0)
    side = np.array([area(k) for k in range(-n_side_peaks, n_side_peaks + 1) if k])
    if np.any(side == 0):
        raise ValueError("a side-peak window holds no counts")
    mean_side = side.mean()
    g2 = central / mean_side
    sigma_mean = math.sqrt(side.sum()) / side.size
    sigma = math.sqrt(central / mean_side**2 + (central * sigma_mean / mean_side**2) ** 2)
    return g2, sigma
