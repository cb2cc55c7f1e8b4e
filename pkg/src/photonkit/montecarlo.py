"""Monte Carlo photon streams from a two-level emitter.

All randomness comes from Philox generators keyed by ``(seed, stage, index)``
so every stage is reproducible on its own and chunked generation gives the
same stream whether chunks are produced serially or by a thread pool.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .hom import HOMParams
from .tags import PS_PER_NS, PS_PER_S, TagStream

# RNG stage identifiers; changing these changes every seeded stream.
_STAGE_EMISSION = 1
_STAGE_PULSES = 2
_STAGE_BACKGROUND = 3
_STAGE_ROUTE = 4
_STAGE_PATH = 5
_STAGE_SPLITTER2 = 6
_STAGE_DETECTOR = 7

CHUNK = 1 << 18
PAIR_WINDOW_COHERENCE_TIMES = 5.0


def stage_rng(seed, stage, index=0):
    """Counter-based generator for one stochastic stage."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stage), int(index)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class CW:
    pass


@dataclass(frozen=True)
class Pulsed:
    rep_rate: float = 40.0  # MHz
    pulse_width: float = 300.0  # ps
    excitation_prob: float = 1.0

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise ValueError("rep_rate must be positive")
        if self.pulse_width < 0:
            raise ValueError("pulse_width must be non-negative")
        if not 0.0 <= self.excitation_prob <= 1.0:
            raise ValueError("excitation_prob must lie in [0, 1]")

    @property
    def period_ns(self):
        return 1e3 / self.rep_rate


@dataclass(frozen=True)
class EmitterConfig:
    """Emitter and excitation settings.

    ``pump_rate`` is in excitations per ns and only matters for CW driving;
    ``background_rate`` is uncorrelated light in counts per second.
    """

    tau_rad: float = 1.87
    pump_rate: float = 0.2
    background_rate: float = 0.0
    excitation: Union[CW, Pulsed] = field(default_factory=CW)
    duration: float = 1e-3  # s

    def __post_init__(self):
        if not self.tau_rad > 0:
            raise ValueError("tau_rad must be positive")
        if self.pump_rate < 0 or self.background_rate < 0:
            raise ValueError("rates must be non-negative")

    @property
    def gamma1(self):
        """Antibunching decay rate of the CW renewal cycle, 1/ns."""
        return self.pump_rate + 1.0 / self.tau_rad

    @property
    def emission_rate(self):
        """Mean emitted single-photon rate in counts per second."""
        if isinstance(self.excitation, Pulsed):
            return self.excitation.rep_rate * 1e6 * self.excitation.excitation_prob
        if self.pump_rate == 0:
            return 0.0
        return 1e9 / (1.0 / self.pump_rate + self.tau_rad)


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float = 1.0
    jitter_sigma: float = 0.0  # ps
    dead_time: float = 0.0  # ns
    dark_rate: float = 0.0  # counts/s

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        if min(self.jitter_sigma, self.dead_time, self.dark_rate) < 0:
            raise ValueError("jitter, dead time and dark rate must be non-negative")


IDEAL_DETECTOR = DetectorConfig()


# -- emission ---------------------------------------------------------------

def _map_chunks(fn, indices, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, indices))
    return [fn(k) for k in indices]


def _cw_cycle_lengths(seed, k, cfg):
    rng = stage_rng(seed, _STAGE_EMISSION, k)
    wait = rng.exponential(1.0 / cfg.pump_rate, CHUNK)
    wait += rng.exponential(cfg.tau_rad, CHUNK)
    return wait


def _simulate_cw(cfg, seed, duration_ns, threads):
    if cfg.pump_rate == 0:
        return np.empty(0)
    parts = []
    offset = 0.0
    k = 0
    batch = max(1, threads or 1)
    while offset < duration_ns:
        waits = _map_chunks(lambda i: _cw_cycle_lengths(seed, i, cfg), range(k, k + batch), threads)
        k += batch
        for w in waits:
            t = offset + np.cumsum(w)
            offset = t[-1]
            if offset >= duration_ns:
                parts.append(t[t < duration_ns])
                break
            parts.append(t)
    return np.concatenate(parts)


def _pulse_chunk(seed, k, n_pulses, exc):
    start = k * CHUNK
    n = min(CHUNK, n_pulses - start)
    rng = stage_rng(seed, _STAGE_PULSES, k)
    excited = rng.random(n) < exc.excitation_prob
    onset = rng.random(n) * (exc.pulse_width / PS_PER_NS)
    delay = rng.exponential(1.0, n)
    idx = np.arange(start, start + n)
    return idx, excited, onset, delay


def _simulate_pulsed(cfg, seed, duration_ns, threads):
    exc = cfg.excitation
    n_pulses = int(math.ceil(duration_ns / exc.period_ns))
    n_chunks = -(-n_pulses // CHUNK)
    parts = []
    for idx, excited, onset, delay in _map_chunks(
            lambda k: _pulse_chunk(seed, k, n_pulses, exc), range(n_chunks), threads):
        t = idx * exc.period_ns + onset + delay * cfg.tau_rad
        parts.append(t[excited])
    t = np.concatenate(parts) if parts else np.empty(0)
    return np.sort(t[t < duration_ns], kind="stable")


def _background(cfg, seed, duration_ps):
    if cfg.background_rate == 0:
        return np.empty(0, np.int64)
    rng = stage_rng(seed, _STAGE_BACKGROUND)
    n = rng.poisson(cfg.background_rate * duration_ps / PS_PER_S)
    return np.sort(rng.integers(0, duration_ps, n))


def simulate_emission(cfg: EmitterConfig, seed: int, threads: int = 1) -> TagStream:
    """Generate the photon stream leaving the emitter, background included.

    CW driving alternates an exponential excitation wait (rate ``pump_rate``)
    with an exponential emission wait (mean ``tau_rad``), one photon per
    cycle. Pulsed driving excites each pulse with ``excitation_prob`` at a
    uniform onset within the pulse width, at most one photon per pulse.
    """
    if not cfg.duration > 0:
        raise ValueError("duration must be positive")
    duration_ps = int(round(cfg.duration * PS_PER_S))
    duration_ns = duration_ps / PS_PER_NS
    if isinstance(cfg.excitation, Pulsed):
        t_ns = _simulate_pulsed(cfg, seed, duration_ns, threads)
    else:
        t_ns = _simulate_cw(cfg, seed, duration_ns, threads)
    signal = np.rint(t_ns * PS_PER_NS).astype(np.int64)
    times = np.concatenate([signal, _background(cfg, seed, duration_ps)])
    return TagStream(np.sort(times, kind="stable"), np.zeros(times.size, np.uint16), duration_ps)


# -- detectors --------------------------------------------------------------

def apply_dead_time(times, dead_time_ps):
    """Drop tags closer than ``dead_time_ps`` to the previous accepted tag."""
    times = np.asarray(times, dtype=np.int64)
    if times.size < 2 or dead_time_ps <= 0:
        return times
    if not math.isfinite(dead_time_ps):
        return times[:1]
    dead = int(math.ceil(dead_time_ps))
    gaps = np.diff(times)
    if not np.any(gaps < dead):
        return times
    # a tag following a gap >= dead is always accepted, so clusters are independent
    starts = np.flatnonzero(np.r_[True, gaps >= dead])
    ends = np.r_[starts[1:], times.size]
    keep = np.ones(times.size, bool)
    for s, e in zip(starts[ends - starts > 1], ends[ends - starts > 1]):
        seg = times[s:e]
        keep[s:e] = False
        i = 0
        while i < seg.size:
            keep[s + i] = True
            i = int(np.searchsorted(seg, seg[i] + dead, side="left"))
    return times[keep]


def detect(times, det: DetectorConfig, duration_ps, rng):
    """Efficiency thinning, Gaussian jitter, dark counts, then dead time."""
    times = np.asarray(times, dtype=np.int64)
    t = times[rng.random(times.size) < det.efficiency]
    if det.jitter_sigma > 0:
        t = t + np.rint(rng.normal(0.0, det.jitter_sigma, t.size)).astype(np.int64)
    if det.dark_rate > 0:
        n_dark = rng.poisson(det.dark_rate * duration_ps / PS_PER_S)
        t = np.concatenate([t, rng.integers(0, duration_ps, n_dark)])
    t = np.sort(t, kind="stable")
    return apply_dead_time(t, det.dead_time * PS_PER_NS)


def _detector_pair(to_a, times, detA, detB, duration, seed):
    a = detect(times[to_a], detA, duration, stage_rng(seed, _STAGE_DETECTOR, 0))
    b = detect(times[~to_a], detB, duration, stage_rng(seed, _STAGE_DETECTOR, 1))
    return (TagStream(a, np.zeros(a.size, np.uint16), duration),
            TagStream(b, np.ones(b.size, np.uint16), duration))


def route_hbt(stream: TagStream, split=(0.5, 0.5), detA=IDEAL_DETECTOR,
              detB=IDEAL_DETECTOR, seed=0):
    """Hanbury Brown-Twiss arm: split ``(r, t)``, ``t`` goes to detector A (channel 0)."""
    r, t = split
    if abs(r + t - 1.0) > 1e-9:
        raise ValueError("split must satisfy r + t = 1")
    to_a = stage_rng(seed, _STAGE_ROUTE).random(len(stream)) < t
    return _detector_pair(to_a, stream.times, detA, detB, stream.duration, seed)


# -- HOM interferometer -----------------------------------------------------

def pair_outcome_probabilities(x, r2, t2):
    """Joint output probabilities for a short-arm / long-arm photon pair.

    Returns ``(short->A & long->B, short->B & long->A, both A, both B)`` for
    interference strength ``x`` in [0, 1]. With ``x = 0`` this is the product
    of single-photon probabilities (short arm transmits to A, long arm
    reflects to A); interference removes coincidences in proportion to ``x``
    and shares them equally between the two bunched outcomes.
    """
    x = np.asarray(x, dtype=float)
    sa_lb = t2 * t2 * (1.0 - x)
    sb_la = r2 * r2 * (1.0 - x)
    bunched = r2 * t2 + 0.5 * (t2 * t2 + r2 * r2) * x
    return sa_lb, sb_la, bunched, bunched


def greedy_pairs(gap, candidate):
    """Disjoint consecutive pairs, chosen greedily by smallest gap first.

    ``candidate[i]`` says whether items ``i`` and ``i+1`` may pair and
    ``gap[i]`` is their separation. Returns a boolean mask of chosen edges.
    Equivalent to repeatedly taking the globally smallest remaining gap: an
    edge smaller than its live neighbours is always taken, so each round
    takes all such local minima at once.
    """
    candidate = np.asarray(candidate, dtype=bool)
    chosen = np.zeros(candidate.size, bool)
    if candidate.size == 0:
        return chosen
    rank = np.empty(candidate.size)
    rank[np.argsort(gap, kind="stable")] = np.arange(candidate.size)
    alive = candidate.copy()
    while alive.any():
        r = np.where(alive, rank, np.inf)
        pick = alive & (r < np.r_[np.inf, r[:-1]]) & (r < np.r_[r[1:], np.inf])
        chosen |= pick
        alive &= ~(pick | np.r_[False, pick[:-1]] | np.r_[pick[1:], False])
    return chosen


def route_hom(stream: TagStream, p: HOMParams, detA=IDEAL_DETECTOR,
              detB=IDEAL_DETECTOR, seed=0):
    """Send a stream through the unbalanced Mach-Zehnder interferometer.

    Photons pick the long arm with probability ``r1``. At the second splitter
    consecutive photons from opposite arms arriving within five coherence
    times are routed jointly with interference ``V exp(-2|delta|/tau_c)``;
    each photon interferes at most once, closest pairs first. Valid for low flux, where the mean
    photon spacing is well above the coherence time.
    """
    s = p.splitters
    n = len(stream)
    long_arm = stage_rng(seed, _STAGE_PATH).random(n) < s.r1
    arrival = stream.times + long_arm * int(round(p.dtau2 * PS_PER_NS))
    order = np.argsort(arrival, kind="stable")
    arrival = arrival[order]
    long_arm = long_arm[order]

    u = stage_rng(seed, _STAGE_SPLITTER2).random(n)
    to_a = u < np.where(long_arm, s.r2, s.t2)

    if n > 1:
        delta = np.diff(arrival)
        window = PAIR_WINDOW_COHERENCE_TIMES * p.tau_c
        edges = greedy_pairs(delta, (delta < window) & (long_arm[1:] != long_arm[:-1]))
        i = np.flatnonzero(edges)
        if i.size:
            x = p.visibility * np.exp(-2.0 * delta[i] / p.tau_c)
            sa_lb, sb_la, both_a, _ = pair_outcome_probabilities(x, s.r2, s.t2)
            ui = u[i]
            c1 = sa_lb
            c2 = c1 + sb_la
            c3 = c2 + both_a
            short_to_a = np.where(ui < c1, True, np.where(ui < c2, False, ui < c3))
            long_to_a = np.where(ui < c1, False, np.where(ui < c2, True, ui < c3))
            first_long = long_arm[i]
            to_a[i] = np.where(first_long, long_to_a, short_to_a)
            to_a[i + 1] = np.where(first_long, short_to_a, long_to_a)

    return _detector_pair(to_a, arrival, detA, detB, stream.duration, seed)


# -- helpers for choosing simulation settings --------------------------------

def pulsed_peak_capture(window_ns, tau_rad, pulse_width_ps, n_grid=4001):
    """Fraction of a pulsed coincidence peak inside a centred window.

    The delay between photons from two pulses is the difference of two
    exponential emission delays (Laplace, scale ``tau_rad``) plus the
    difference of two uniform onsets (triangular, half-width pulse width).
    """
    h = 0.5 * window_ns
    w = pulse_width_ps / PS_PER_NS

    def laplace_cdf(z):
        tail = 0.5 * np.exp(-np.abs(z) / tau_rad)
        return np.where(z < 0, tail, 1.0 - tail)

    if w == 0:
        return float(laplace_cdf(h) - laplace_cdf(-h))
    s = np.linspace(-w, w, n_grid)
    tri = (w - np.abs(s)) / (w * w)
    inside = laplace_cdf(h - s) - laplace_cdf(-h - s)
    return float(np.trapezoid(tri * inside, s))


def pulsed_background_rate(target_g2, signal_rate, rep_rate_mhz, window_ns, capture=1.0):
    """Background rate (cps) giving pulsed peak-area ratio ``target_g2``.

    Emitter photons never pair within one pulse, so the centre window holds
    only background-background and background-signal coincidences, while
    side windows add the captured signal-signal peak.
    """
    if not 0 <= target_g2 < 1:
        raise ValueError("target_g2 must lie in [0, 1)")
    period_s = 1e-6 / rep_rate_mhz
    w = window_ns * 1e-9
    q = target_g2 * capture * signal_rate**2 * period_s / (w * (1.0 - target_g2))
    return -signal_rate + math.sqrt(signal_rate**2 + q)
