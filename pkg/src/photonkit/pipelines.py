"""End-to-end simulate -> correlate -> fit runs with documented default settings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlator import correlate_streams, pulsed_g2_zero
from .hom import HOMParams, SplitterPair
from .montecarlo import (CW, IDEAL_DETECTOR, EmitterConfig, Pulsed, pulsed_background_rate,
                         pulsed_peak_capture, route_hbt, route_hom, simulate_emission, stage_rng)
from .recipes import fit_g2_cw, fit_gamma1_linear, fit_hom_joint, fit_saturation


@dataclass
class PipelineRun:
    result: object
    n_tags: int
    config: object


def g2_pipeline(tau_rad=1.87, pump_rate=0.3, background_rate=2e6, duration=5e-3, seed=1,
                bin_width=100, tau_max=50_000, det=IDEAL_DETECTOR):
    """CW emitter through an HBT splitter, fitted with the two-level model."""
    cfg = EmitterConfig(tau_rad, pump_rate, background_rate, CW(), duration)
    stream = simulate_emission(cfg, seed)
    a, b = route_hbt(stream, (0.5, 0.5), det, det, seed=seed + 1)
    h = correlate_streams(a, b, bin_width, tau_max)
    return PipelineRun(fit_g2_cw(h), len(stream), cfg), h


def expected_g2_zero(cfg: EmitterConfig):
    """g2(0) of emitter light diluted by uncorrelated background."""
    s = cfg.emission_rate
    rho = s / (s + cfg.background_rate)
    return 1.0 - rho * rho


def lifetime_pipeline(tau_rad=1.87, alpha=0.3, powers=(0.35, 1.5, 3.0, 5.0), duration=4e-3,
                      seed=10):
    """Decay rate at several pump powers, then the straight-line lifetime fit.

    Pump rate per ns is ``alpha * P / tau_rad`` so that
    ``gamma1 = (1 + alpha P) / tau_rad``.
    """
    points, sigmas = [], []
    for i, power in enumerate(powers):
        run, _ = g2_pipeline(tau_rad, alpha * power / tau_rad, 0.0, duration, seed + 7 * i)
        points.append((power, run.result["gamma1"]))
        sigmas.append(run.result.error("gamma1"))
    return fit_gamma1_linear(points, sigmas), points, sigmas


def hom_pipeline(visibility=1.0, tau_c=450.0, tau_rad=1.87, pump_rate=0.1, duration=0.1,
                 dtau2=4.36, seed=3, bin_width=100, tau_max=10_000):
    """Co- and cross-polarized HOM runs on one emitter stream, jointly fitted.

    Both arms reuse the emitter stream; the interferometer and detector
    randomness differ between the two runs.
    """
    cfg = EmitterConfig(tau_rad, pump_rate, 0.0, CW(), duration)
    stream = simulate_emission(cfg, seed)
    s = SplitterPair.balanced()
    co = HOMParams(s, dtau2, visibility, tau_c)
    cross = HOMParams(s, dtau2, 0.0, tau_c)
    h_co = correlate_streams(*route_hom(stream, co, seed=seed + 1), bin_width, tau_max)
    h_cross = correlate_streams(*route_hom(stream, cross, seed=seed + 2), bin_width, tau_max)
    return PipelineRun(fit_hom_joint(h_co, h_cross, s, dtau2), len(stream), cfg), h_co, h_cross


def pulsed_purity_pipeline(target_g2=0.135, excitation_prob=0.5, rep_rate=40.0,
                           pulse_width=300.0, tau_rad=1.87, duration=0.05, seed=5,
                           n_side_peaks=3):
    """Pulsed emitter with background chosen to give ``target_g2``; peak-area g2(0)."""
    period = 1e3 / rep_rate
    window = 0.5 * period
    signal = rep_rate * 1e6 * excitation_prob
    capture = pulsed_peak_capture(window, tau_rad, pulse_width)
    bg = pulsed_background_rate(target_g2, signal, rep_rate, window, capture)
    cfg = EmitterConfig(tau_rad, 0.0, bg, Pulsed(rep_rate, pulse_width, excitation_prob),
                        duration)
    stream = simulate_emission(cfg, seed)
    tau_max = int(np.ceil((n_side_peaks + 1) * period)) * 1000
    h = correlate_streams(*route_hbt(stream, (0.5, 0.5), seed=seed + 1), 100, tau_max)
    return pulsed_g2_zero(h, period, window, n_side_peaks), cfg


def synthetic_saturation(i_sat, p_sat, i0=0.0, noise=0.01, powers=None, seed=0):
    """Saturation points with Gaussian relative noise, fitted with 1/sigma^2 weights."""
    powers = np.linspace(0.1, 6 * p_sat, 20) if powers is None else np.asarray(powers)
    clean = i0 + i_sat * (1 - np.exp(-powers / p_sat))
    sigma = noise * clean
    rates = clean + sigma * stage_rng(seed, 100).standard_normal(powers.size)
    return fit_saturation(np.column_stack([powers, rates]), sigmas=sigma)
