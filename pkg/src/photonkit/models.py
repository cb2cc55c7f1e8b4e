"""Closed-form emitter models.

Units follow one convention throughout the package: delays in the g2 model
are in ns when paired with decay rates in 1/ns, powers in uW, count rates in
counts per second, wavelengths in nm.

Every model has a matching ``*_jacobian`` returning the derivative with
respect to the parameter vector, shape ``(n_points, n_params)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class G2TwoLevelParams:
    g2_zero: float
    gamma1: float

    def __post_init__(self):
        if not 0.0 <= self.g2_zero <= 1.0:
            raise ValueError(f"g2_zero must lie in [0, 1], got {self.g2_zero}")
        if not self.gamma1 > 0:
            raise ValueError(f"gamma1 must be positive, got {self.gamma1}")


@dataclass(frozen=True)
class SaturationParams:
    i0: float
    i_sat: float
    p_sat: float

    def __post_init__(self):
        if self.i0 < 0:
            raise ValueError("i0 must be non-negative")
        if not (self.i_sat > 0 and self.p_sat > 0):
            raise ValueError("i_sat and p_sat must be positive")


@dataclass(frozen=True)
class PowerDecayParams:
    tau_rad: float
    alpha: float = 0.0

    def __post_init__(self):
        if not self.tau_rad > 0:
            raise ValueError("tau_rad must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


@dataclass(frozen=True)
class LorentzianParams:
    center: float
    fwhm: float
    amplitude: float
    offset: float = 0.0

    def __post_init__(self):
        if not (self.fwhm > 0 and self.amplitude > 0):
            raise ValueError("fwhm and amplitude must be positive")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")


# -- two-level antibunching -------------------------------------------------

def g2_two_level(tau, g2_zero, gamma1):
    """1 - (1 - g2_zero) * exp(-gamma1 * |tau|), vectorised over ``tau``."""
    tau = np.asarray(tau, dtype=float)
    return 1.0 - (1.0 - g2_zero) * np.exp(-gamma1 * np.abs(tau))


def g2_two_level_jacobian(tau, g2_zero, gamma1):
    a = np.abs(np.asarray(tau, dtype=float))
    e = np.exp(-gamma1 * a)
    return np.column_stack([e, (1.0 - g2_zero) * a * e])


def eval_g2_two_level(tau, p: G2TwoLevelParams):
    """Evaluate the two-level emitter autocorrelation at delay ``tau``.

    ``tau`` must be in the reciprocal unit of ``p.gamma1`` (ns for 1/ns).
    """
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau must be finite")
    out = g2_two_level(tau, p.g2_zero, p.gamma1)
    return float(out) if np.ndim(out) == 0 else out


# -- power-dependent decay rate ---------------------------------------------

def eval_gamma1(power, p: PowerDecayParams):
    """Antibunching decay rate (1 + alpha*P) / tau_rad in 1/ns."""
    power = np.asarray(power, dtype=float)
    if np.any(power < 0):
        raise ValueError("power must be non-negative")
    out = (1.0 + p.alpha * power) / p.tau_rad
    return float(out) if out.ndim == 0 else out


# -- saturation -------------------------------------------------------------

def saturation(power, i0, i_sat, p_sat):
    power = np.asarray(power, dtype=float)
    return i0 - i_sat * np.expm1(-power / p_sat)


def saturation_jacobian(power, i0, i_sat, p_sat):
    power = np.asarray(power, dtype=float)
    e = np.exp(-power / p_sat)
    return np.column_stack([
        np.ones_like(power),
        -np.expm1(-power / p_sat),
        -i_sat * e * power / p_sat**2,
    ])


def eval_saturation(power, p: SaturationParams):
    """Saturating count rate I0 + Isat * (1 - exp(-P/Psat))."""
    if np.any(np.asarray(power) < 0):
        raise ValueError("power must be non-negative")
    out = saturation(power, p.i0, p.i_sat, p.p_sat)
    return float(out) if np.ndim(out) == 0 else out


def corrected_rate(i_raw, g2_zero):
    """Share of a detected rate attributed to the single emitter.

    Scales by sqrt(1 - g2(0)); a fully Poissonian signal (g2(0) = 1) maps to 0.
    """
    g2_zero = np.asarray(g2_zero, dtype=float)
    if np.any(g2_zero < 0) or np.any(g2_zero > 1):
        raise ValueError("g2_zero must lie in [0, 1]")
    out = np.asarray(i_raw, dtype=float) * np.sqrt(1.0 - g2_zero)
    return float(out) if out.ndim == 0 else out


# -- Lorentzian line --------------------------------------------------------

def lorentzian(wavelength, center, fwhm, amplitude, offset):
    wavelength = np.asarray(wavelength, dtype=float)
    hw2 = (0.5 * fwhm) ** 2
    return offset + amplitude * hw2 / ((wavelength - center) ** 2 + hw2)


def lorentzian_jacobian(wavelength, center, fwhm, amplitude, offset):
    d = np.asarray(wavelength, dtype=float) - center
    hw2 = (0.5 * fwhm) ** 2
    den = d * d + hw2
    shape = hw2 / den
    return np.column_stack([
        amplitude * 2.0 * d * hw2 / den**2,
        amplitude * 0.5 * fwhm * d * d / den**2,
        shape,
        np.ones_like(d),
    ])


def eval_lorentzian(wavelength, p: LorentzianParams):
    if not np.all(np.isfinite(wavelength)):
        raise ValueError("wavelength must be finite")
    out = lorentzian(wavelength, p.center, p.fwhm, p.amplitude, p.offset)
    return float(out) if np.ndim(out) == 0 else out
