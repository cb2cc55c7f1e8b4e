"""Hong-Ou-Mandel correlations behind an unbalanced Mach-Zehnder interferometer.

The first splitter sends a photon down the short arm (probability ``t1``) or
the long arm (``r1``, extra delay ``dtau2``). Photons from different arms meet
at the second splitter; only those pairs can interfere, so the interference
factor ``1 - V exp(-2|tau|/tau_c)`` multiplies the cross-arm terms alone.

Delays are in ns and ``tau_c`` in ps, matching how the quantities are quoted
in the lab; conversions happen here and nowhere else.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import G2TwoLevelParams, g2_two_level, g2_two_level_jacobian

_PROB_TOL = 1e-9


@dataclass(frozen=True)
class SplitterPair:
    r1: float = 0.5
    t1: float = 0.5
    r2: float = 0.5
    t2: float = 0.5

    def __post_init__(self):
        for name in ("r1", "t1", "r2", "t2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.r1 + self.t1 - 1.0) > _PROB_TOL or abs(self.r2 + self.t2 - 1.0) > _PROB_TOL:
            raise ValueError("each splitter must satisfy r + t = 1")

    @classmethod
    def balanced(cls):
        return cls(0.5, 0.5, 0.5, 0.5)


@dataclass(frozen=True)
class HOMParams:
    splitters: SplitterPair = field(default_factory=SplitterPair.balanced)
    dtau2: float = 4.36
    visibility: float = 1.0
    tau_c: float = 450.0
    base: G2TwoLevelParams = field(default_factory=lambda: G2TwoLevelParams(0.0, 1.0))

    def __post_init__(self):
        if not self.dtau2 > 0:
            raise ValueError("dtau2 must be positive")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if not self.tau_c > 0:
            raise ValueError("tau_c must be positive")


def _coefficients(s: SplitterPair):
    same_arm = 4.0 * (s.t1**2 + s.r1**2) * s.r2 * s.t2
    cross_arm = 4.0 * s.r1 * s.t1
    return same_arm, cross_arm


def g2_cross(tau, g2_zero, gamma1, s: SplitterPair, dtau2):
    tau = np.asarray(tau, dtype=float)
    same, cross = _coefficients(s)
    return (same * g2_two_level(tau, g2_zero, gamma1)
            + cross * (s.t2**2 * g2_two_level(tau - dtau2, g2_zero, gamma1)
                       + s.r2**2 * g2_two_level(tau + dtau2, g2_zero, gamma1)))


def interference_factor(tau, visibility, tau_c_ps):
    tau = np.asarray(tau, dtype=float)
    return 1.0 - visibility * np.exp(-2.0 * np.abs(tau) * 1e3 / tau_c_ps)


def g2_co(tau, g2_zero, gamma1, visibility, tau_c_ps, s: SplitterPair, dtau2):
    tau = np.asarray(tau, dtype=float)
    same, cross = _coefficients(s)
    bracket = (s.t2**2 * g2_two_level(tau - dtau2, g2_zero, gamma1)
               + s.r2**2 * g2_two_level(tau + dtau2, g2_zero, gamma1))
    return (same * g2_two_level(tau, g2_zero, gamma1)
            + cross * bracket * interference_factor(tau, visibility, tau_c_ps))


def g2_cross_jacobian(tau, g2_zero, gamma1, s: SplitterPair, dtau2):
    """Derivative of the cross-polarized model w.r.t. (g2_zero, gamma1)."""
    tau = np.asarray(tau, dtype=float)
    same, cross = _coefficients(s)
    return (same * g2_two_level_jacobian(tau, g2_zero, gamma1)
            + cross * (s.t2**2 * g2_two_level_jacobian(tau - dtau2, g2_zero, gamma1)
                       + s.r2**2 * g2_two_level_jacobian(tau + dtau2, g2_zero, gamma1)))


def g2_co_jacobian(tau, g2_zero, gamma1, visibility, tau_c_ps, s: SplitterPair, dtau2):
    """Derivative w.r.t. (g2_zero, gamma1, visibility, tau_c_ps)."""
    tau = np.asarray(tau, dtype=float)
    same, cross = _coefficients(s)
    bracket = (s.t2**2 * g2_two_level(tau - dtau2, g2_zero, gamma1)
               + s.r2**2 * g2_two_level(tau + dtau2, g2_zero, gamma1))
    d_bracket = (s.t2**2 * g2_two_level_jacobian(tau - dtau2, g2_zero, gamma1)
                 + s.r2**2 * g2_two_level_jacobian(tau + dtau2, g2_zero, gamma1))
    a = 2.0 * np.abs(tau) * 1e3
    e = np.exp(-a / tau_c_ps)
    fac = 1.0 - visibility * e
    base = same * g2_two_level_jacobian(tau, g2_zero, gamma1) + cross * d_bracket * fac[:, None]
    d_vis = -cross * bracket * e
    d_tau_c = -cross * bracket * visibility * e * a / tau_c_ps**2
    return np.column_stack([base, d_vis, d_tau_c])


def eval_g2_cross(tau, p: HOMParams):
    """Cross-polarized (distinguishable) HOM correlation at delay ``tau`` in ns."""
    out = g2_cross(tau, p.base.g2_zero, p.base.gamma1, p.splitters, p.dtau2)
    return float(out) if out.ndim == 0 else out


def eval_g2_co(tau, p: HOMParams):
    """Co-polarized HOM correlation at delay ``tau`` in ns."""
    out = g2_co(tau, p.base.g2_zero, p.base.gamma1, p.visibility, p.tau_c,
                p.splitters, p.dtau2)
    return float(out) if out.ndim == 0 else out


def long_delay_limit(s: SplitterPair):
    """Value both correlations approach for |tau| far beyond every feature."""
    return 4.0 * s.r2 * s.t2 * (s.t1**2 + s.r1**2) + 4.0 * s.r1 * s.t1 * (s.t2**2 + s.r2**2)


def visibility_raw(g_co_zero, g_cross_zero):
    """Raw HOM visibility 1 - g_co(0) / g_cross(0).

    The co-polarized value sits in the numerator so a deeper co-polarized
    dip gives a larger visibility.
    """
    if g_cross_zero == 0:
        raise ZeroDivisionError("cross-polarized zero-delay value is zero")
    return 1.0 - g_co_zero / g_cross_zero


def visibility_corrected(v_hom, g2_zero):
    """Upper-bound visibility after removing the multi-photon contribution."""
    if g2_zero >= 1:
        raise ValueError("g2_zero must be below 1")
    return (v_hom + g2_zero) / (1.0 - g2_zero)


def lifetime_limit_factor(tau_rad_ns, tau_c_ps):
    """How far the coherence time is from the Fourier limit 2*tau_rad."""
    if tau_rad_ns <= 0 or tau_c_ps <= 0:
        raise ValueError("tau_rad and tau_c must be positive")
    return 2.0 * tau_rad_ns * 1e3 / tau_c_ps
