"""The concrete fits of the characterization chain, on histograms and point lists."""
from __future__ import annotations

import numpy as np

from .correlator import Histogram
from .estimators import (DecayRateRegressor, HOMRegressor, LorentzianRegressor,
                         SaturationRegressor, TwoLevelG2Regressor)
from .fitter import FitError, FitResult, SingularMatrixError
from .hom import SplitterPair, visibility_corrected, visibility_raw
from .tags import PS_PER_NS


def poisson_weights(h: Histogram):
    """Inverse variance of ``h.normalized``; empty bins count as one event."""
    return h.norm**2 / np.maximum(h.counts, 1).astype(float)


def _histogram_xy(h: Histogram, tau_window=None):
    if h.norm is None:
        raise ValueError("histogram must be normalized before fitting")
    x = h.centers_ns
    y = h.normalized
    w = poisson_weights(h)
    if tau_window is not None:
        keep = np.abs(x) <= tau_window
        x, y, w = x[keep], y[keep], w[keep]
    return x, y, w


def fit_g2_cw(h: Histogram, tau_window=None, bin_average=True) -> FitResult:
    """Fit the two-level antibunching curve to a normalized CW histogram.

    ``tau_window`` (ns) restricts the fit to ``|tau| <= tau_window``.
    """
    x, y, w = _histogram_xy(h, tau_window)
    width = h.bin_width / PS_PER_NS if bin_average else None
    return TwoLevelG2Regressor(bin_width=width).fit(x, y, sample_weight=w).result_


def _points(points, n_min, what):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{what} must be a list of (x, y) pairs")
    if arr.shape[0] < n_min:
        raise ValueError(f"{what} needs at least {n_min} points")
    return arr[:, 0], arr[:, 1]


def fit_saturation(points, sigmas=None, fixed=None) -> FitResult:
    """Fit the saturation curve to ``(power_uW, rate_cps)`` points."""
    p, rate = _points(points, 2 if fixed else 4, "saturation data")
    w = None if sigmas is None else 1.0 / np.asarray(sigmas, float) ** 2
    return SaturationRegressor(fixed=fixed).fit(p, rate, sample_weight=w).result_


def fit_gamma1_linear(points, sigmas=None) -> FitResult:
    """Lifetime and pump slope from ``(power_uW, gamma1_per_ns)`` points.

    The straight-line parameters are converted to ``tau_rad`` and ``alpha``
    with their covariance propagated to first order.
    """
    p, g = _points(points, 2, "decay-rate data")
    w = None if sigmas is None else 1.0 / np.asarray(sigmas, float) ** 2
    est = DecayRateRegressor().fit(p, g, sample_weight=w)
    b, m = est.intercept_, est.slope_
    G = np.array([[-1.0 / b**2, 0.0], [-m / b**2, 1.0 / b]])
    cov = G @ est.result_.covariance @ G.T
    line = est.result_
    return FitResult(("tau_rad", "alpha"), np.array([est.tau_rad_, est.alpha_]),
                     np.sqrt(np.clip(np.diag(cov), 0, None)), cov, line.chi2_reduced,
                     line.iterations, line.converged, line.chi2, line.n_points, line.history,
                     {"intercept": b, "slope": m})


def fit_lorentzian(spectrum, sigmas=None) -> FitResult:
    """Fit a Lorentzian line to ``(wavelength_nm, counts)`` points."""
    wl, counts = _points(spectrum, 5, "spectrum")
    w = None if sigmas is None else 1.0 / np.asarray(sigmas, float) ** 2
    return LorentzianRegressor().fit(wl, counts, sample_weight=w).result_


def fit_hom_joint(h_co: Histogram, h_cross: Histogram, splitters=None, dtau2=4.36,
                  tau_window=None, g2_zero_correction=None, bin_average=True) -> FitResult:
    """Extract visibility and coherence time from co/cross HOM histograms.

    The cross-polarized histogram is fitted first for the base antibunching
    parameters; both are then fitted jointly. ``extras`` carries the raw and
    corrected HOM visibilities from the fitted zero-delay model values; the
    correction uses ``g2_zero_correction`` when given, else the fitted base
    ``g2_zero``. When the visibility fits to zero the coherence time is not
    identifiable; it is then held at its starting value with infinite sigma
    and ``extras["tau_c_identified"]`` is 0.
    """
    if (h_co.bin_width, h_co.tau_max) != (h_cross.bin_width, h_cross.tau_max):
        raise ValueError("co and cross histograms must share binning")
    splitters = splitters or SplitterPair.balanced()
    x_co, y_co, w_co = _histogram_xy(h_co, tau_window)
    x_cr, y_cr, w_cr = _histogram_xy(h_cross, tau_window)
    width = h_co.bin_width / PS_PER_NS if bin_average else None

    X_cr = np.column_stack([x_cr, np.zeros_like(x_cr)])
    cross = HOMRegressor(splitters, dtau2, width,
                         fixed={"visibility": 0.0, "tau_c": 1000.0}).fit(X_cr, y_cr, w_cr)
    if not cross.result_.converged:
        raise FitError("cross-polarized fit did not converge")

    X = np.vstack([X_cr, np.column_stack([x_co, np.ones_like(x_co)])])
    y = np.concatenate([y_cr, y_co])
    w = np.concatenate([w_cr, w_co])
    start = HOMRegressor(splitters, dtau2, width)._spec().guess(X, y)
    start[0], start[1] = cross.g2_zero_, cross.gamma1_
    try:
        joint = HOMRegressor(splitters, dtau2, width, init=start).fit(X, y, w)
        tau_c_free = True
    except SingularMatrixError:
        # no interference left to shape: tau_c drops out of the model
        joint = HOMRegressor(splitters, dtau2, width, init=start,
                             fixed={"tau_c": start[3]}).fit(X, y, w)
        joint.result_.sigma[3] = np.inf
        joint.sigma_["tau_c"] = np.inf
        tau_c_free = False

    g_co0, g_cr0 = joint.zero_delay()
    v_raw = visibility_raw(g_co0, g_cr0)
    g2c = joint.g2_zero_ if g2_zero_correction is None else g2_zero_correction
    result = joint.result_
    result.extras = {"g_co_zero": g_co0, "g_cross_zero": g_cr0,
                     "v_hom_raw": v_raw, "v_hom_corrected": visibility_corrected(v_raw, g2c),
                     "tau_c_identified": float(tau_c_free)}
    return result
