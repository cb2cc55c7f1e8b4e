"""Scikit-learn style regressors for every fit in the characterization chain.

Each regressor wraps one closed-form model and the Levenberg-Marquardt
engine. After ``fit`` the parameters are available as ``<name>_``
attributes, their 1-sigma errors in ``sigma_`` and the full engine output in
``result_``.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import hom, models
from .fitter import FitError, ModelSpec, fit_nlls

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _bin_average(f, x, width):
    """Mean of ``f`` over ``[x - width/2, x + width/2]`` by 8-point Gauss-Legendre."""
    if not width:
        return f(x)
    out = 0.0
    for node, wt in zip(_GL_NODES, _GL_WEIGHTS):
        out = out + 0.5 * wt * f(x + 0.5 * width * node)
    return out


def _as_1d(X):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("expected a single feature column")
        X = X[:, 0]
    return X


class _CurveRegressor(RegressorMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses provide ``_spec``."""

    param_names: tuple = ()
    _n_features = 1

    def _validate(self, X, y=None):
        if self._n_features == 1:
            X = _as_1d(X)
            if y is None:
                return X
            y = check_array(y, ensure_2d=False, dtype=float)
            if X.shape[0] != y.shape[0]:
                raise ValueError("X and y have inconsistent lengths")
            return X, y
        if y is None:
            return check_array(X, dtype=float)
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X.shape[1] != self._n_features:
            raise ValueError(f"expected {self._n_features} feature columns")
        return X, y

    def _init_vector(self, X, y, spec):
        if self.init is None:
            return spec.guess(X, y)
        if isinstance(self.init, dict):
            guess = np.asarray(spec.guess(X, y), dtype=float)
            for name, v in self.init.items():
                guess[self.param_names.index(name)] = v
            return guess
        return np.asarray(self.init, dtype=float)

    def fit(self, X, y, sample_weight=None):
        X, y = self._validate(X, y)
        spec = self._spec()
        if sample_weight is not None:
            sample_weight = check_array(sample_weight, ensure_2d=False, dtype=float)
        result = fit_nlls(spec, X, y, sample_weight, self._init_vector(X, y, spec),
                          fixed=self.fixed, max_iter=self.max_iter)
        self.result_ = result
        self.sigma_ = dict(zip(result.names, result.sigma.tolist()))
        for name, value in zip(result.names, result.params):
            setattr(self, name + "_", float(value))
        self.params_ = result.params.copy()
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = self._validate(X)
        return self._spec().func(self.params_, X)


class TwoLevelG2Regressor(_CurveRegressor):
    """Fit ``g2(tau) = 1 - (1 - g2_zero) exp(-gamma1 |tau|)``.

    ``X`` holds delays in ns. With ``bin_width`` (ns) the model is averaged
    over each bin, which is what a coincidence histogram measures.
    """

    param_names = ("g2_zero", "gamma1")

    def __init__(self, bin_width=None, init=None, fixed=None, max_iter=200):
        self.bin_width = bin_width
        self.init = init
        self.fixed = fixed
        self.max_iter = max_iter

    def _spec(self):
        w = self.bin_width

        def func(p, x):
            return _bin_average(lambda t: models.g2_two_level(t, p[0], p[1]), x, w)

        def jac(p, x):
            return _bin_average(lambda t: models.g2_two_level_jacobian(t, p[0], p[1]), x, w)

        return ModelSpec(func, self.param_names, lower=[0.0, 1e-9], upper=[1.0 - 1e-9, np.inf],
                         jac=jac, guess=guess_g2_two_level)


def guess_g2_two_level(tau, g2):
    """g2_zero from the lowest point, gamma1 from the 1/e recovery delay."""
    tau = np.asarray(tau, float)
    g2 = np.asarray(g2, float)
    g0 = float(np.clip(np.min(g2), 0.0, 0.95))
    level = 1.0 - (1.0 - g0) / math.e
    a = np.abs(tau)
    order = np.argsort(a)
    above = order[g2[order] >= level]
    t_e = a[above[0]] if above.size and a[above[0]] > 0 else np.median(a[a > 0])
    return [g0, 1.0 / t_e]


class SaturationRegressor(_CurveRegressor):
    """Fit ``I(P) = i0 + i_sat (1 - exp(-P / p_sat))``; ``X`` is power in uW."""

    param_names = ("i0", "i_sat", "p_sat")

    def __init__(self, init=None, fixed=None, max_iter=200):
        self.init = init
        self.fixed = fixed
        self.max_iter = max_iter

    def _spec(self):
        return ModelSpec(lambda p, x: models.saturation(x, *p), self.param_names,
                         lower=[0.0, 1e-12, 1e-12], upper=[np.inf] * 3,
                         jac=lambda p, x: models.saturation_jacobian(x, *p),
                         guess=guess_saturation)


def guess_saturation(power, rate):
    """i_sat from the largest rate, p_sat from the power reaching half of it."""
    power = np.asarray(power, float)
    rate = np.asarray(rate, float)
    order = np.argsort(power)
    power, rate = power[order], rate[order]
    i_sat = float(rate.max())
    half = np.flatnonzero(rate >= 0.5 * i_sat)
    p_half = power[half[0]] if half.size and power[half[0]] > 0 else float(np.median(power))
    return [0.0, i_sat, max(p_half / math.log(2.0), 1e-9)]


class LorentzianRegressor(_CurveRegressor):
    """Fit a Lorentzian line; ``X`` is wavelength in nm."""

    param_names = ("center", "fwhm", "amplitude", "offset")

    def __init__(self, init=None, fixed=None, max_iter=200):
        self.init = init
        self.fixed = fixed
        self.max_iter = max_iter

    def _spec(self):
        return ModelSpec(lambda p, x: models.lorentzian(x, *p), self.param_names,
                         lower=[-np.inf, 1e-12, 1e-12, 0.0], upper=[np.inf] * 4,
                         jac=lambda p, x: models.lorentzian_jacobian(x, *p),
                         guess=guess_lorentzian)


def guess_lorentzian(wl, counts):
    wl = np.asarray(wl, float)
    counts = np.asarray(counts, float)
    order = np.argsort(wl)
    wl, counts = wl[order], counts[order]
    i = int(np.argmax(counts))
    offset = max(float(counts.min()), 0.0)
    amp = max(float(counts[i]) - offset, 1e-12)
    above = wl[counts >= offset + 0.5 * amp]
    fwhm = float(above.max() - above.min()) if above.size > 1 else float(np.ptp(wl)) / 10
    if fwhm <= 0:
        fwhm = float(np.min(np.diff(wl)))
    return [float(wl[i]), fwhm, amp, offset]


class DecayRateRegressor(_CurveRegressor):
    """Straight-line fit of gamma1 against pump power.

    ``gamma1 = (1 + alpha P) / tau_rad``; the line is fitted as
    ``intercept + slope P`` and converted with first-order error propagation
    to ``tau_rad_`` (ns) and ``alpha_`` (1/uW).
    """

    param_names = ("intercept", "slope")

    def __init__(self, init=None, fixed=None, max_iter=200):
        self.init = init
        self.fixed = fixed
        self.max_iter = max_iter

    def _spec(self):
        def guess(x, y):
            slope, intercept = np.polyfit(x, y, 1) if np.unique(x).size > 1 else (0.0, np.mean(y))
            return [intercept, slope]

        return ModelSpec(lambda p, x: p[0] + p[1] * np.asarray(x), self.param_names,
                         jac=lambda p, x: np.column_stack([np.ones_like(x), x]),
                         guess=guess)

    def fit(self, X, y, sample_weight=None):
        X, y = self._validate(X, y)
        if np.unique(X).size < 2:
            raise ValueError("need at least two distinct powers")
        super().fit(X, y, sample_weight)
        b, m = self.intercept_, self.slope_
        if not b > 0:
            raise FitError(f"non-positive intercept {b:g}: no physical lifetime")
        cov = self.result_.covariance
        self.tau_rad_ = 1.0 / b
        self.alpha_ = m / b
        # gradients of (1/b) and (m/b) w.r.t. (b, m)
        g_tau = np.array([-1.0 / b**2, 0.0])
        g_alpha = np.array([-m / b**2, 1.0 / b])
        self.sigma_["tau_rad"] = float(math.sqrt(max(g_tau @ cov @ g_tau, 0.0)))
        self.sigma_["alpha"] = float(math.sqrt(max(g_alpha @ cov @ g_alpha, 0.0)))
        return self


class HOMRegressor(_CurveRegressor):
    """Joint fit of co- and cross-polarized HOM correlations.

    ``X`` has two columns: delay in ns and a 0/1 flag that is 1 for
    co-polarized rows. Splitter probabilities and the interferometer delay
    are held fixed; the fit returns base ``g2_zero``, ``gamma1``,
    ``visibility`` and ``tau_c`` (ps).
    """

    param_names = ("g2_zero", "gamma1", "visibility", "tau_c")
    _n_features = 2

    def __init__(self, splitters=None, dtau2=4.36, bin_width=None, init=None,
                 fixed=None, max_iter=200):
        self.splitters = splitters
        self.dtau2 = dtau2
        self.bin_width = bin_width
        self.init = init
        self.fixed = fixed
        self.max_iter = max_iter

    def _spec(self):
        s = self.splitters if self.splitters is not None else hom.SplitterPair.balanced()
        d, w = self.dtau2, self.bin_width

        def func(p, X):
            tau, co = X[:, 0], X[:, 1] > 0.5
            out = np.empty(tau.size)
            out[~co] = _bin_average(lambda t: hom.g2_cross(t, p[0], p[1], s, d), tau[~co], w)
            out[co] = _bin_average(lambda t: hom.g2_co(t, *p, s, d), tau[co], w)
            return out

        def jac(p, X):
            tau, co = X[:, 0], X[:, 1] > 0.5
            J = np.zeros((tau.size, 4))
            J[~co, :2] = _bin_average(lambda t: hom.g2_cross_jacobian(t, p[0], p[1], s, d),
                                      tau[~co], w)
            J[co] = _bin_average(lambda t: hom.g2_co_jacobian(t, *p, s, d), tau[co], w)
            return J

        return ModelSpec(func, self.param_names, lower=[0.0, 1e-9, 0.0, 1.0],
                         upper=[1.0 - 1e-9, np.inf, 1.0, np.inf], jac=jac, guess=guess_hom)

    def zero_delay(self):
        """Fitted model values ``(g_co(0), g_cross(0))`` at exactly zero delay."""
        check_is_fitted(self, "params_")
        s = self.splitters if self.splitters is not None else hom.SplitterPair.balanced()
        g0, g1, v, tc = self.params_
        return (float(hom.g2_co(0.0, g0, g1, v, tc, s, self.dtau2)),
                float(hom.g2_cross(0.0, g0, g1, s, self.dtau2)))


def guess_hom(X, y):
    """Base g2 from the cross rows, visibility and tau_c from the co/cross ratio."""
    tau, co = X[:, 0], X[:, 1] > 0.5
    g0, g1 = guess_g2_two_level(tau[~co], y[~co]) if np.any(~co) else (0.0, 1.0)
    if not np.any(co) or not np.any(~co):
        return [g0, g1, 0.5, 500.0]
    t_co, y_co = tau[co], y[co]
    cross_at = np.interp(t_co, *_sorted(tau[~co], y[~co]))
    # contrast of the co-polarized dip relative to the cross-polarized curve
    contrast = np.where(cross_at > 0, 1.0 - y_co / np.where(cross_at > 0, cross_at, 1), 0.0)
    a = np.abs(t_co)
    order = np.argsort(a)
    v0 = float(np.clip(np.mean(contrast[order[:4]]), 0.05, 1.0))
    below = order[contrast[order] < v0 / math.e]
    t_e = a[below[0]] if below.size and a[below[0]] > 0 else 0.25
    return [g0, g1, v0, float(np.clip(2e3 * t_e, 10.0, 1e4))]


def _sorted(x, y):
    o = np.argsort(x)
    return x[o], y[o]


class Gaussian2DRegressor(_CurveRegressor):
    """Fit ``A exp(-((x-x0)^2/wx^2 + (y-y0)^2/wy^2))`` to field magnitudes.

    ``X`` holds ``(x, y)`` coordinates in um; waists are 1/e field radii.
    """

    param_names = ("amplitude", "center_x", "center_y", "waist_x", "waist_y")
    _n_features = 2

    def __init__(self, init=None, fixed=None, max_iter=200):
        self.init = init
        self.fixed = fixed
        self.max_iter = max_iter

    def _spec(self):
        return ModelSpec(gaussian_2d, self.param_names,
                         lower=[0.0, -np.inf, -np.inf, 1e-12, 1e-12], upper=[np.inf] * 5,
                         jac=gaussian_2d_jacobian, guess=guess_gaussian_2d)


def gaussian_2d(p, X):
    a, x0, y0, wx, wy = p
    dx, dy = X[:, 0] - x0, X[:, 1] - y0
    return a * np.exp(-(dx * dx / wx**2 + dy * dy / wy**2))


def gaussian_2d_jacobian(p, X):
    a, x0, y0, wx, wy = p
    dx, dy = X[:, 0] - x0, X[:, 1] - y0
    e = np.exp(-(dx * dx / wx**2 + dy * dy / wy**2))
    f = a * e
    return np.column_stack([e, 2 * f * dx / wx**2, 2 * f * dy / wy**2,
                            2 * f * dx * dx / wx**3, 2 * f * dy * dy / wy**3])


def guess_gaussian_2d(X, z):
    """Moment estimates on the intensity ``z**2``; for a 1/e field radius w the
    intensity variance per axis is w**2 / 4."""
    z = np.abs(np.asarray(z, float))
    i = z * z
    tot = i.sum()
    x0 = float((i * X[:, 0]).sum() / tot)
    y0 = float((i * X[:, 1]).sum() / tot)
    vx = float((i * (X[:, 0] - x0) ** 2).sum() / tot)
    vy = float((i * (X[:, 1] - y0) ** 2).sum() / tot)
    return [float(z.max()), x0, y0, max(2 * math.sqrt(vx), 1e-9), max(2 * math.sqrt(vy), 1e-9)]
