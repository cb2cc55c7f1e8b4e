"""Weighted Levenberg-Marquardt least squares with box bounds.

Minimizes ``sum(w * (y - f(p, x))**2)``. Bounds are enforced by projecting
each trial point onto the box. Uncertainties are asymptotic: the inverse of
the weighted normal matrix scaled by the reduced chi-square.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

MAX_ITER = 200
FTOL = 1e-10
GTOL = 1e-8
XTOL = 1e-14
LAMBDA_START = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e16
_EPS = np.finfo(float).eps


class FitError(RuntimeError):
    """A fit could not be carried out."""


class SingularMatrixError(FitError):
    """The weighted normal matrix cannot be inverted for the covariance."""


@dataclass
class ModelSpec:
    """A model ``func(params, x) -> y`` with names, bounds and optional Jacobian.

    ``jac(params, x)`` returns ``d f / d params`` with shape ``(n, k)``.
    ``guess(x, y)`` supplies a starting point when none is given.
    """

    func: Callable
    names: Sequence[str]
    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None
    jac: Optional[Callable] = None
    guess: Optional[Callable] = None

    def __post_init__(self):
        k = len(self.names)
        self.lower = np.full(k, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.full(k, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (k,) or self.upper.shape != (k,):
            raise ValueError("bounds must have one entry per parameter")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bounds must not exceed upper bounds")


@dataclass
class FitResult:
    names: tuple
    params: np.ndarray
    sigma: np.ndarray
    covariance: np.ndarray
    chi2_reduced: float
    iterations: int
    converged: bool
    chi2: float = float("nan")
    n_points: int = 0
    history: list = field(default_factory=list, repr=False)
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return float(self.params[self.names.index(name)])

    def error(self, name):
        return float(self.sigma[self.names.index(name)])

    def as_dict(self):
        return dict(zip(self.names, (float(v) for v in self.params)))


def finite_difference_jacobian(func, p, x, step=None):
    """Central-difference ``d func / d p``.

    ``step`` may be a scalar or per-parameter array of absolute steps; the
    default is ``eps**(1/3) * max(|p|, 1)``.
    """
    p = np.asarray(p, dtype=float)
    if step is None:
        h = np.cbrt(_EPS) * np.maximum(np.abs(p), 1.0)
    else:
        h = np.broadcast_to(np.asarray(step, dtype=float), p.shape)
    cols = []
    for j in range(p.size):
        dp = np.zeros_like(p)
        dp[j] = h[j]
        cols.append((np.asarray(func(p + dp, x)) - np.asarray(func(p - dp, x))) / (2 * h[j]))
    return np.column_stack(cols)


def _scaled_gradient(J, r, free):
    """Largest cosine between the residual and a free Jacobian column."""
    rn = np.linalg.norm(r)
    if rn == 0:
        return 0.0
    cn = np.linalg.norm(J, axis=0)
    g = np.abs(J.T @ r)
    ok = free & (cn > 0)
    if not np.any(ok):
        return 0.0
    return float(np.max(g[ok] / (cn[ok] * rn)))


def _covariance(J, chi2_red, names):
    """(J^T J)^-1 * chi2_red; parameters with an all-zero column get inf sigma."""
    k = J.shape[1]
    cov = np.full((k, k), np.nan)
    live = np.linalg.norm(J, axis=0) > 0
    JtJ = J[:, live].T @ J[:, live]
    if JtJ.size:
        if np.linalg.cond(JtJ) > 1.0 / _EPS:
            raise SingularMatrixError(
                "singular normal matrix; parameters "
                f"{[n for n, l in zip(names, live) if l]} are not jointly identifiable")
        sub = np.linalg.inv(JtJ) * chi2_red
        sub = 0.5 * (sub + sub.T)
        cov[np.ix_(live, live)] = sub
    cov[~live, :] = 0.0
    cov[:, ~live] = 0.0
    sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    sigma[~live] = np.inf
    return cov, sigma


def fit_nlls(model: ModelSpec, xs, ys, weights=None, init=None, fixed=None,
             max_iter=MAX_ITER, fd_step=None):
    """Levenberg-Marquardt fit of ``model`` to ``(xs, ys)``.

    ``fixed`` maps parameter names to values held constant; they keep zero
    uncertainty. A fit that hits ``max_iter`` returns its best point with
    ``converged=False``. Raises :class:`SingularMatrixError` when the
    covariance cannot be formed.
    """
    ys = np.asarray(ys, dtype=float).ravel()
    n = ys.size
    names = tuple(model.names)
    k = len(names)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape != (n,):
        raise ValueError("weights must match ys")
    if np.any(~(w > 0)):
        raise ValueError("weights must be positive")
    if not np.all(np.isfinite(ys)):
        raise ValueError("ys must be finite")
    sw = np.sqrt(w)

    if init is None:
        if model.guess is None:
            raise ValueError("no initial guess and model has no guess policy")
        init = model.guess(xs, ys)
    p = np.clip(np.asarray(init, dtype=float).copy(), model.lower, model.upper)
    if p.shape != (k,):
        raise ValueError(f"expected {k} initial values")
    free = np.ones(k, bool)
    for name, value in (fixed or {}).items():
        j = names.index(name)
        p[j] = value
        free[j] = False
    n_free = int(free.sum())
    if n < n_free:
        raise ValueError("need at least as many data points as free parameters")

    def residual(q):
        return sw * (ys - np.asarray(model.func(q, xs), dtype=float))

    def jacobian(q):
        if model.jac is not None:
            Jf = np.asarray(model.jac(q, xs), dtype=float)
        else:
            Jf = finite_difference_jacobian(model.func, q, xs, fd_step)
        J = -sw[:, None] * Jf
        J[:, ~free] = 0.0
        return J

    r = residual(p)
    S = float(r @ r)
    J = jacobian(p)
    lam = LAMBDA_START
    history = [S]
    converged = False
    it = 0
    while it < max_iter:
        if S == 0.0 or _scaled_gradient(J, r, free) <= GTOL:
            converged = True
            break
        it += 1
        Jf = J[:, free]
        A = Jf.T @ Jf
        g = Jf.T @ r
        d = np.diag(A).copy()
        d[d <= 0] = 1.0
        accepted = False
        while lam <= LAMBDA_MAX:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= LAMBDA_UP
                continue
            trial = p.copy()
            trial[free] += step
            trial = np.clip(trial, model.lower, model.upper)
            moved = np.linalg.norm(trial - p)
            if moved <= XTOL * (np.linalg.norm(p) + XTOL):
                break
            r_new = residual(trial)
            S_new = float(r_new @ r_new)
            if np.isfinite(S_new) and S_new < S:
                accepted = True
                break
            lam *= LAMBDA_UP
        if not accepted:
            # no descent direction left at working precision
            converged = True
            break
        decrease = S - S_new
        p, r, S = trial, r_new, S_new
        history.append(S)
        J = jacobian(p)
        lam = max(lam / LAMBDA_DOWN, 1e-12)
        if decrease <= FTOL * history[-2]:
            converged = True
            break

    # with no spare degrees of freedom the residual is treated as one dof
    chi2_red = S / max(n - n_free, 1)
    cov, sigma = _covariance(J, chi2_red, names)
    sigma[~free] = 0.0
    return FitResult(names, p, sigma, cov, chi2_red, it, converged, S, n, history)


# -- key/value text serialization -----------------------------------------

def format_fit_result(result: FitResult, model_name=""):
    lines = ["# photonkit fit result"]
    if model_name:
        lines.append(f"model = {model_name}")
    lines.append("params = " + ",".join(result.names))
    for name, v, s in zip(result.names, result.params, result.sigma):
        lines.append(f"{name} = {float(v)!r}")
        lines.append(f"{name}_sigma = {float(s)!r}")
    lines.append(f"chi2_reduced = {float(result.chi2_reduced)!r}")
    lines.append(f"chi2 = {float(result.chi2)!r}")
    lines.append(f"n_points = {result.n_points}")
    lines.append(f"iterations = {result.iterations}")
    lines.append(f"converged = {'true' if result.converged else 'false'}")
    rows = ["; ".join(repr(float(c)) for c in row) for row in result.covariance]
    lines.append("covariance = " + " | ".join(rows))
    for key, value in result.extras.items():
        lines.append(f"extra.{key} = {float(value)!r}")
    return "\n".join(lines) + "\n"


def parse_fit_result(text):
    """Inverse of :func:`format_fit_result`; returns ``(FitResult, model_name)``."""
    kv = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if " = " not in line:
            raise ValueError(f"malformed fit result line: {raw!r}")
        key, value = line.split(" = ", 1)
        kv[key.strip()] = value.strip()
    try:
        names = tuple(kv["params"].split(",")) if kv["params"] else ()
        params = np.array([float(kv[nm]) for nm in names])
        sigma = np.array([float(kv[f"{nm}_sigma"]) for nm in names])
        cov = np.array([[float(c) for c in row.split(";")]
                        for row in kv["covariance"].split("|")]) if names else np.empty((0, 0))
        extras = {k[6:]: float(v) for k, v in kv.items() if k.startswith("extra.")}
        result = FitResult(names, params, sigma, cov, float(kv["chi2_reduced"]),
                           int(kv["iterations"]), kv["converged"] == "true",
                           float(kv["chi2"]), int(kv["n_points"]), [], extras)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed fit result: {exc}") from exc
    return result, kv.get("model", "")
