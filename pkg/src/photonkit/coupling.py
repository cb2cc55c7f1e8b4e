"""Fiber coupling and photon budget arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import Gaussian2DRegressor


@dataclass(frozen=True, eq=False)
class FieldMap:
    """Scalar field samples on a regular grid centred on the origin.

    ``amplitude`` has shape ``(ny, nx)``; row-major order runs x fastest.
    Pitches ``dx`` and ``dy`` are in um.
    """

    dx: float
    dy: float
    amplitude: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.ndim != 2 or min(amp.shape) < 2:
            raise ValueError("amplitude must be a 2-D grid with at least 2 samples per axis")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid pitch must be positive")
        if not np.any(amp != 0):
            raise ValueError("field is identically zero")
        object.__setattr__(self, "amplitude", amp)

    @property
    def nx(self):
        return self.amplitude.shape[1]

    @property
    def ny(self):
        return self.amplitude.shape[0]

    @property
    def x(self):
        return (np.arange(self.nx) - 0.5 * (self.nx - 1)) * self.dx

    @property
    def y(self):
        return (np.arange(self.ny) - 0.5 * (self.ny - 1)) * self.dy

    def coordinates(self):
        """``(n, 2)`` array of sample coordinates in row-major order."""
        xx, yy = np.meshgrid(self.x, self.y)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def same_grid(self, other):
        return (self.amplitude.shape == other.amplitude.shape
                and math.isclose(self.dx, other.dx) and math.isclose(self.dy, other.dy))

    def __eq__(self, other):
        if not isinstance(other, FieldMap):
            return NotImplemented
        return (self.dx == other.dx and self.dy == other.dy
                and np.array_equal(self.amplitude, other.amplitude))


def gaussian_field(nx, ny, dx, dy, waist, waist_y=None, center=(0.0, 0.0), amplitude=1.0):
    """Sampled ``A exp(-((x-x0)^2/wx^2 + (y-y0)^2/wy^2))``; waists are 1/e field radii in um.

    Use this for the lensed-fiber mode; converting a numerical aperture to a
    waist is left to the caller.
    """
    wy = waist if waist_y is None else waist_y
    grid = FieldMap(dx, dy, np.ones((ny, nx)))
    xx, yy = np.meshgrid(grid.x - center[0], grid.y - center[1])
    return FieldMap(dx, dy, amplitude * np.exp(-(xx**2 / waist**2 + yy**2 / wy**2)))


def overlap_efficiency(e1: FieldMap, e2: FieldMap):
    """Normalized mode overlap |<e1, e2>|^2 / (<e1, e1><e2, e2>) by midpoint sums."""
    if not e1.same_grid(e2):
        raise ValueError("fields must be sampled on identical grids")
    dA = e1.dx * e1.dy
    a, b = e1.amplitude, e2.amplitude
    inner = np.vdot(b, a) * dA
    n1 = np.vdot(a, a).real * dA
    n2 = np.vdot(b, b).real * dA
    return float(min(abs(inner) ** 2 / (n1 * n2), 1.0))


def gaussian_overlap_closed_form(w1, w2):
    """Overlap of two centred circular Gaussians with 1/e field radii ``w1``, ``w2``."""
    return (2.0 * w1 * w2 / (w1 * w1 + w2 * w2)) ** 2


def aligned_real_part(field: FieldMap):
    """Real part of the field after removing one global phase.

    The phase is chosen so the rotated field is as real as possible, and the
    sign so that its sum is non-negative.
    """
    a = field.amplitude
    phase = 0.5 * np.angle(np.sum(a * a))
    r = (a * np.exp(-1j * phase)).real
    return -r if r.sum() < 0 else r


def fit_gaussian_2d(field: FieldMap, init=None, magnitude=True):
    """Least-squares Gaussian approximation of ``|field|``.

    Returns ``(params, result)`` where ``params`` maps amplitude, center_x,
    center_y, waist_x and waist_y to fitted values.

    Taking the magnitude folds noise in the dim tails to positive values and
    biases the fit upward there. For fields with a uniform phase, pass
    ``magnitude=False`` to fit :func:`aligned_real_part` instead, which keeps
    zero-mean noise zero-mean.
    """
    z = np.abs(field.amplitude) if magnitude else aligned_real_part(field)
    est = Gaussian2DRegressor(init=init).fit(field.coordinates(), z.ravel())
    return est.result_.as_dict(), est.result_


@dataclass(frozen=True)
class ReflectanceMeasurement:
    p_in: float  # mW
    p_out: float  # mW
    t_bs: float

    def __post_init__(self):
        if not (self.p_in > 0 and self.t_bs > 0) or self.p_out < 0:
            raise ValueError("powers and splitter transmission must be positive")
        if self.p_out > self.t_bs * self.p_in * (1 + 1e-12):
            raise ValueError("reflected power exceeds t_bs * p_in; coupling would exceed unity")


def reflectance_coupling(m: ReflectanceMeasurement):
    """Single-pass coupling from a back-reflection measurement.

    Assumes coupling in and out of the device are equal, so the round trip
    is the square of the one-way efficiency.
    """
    return min(math.sqrt(m.p_out / (m.t_bs * m.p_in)), 1.0)


DEFAULT_STAGE_NAMES = ("fiber", "spectral_filter", "beam_splitter", "fiber_cable", "detector")
FIBER_STAGE = "fiber"
FILTER_STAGE = "spectral_filter"


@dataclass(frozen=True)
class EfficiencyChain:
    """Named transmissions from the source to the detector, in order."""

    stages: tuple

    def __post_init__(self):
        stages = tuple((str(n), float(t)) for n, t in self.stages)
        for name, t in stages:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"stage {name!r} transmission {t} outside (0, 1]")
        if len({n for n, _ in stages}) != len(stages):
            raise ValueError("stage names must be unique")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def from_values(cls, values, names=DEFAULT_STAGE_NAMES):
        values = list(values)
        if len(values) > len(names):
            raise ValueError(f"{len(values)} stages but only {len(names)} names")
        return cls(tuple(zip(names, values)))

    def __getitem__(self, name):
        for n, t in self.stages:
            if n == name:
                return t
        raise KeyError(name)

    @property
    def total(self):
        return math.prod(t for _, t in self.stages)


def efficiency_chain(i_sat, rep_rate, chain: EfficiencyChain):
    """Photon budget from the saturated detected rate under pulsed driving.

    ``i_sat`` in counts per second, ``rep_rate`` in Hz. Returns fractions
    (not percent): ``end_to_end`` detected photons per pulse, ``b_fib`` the
    probability per pulse of a photon in the lensed fiber, and ``b_source``
    the probability per pulse of a photon leaving the source.
    """
    if not rep_rate > 0:
        raise ValueError("rep_rate must be positive")
    names = {n for n, _ in chain.stages}
    missing = {FIBER_STAGE, FILTER_STAGE} - names
    if missing:
        raise KeyError(f"efficiency chain lacks stages {sorted(missing)}")
    end_to_end = i_sat / rep_rate
    return {
        "end_to_end": end_to_end,
        "b_fib": end_to_end / (chain[FIBER_STAGE] * chain[FILTER_STAGE]),
        "b_source": end_to_end / chain.total,
    }
