"""Control fields, the quantized field grid, and the lookups the schemes need.

A :class:`ControlField` is an evaluable ``eps(t)`` on ``[0, T]`` whose values
are promised to stay within declared bounds ``[eps_min, eps_max]``; the promise
is checked by dense sampling when the field is constructed.
"""

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, FieldBoundsError, HorizonError, ParseError

BOUNDS_SAMPLES = 4096
BOUNDS_SLACK = 1e-12


def _slack(lo, hi):
    return BOUNDS_SLACK * max(1.0, abs(lo), abs(hi))


class ControlField:
    """Base class; subclasses implement :meth:`_evaluate` on arrays of times."""

    bounds: tuple
    horizon: float

    def _setup(self, bounds, horizon):
        lo, hi = (float(b) for b in bounds)
        if not hi >= lo:
            raise FieldBoundsError(f"inverted field bounds [{lo}, {hi}]")
        if not horizon > 0:
            raise HorizonError(f"horizon must be positive, got T={horizon}")
        object.__setattr__(self, "bounds", (lo, hi))
        object.__setattr__(self, "horizon", float(horizon))
        t = np.linspace(0.0, self.horizon, BOUNDS_SAMPLES)
        v = self._evaluate(t)
        slack = _slack(lo, hi)
        if np.any(v < lo - slack) or np.any(v > hi + slack) or not np.all(np.isfinite(v)):
            raise FieldBoundsError(
                f"field leaves its bounds [{lo}, {hi}] on [0, {self.horizon}]: "
                f"sampled range [{v.min():.6g}, {v.max():.6g}]"
            )

    @property
    def eps_min(self):
        return self.bounds[0]

    @property
    def eps_max(self):
        return self.bounds[1]

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        tol = 1e-12 * self.horizon
        if np.any(t_arr < -tol) or np.any(t_arr > self.horizon + tol):
            raise HorizonError(f"time outside the control horizon [0, {self.horizon}]")
        out = self._evaluate(np.clip(t_arr, 0.0, self.horizon))
        return float(out) if np.ndim(out) == 0 else out

    def _evaluate(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class Sinusoid(ControlField):
    """``eps(t) = amplitude * sin(omega t)``; default bounds ``[-|amplitude|, |amplitude|]``."""

    amplitude: float
    omega: float
    T: float
    declared_bounds: tuple = None

    def __post_init__(self):
        a = abs(self.amplitude)
        self._setup(self.declared_bounds or (-a, a), self.T)

    def _evaluate(self, t):
        return self.amplitude * np.sin(self.omega * t)

    def derivative(self, t, order=1):
        a, w = self.amplitude, self.omega
        return [a * np.sin(w * t), a * w * np.cos(w * t), -a * w * w * np.sin(w * t),
                -a * w ** 3 * np.cos(w * t)][order]


@dataclass(frozen=True)
class PiecewiseConstant(ControlField):
    """Plateau ``values[k]`` on ``[starts[k], starts[k+1])``; the last plateau runs to ``T``."""

    starts: np.ndarray
    values: np.ndarray
    T: float
    declared_bounds: tuple = None

    def __post_init__(self):
        starts = np.asarray(self.starts, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if starts.shape != values.shape or starts.size == 0:
            raise ValueError("piecewise field needs matching, non-empty starts and values")
        if starts[0] != 0.0 or np.any(np.diff(starts) <= 0):
            raise ValueError("plateau start times must begin at 0 and increase strictly")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "values", values)
        self._setup(self.declared_bounds or (values.min(), values.max()), self.T)

    def _evaluate(self, t):
        k = np.searchsorted(self.starts, t, side="right") - 1
        return self.values[np.clip(k, 0, len(self.values) - 1)]


@dataclass(frozen=True)
class Tabulated(ControlField):
    """Samples ``(times, values)`` interpolated linearly or by nearest sample."""

    times: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"
    declared_bounds: tuple = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.size < 2:
            raise ValueError("tabulated field needs at least two (t, eps) samples")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("sample times must begin at 0 and increase strictly")
        if self.interpolation not in ("linear", "nearest"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        self._setup(self.declared_bounds or (values.min(), values.max()), times[-1])

    def _evaluate(self, t):
        if self.interpolation == "linear":
            return np.interp(t, self.times, self.values)
        # nearest sample, ties to the earlier one
        k = np.searchsorted(self.times, t, side="left")
        k = np.clip(k, 1, len(self.times) - 1)
        left_closer = (t - self.times[k - 1]) <= (self.times[k] - t)
        return self.values[np.where(left_closer, k - 1, k)]


@dataclass(frozen=True)
class CallableField(ControlField):
    """Wraps an arbitrary vectorized callable; handy for tests and studies."""

    func: Callable = dc_field(repr=False)
    T: float = 1.0
    declared_bounds: tuple = None

    def __post_init__(self):
        if self.declared_bounds is None:
            v = np.asarray(self.func(np.linspace(0.0, self.T, BOUNDS_SAMPLES)), dtype=float)
            bounds = (float(v.min()), float(v.max()))
        else:
            bounds = self.declared_bounds
        self._setup(bounds, self.T)

    def _evaluate(self, t):
        return np.asarray(self.func(t), dtype=float)


def _read_t_eps_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "t" not in rows[0] or "eps" not in rows[0]:
        raise ParseError(f"{path}: expected a CSV with columns t,eps")
    try:
        t = np.array([float(r["t"]) for r in rows])
        eps = np.array([float(r["eps"]) for r in rows])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return t, eps


def field_from_config(spec, T=None, base_dir="."):
    """Build a field from the ``field`` section of an experiment config."""
    spec = dict(spec)
    kind = spec.get("kind", "sinusoid")
    bounds = tuple(spec["bounds"]) if "bounds" in spec else None
    try:
        if kind == "sinusoid":
            omega = float(spec["omega"])
            horizon = T if T is not None else math.pi / omega
            return Sinusoid(float(spec["eps_max"]), omega, horizon, bounds)
        if kind == "tabulated":
            t, eps = _read_t_eps_csv(Path(base_dir) / spec["path"])
            return Tabulated(t, eps, spec.get("interpolation", "linear"), bounds)
        if kind == "piecewise":
            t, eps = _read_t_eps_csv(Path(base_dir) / spec["path"])
            if T is None:
                raise ConfigError("a piecewise field needs the horizon T in the config")
            return PiecewiseConstant(t, eps, T, bounds)
    except KeyError as exc:
        raise ConfigError(f"field section of kind {kind!r} is missing key {exc}") from None
    raise ConfigError(f"unknown field kind {kind!r}; expected sinusoid, tabulated or piecewise")


# -- quantization grids ------------------------------------------------------


@dataclass(frozen=True)
class ConvexWeights:
    """``alpha * values[ell] + beta * values[ell + 1]`` reproduces a field value."""

    ell: int
    alpha: float
    beta: float


@dataclass(frozen=True)
class FieldGrid:
    """Uniform grid ``values[l] = eps_min + l * delta``, ``l = 0..m``."""

    eps_min: float
    eps_max: float
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"grid needs m >= 1 intervals, got m={self.m}")
        if not self.eps_max > self.eps_min:
            raise ValueError(f"grid needs eps_max > eps_min, got [{self.eps_min}, {self.eps_max}]")
        object.__setattr__(self, "m", int(self.m))

    @property
    def delta(self):
        return (self.eps_max - self.eps_min) / self.m

    @property
    def values(self):
        v = self.eps_min + np.arange(self.m + 1) * self.delta
        v[-1] = self.eps_max
        return v

    @property
    def size(self):
        return self.m + 1

    def nearest_indices(self, v):
        v = np.asarray(v, dtype=float)
        half = 0.5 * self.delta
        slack = _slack(self.eps_min, self.eps_max)
        if np.any(v < self.eps_min - half - slack) or np.any(v > self.eps_max + half + slack):
            raise FieldBoundsError(
                f"field value outside [{self.eps_min}, {self.eps_max}] by more than half a grid step"
            )
        pos = (v - self.eps_min) / self.delta
        return np.clip(np.ceil(pos - 0.5), 0, self.m).astype(int)

    def brackets(self, v):
        """Vectorized bracketing: returns ``(ell, alpha, beta)`` arrays."""
        v = np.asarray(v, dtype=float)
        slack = _slack(self.eps_min, self.eps_max)
        if np.any(v < self.eps_min - slack) or np.any(v > self.eps_max + slack):
            raise FieldBoundsError(f"field value outside [{self.eps_min}, {self.eps_max}]")
        ell = np.clip(np.floor((v - self.eps_min) / self.delta), 0, self.m - 1).astype(int)
        vals = self.values
        beta = np.clip((v - vals[ell]) / (vals[ell + 1] - vals[ell]), 0.0, 1.0)
        return ell, 1.0 - beta, beta


@dataclass(frozen=True)
class ValueGrid:
    """Arbitrary sorted set of field values.

    Used for the exact-value toolkit: building it from the very midpoint values
    a run will request makes every lookup exact (zero quantization error).
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.unique(np.asarray(self.values, dtype=float))
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("value grid needs at least one finite value")
        object.__setattr__(self, "values", v)

    @property
    def eps_min(self):
        return float(self.values[0])

    @property
    def eps_max(self):
        return float(self.values[-1])

    @property
    def size(self):
        return self.values.size

    @property
    def m(self):
        return self.values.size - 1

    @property
    def delta(self):
        return float(np.max(np.diff(self.values))) if self.values.size > 1 else 0.0

    def nearest_indices(self, v):
        v = np.asarray(v, dtype=float)
        vals = self.values
        slack = _slack(vals[0], vals[-1]) + 0.5 * self.delta
        if np.any(v < vals[0] - slack) or np.any(v > vals[-1] + slack):
            raise FieldBoundsError("field value outside the value grid")
        k = np.clip(np.searchsorted(vals, v), 1, max(1, vals.size - 1))
        if vals.size == 1:
            return np.zeros(np.shape(v), dtype=int)
        upper_closer = (vals[k] - v) < (v - vals[k - 1])
        return np.where(upper_closer, k, k - 1)

    def brackets(self, v):
        v = np.asarray(v, dtype=float)
        vals = self.values
        if vals.size < 2:
            raise ValueError("bracketing needs at least two grid values")
        slack = _slack(vals[0], vals[-1])
        if np.any(v < vals[0] - slack) or np.any(v > vals[-1] + slack):
            raise FieldBoundsError("field value outside the value grid")
        ell = np.clip(np.searchsorted(vals, v, side="right") - 1, 0, vals.size - 2)
        beta = np.clip((v - vals[ell]) / (vals[ell + 1] - vals[ell]), 0.0, 1.0)
        return ell, 1.0 - beta, beta


def make_grid(eps_min, eps_max, m):
    if m < 1:
        raise ValueError(f"grid needs m >= 1 intervals, got m={m}")
    if not eps_max > eps_min:
        raise ValueError(f"grid needs eps_max > eps_min, got [{eps_min}, {eps_max}]")
    return FieldGrid(float(eps_min), float(eps_max), int(m))


def nearest_index(grid, v):
    """Index of the grid value closest to ``v``; ties go to the lower index."""
    return int(grid.nearest_indices(float(v)))


def bracket_weights(grid, v):
    """Bracket ``v`` between two consecutive grid values and return the convex weights."""
    ell, alpha, beta = grid.brackets(float(v))
    return ConvexWeights(int(ell), float(alpha), float(beta))


# -- time stencils -------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeStencil:
    alpha: float
    beta: float


BETA_DIVISORS = ("half_step", "full_step")


def _check_steps(field, j_last, dt):
    if (j_last + 1) * dt > field.horizon * (1 + 1e-12):
        raise HorizonError(f"step {j_last} with dt={dt} runs past the horizon T={field.horizon}")


def _stencil_at(field, j, dt, beta_divisor):
    if beta_divisor not in BETA_DIVISORS:
        raise ValueError(f"beta_divisor must be one of {BETA_DIVISORS}, got {beta_divisor!r}")
    e0 = field(j * dt)
    eh = field((j + 0.5) * dt)
    e1 = field((j + 1) * dt)
    h = 0.5 * dt if beta_divisor == "half_step" else dt
    return (e1 - e0) / dt, (e1 - 2 * eh + e0) / (h * h)


def derivative_stencils(field, n_steps, dt, beta_divisor="half_step"):
    """First- and second-derivative estimates at every step midpoint.

    ``alpha_j = (eps(t_{j+1}) - eps(t_j)) / dt`` and
    ``beta_j = (eps(t_{j+1}) - 2 eps(t_{j+1/2}) + eps(t_j)) / h**2`` with
    ``h = dt/2`` (``half_step``, a consistent estimate of the second derivative)
    or ``h = dt`` (``full_step``, four times smaller).
    """
    _check_steps(field, n_steps - 1, dt)
    return _stencil_at(field, np.arange(n_steps), dt, beta_divisor)


def derivative_stencil(field, j, dt, beta_divisor="half_step"):
    if j < 0:
        raise HorizonError(f"negative step index {j}")
    _check_steps(field, j, dt)
    alpha, beta = _stencil_at(field, j, dt, beta_divisor)
    return DerivativeStencil(float(alpha), float(beta))


def midpoint_values(field, n_steps, dt):
    _check_steps(field, n_steps - 1, dt)
    return np.atleast_1d(field((np.arange(n_steps) + 0.5) * dt))


def midpoint_value(field, j, dt):
    if j < 0 or (j + 0.5) * dt > field.horizon * (1 + 1e-12):
        raise HorizonError(f"midpoint of step {j} lies outside [0, {field.horizon}]")
    return float(field((j + 0.5) * dt))
