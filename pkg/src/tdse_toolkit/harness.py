"""Experiment driver: convergence sweeps, order fits and cost-to-tolerance tables.

An experiment is described by a JSON-compatible dictionary (see
:data:`DEFAULT_CONFIG` and ``docs/config.md``).  All sweep points are
independent; they run on a thread pool and are gathered in the order the
configuration declares them, so outputs do not depend on ``jobs``.
"""

import copy
import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, SweepError, ToolkitError
from .field import BETA_DIVISORS, ValueGrid, field_from_config, make_grid, midpoint_values
from .model import model_from_config
from .schemes import (
    IMPROVED_LOW_INITS,
    SchemeKind,
    propagate_improved_high,
    propagate_improved_low,
    propagate_quantified_high,
    propagate_reference,
    propagate_strang,
    propagate_toolkit,
)
from .toolkit import build_correctors, build_pair_toolkit, build_toolkit

JOBS_ENV = "TDSE_TOOLKIT_JOBS"

# Matrix products charged per time step in the cost table.  Strang counts two
# (the half-kinetic factors merge across steps), the improved schemes count
# one product per toolkit-sized factor.
NOMINAL_PRODUCTS_PER_STEP = {
    "strang": 2,
    "toolkit": 1,
    "improved_low": 2,
    "improved_high": 3,
    "quantified_high": 1,
}

ALL_SCHEMES = ["toolkit", "improved_low", "improved_high", "quantified_high", "strang"]

DEFAULT_CONFIG = {
    "model": {"kind": "rotor", "j_max": 20, "B": 1.0, "mu0": 1.0},
    "field": {"kind": "sinusoid", "eps_max": 7.5, "omega": 0.75},
    "T": None,
    "schemes": list(ALL_SCHEMES),
    "sweep": {"n_min": 32, "n_max": 4096},
    "eps_policy": {"kind": "exact"},
    "scheme_eps_policy": {
        "improved_high": {"kind": "coupled", "c": 60.0},
        "quantified_high": {"kind": "coupled", "c": 60.0},
    },
    "eps_sweep": {"schemes": ["toolkit"], "n_steps": 8192, "m_min": 8, "m_max": 4096},
    "reference": {"tol": 1e-11, "n_start": 4096, "max_n": 2 ** 22, "method": "taylor"},
    "improved_low": {"beta_divisor": "half_step", "init": "per_step", "corrector_sign": -1},
    "quantified": {"K": 100},
    "cost": {
        "tol": 5e-3,
        "n_min": 8,
        "n_max": 2 ** 15,
        "m_min": 2,
        "m_max": 2 ** 13,
        "products_per_step": dict(NOMINAL_PRODUCTS_PER_STEP),
    },
    "fit": {"drop_largest": 2, "floor_factor": 10.0, "eps_drop_largest": 0},
    "build": {"n_steps": 1024, "eps_policy": {"kind": "fixed", "m": 256}, "keep_factors": False},
    "propagate": {"scheme": "toolkit", "n_steps": 1024, "trajectory": False, "compare_reference": False},
    "out": "results",
    "seed": 0,
    "jobs": 1,
}


def resolve_jobs(requested=None):
    """Worker count: the environment variable wins over ``requested``, default 1."""
    env = os.environ.get(JOBS_ENV)
    value = env if env not in (None, "") else requested
    if value is None:
        return 1
    try:
        jobs = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"jobs must be an integer, got {value!r}") from None
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    return jobs


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _pow2_range(lo, hi, what):
    lo, hi = int(lo), int(hi)
    if lo < 1 or hi < lo:
        raise ConfigError(f"{what}: need 1 <= min <= max, got {lo}..{hi}")
    out = []
    n = lo
    while n <= hi:
        out.append(n)
        n *= 2
    return out


# -- field-grid policies -------------------------------------------------------


@dataclass(frozen=True)
class EpsPolicy:
    """How the field grid is chosen for a run with ``N`` steps of size ``dt``.

    ``exact``: one toolkit entry per step at the exact midpoint value (no
    quantization error).  ``fixed``: a uniform grid with ``m`` intervals.
    ``coupled``: a uniform grid with ``delta_eps ~ c * dt``.
    """

    kind: str = "exact"
    m: Optional[int] = None
    c: Optional[float] = None

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "exact")
        if kind == "exact":
            return cls("exact")
        if kind == "fixed":
            m = d.get("m")
            if m is None or int(m) < 1:
                raise ConfigError(f"fixed eps policy needs an integer m >= 1, got {m!r}")
            return cls("fixed", m=int(m))
        if kind == "coupled":
            c = d.get("c")
            if c is None or not float(c) > 0:
                raise ConfigError(f"coupled eps policy needs c > 0, got {c!r}")
            return cls("coupled", c=float(c))
        raise ConfigError(f"unknown eps policy {kind!r}; expected exact, fixed or coupled")

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    def grid(self, field, n_steps, dt):
        if self.kind == "exact":
            return ValueGrid(midpoint_values(field, n_steps, dt))
        span = field.eps_max - field.eps_min
        if self.kind == "fixed":
            m = self.m
        else:
            m = max(1, int(round(span / (self.c * dt))))
        return make_grid(field.eps_min, field.eps_max, m)


# -- configuration --------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Validated experiment description; build with :meth:`from_dict` or :meth:`from_file`."""

    raw: dict
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, d=None, base_dir="."):
        raw = _merge(DEFAULT_CONFIG, d or {})
        cfg = cls(raw, Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d, path.parent)

    def to_dict(self):
        return copy.deepcopy(self.raw)

    def validate(self):
        r = self.raw
        for s in r["schemes"]:
            self.scheme(s)
        if not r["schemes"]:
            raise ConfigError("scheme list is empty")
        self.model
        if not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        if self.T > self.field.horizon * (1 + 1e-12):
            raise ConfigError(f"T = {self.T} exceeds the field horizon {self.field.horizon}")
        if not self.sweep_steps:
            raise ConfigError("the time-step sweep is empty")
        self.eps_policy
        for s in r.get("scheme_eps_policy", {}):
            self.scheme(s)
            self.policy_for(s)
        il = r["improved_low"]
        if il["beta_divisor"] not in BETA_DIVISORS:
            raise ConfigError(f"improved_low.beta_divisor must be one of {BETA_DIVISORS}")
        if il["init"] not in IMPROVED_LOW_INITS:
            raise ConfigError(f"improved_low.init must be one of {IMPROVED_LOW_INITS}")
        if il["corrector_sign"] not in (-1, 1):
            raise ConfigError("improved_low.corrector_sign must be -1 or +1")
        if int(r["quantified"]["K"]) < 2:
            raise ConfigError("quantified.K must be >= 2")
        tol = r["cost"]["tol"]
        if not 0 < tol <= 2:
            raise ConfigError(f"cost.tol must lie in (0, 2], got {tol}")
        if int(r["jobs"]) < 1:
            raise ConfigError("jobs must be >= 1")

    @staticmethod
    def scheme(name):
        try:
            kind = SchemeKind.parse(name)
        except ValueError:
            raise ConfigError(f"unknown scheme {name!r}; expected one of {ALL_SCHEMES}") from None
        if kind is SchemeKind.REFERENCE:
            raise ConfigError("the reference solver is not a sweep scheme")
        return kind.value

    @cached_property
    def model(self):
        spec = dict(self.raw["model"])
        if spec.get("kind") == "random":
            spec.setdefault("seed", self.raw["seed"])
        try:
            return model_from_config(spec, self.base_dir)
        except (ValueError, OSError) as exc:
            if isinstance(exc, ToolkitError):
                raise
            raise ConfigError(f"model section: {exc}") from exc

    @cached_property
    def field(self):
        try:
            return field_from_config(self.raw["field"], self.raw.get("T"), self.base_dir)
        except (ValueError, OSError) as exc:
            if isinstance(exc, ToolkitError):
                raise
            raise ConfigError(f"field section: {exc}") from exc

    @property
    def T(self):
        T = self.raw.get("T")
        return float(self.field.horizon if T is None else T)

    @property
    def schemes(self):
        return [self.scheme(s) for s in self.raw["schemes"]]

    @cached_property
    def sweep_steps(self):
        """Step counts ``N`` of the time-step sweep, coarsest first."""
        sw = self.raw["sweep"]
        if "n_steps" in sw:
            ns = [int(n) for n in sw["n_steps"]]
        elif "dt" in sw:
            ns = []
            for dt in sw["dt"]:
                n = int(round(self.T / float(dt)))
                if n < 1 or abs(n * float(dt) - self.T) > 1e-12 * self.T:
                    raise ConfigError(f"dt = {dt} does not divide T = {self.T}")
                ns.append(n)
        else:
            ns = _pow2_range(sw.get("n_min", 32), sw.get("n_max", 4096), "sweep")
        if any(n < 1 for n in ns):
            raise ConfigError("step counts must be positive")
        return sorted(set(ns))

    @cached_property
    def eps_policy(self):
        return EpsPolicy.from_dict(self.raw["eps_policy"])

    def policy_for(self, scheme):
        override = self.raw.get("scheme_eps_policy", {}).get(scheme)
        return EpsPolicy.from_dict(override) if override is not None else self.eps_policy

    @property
    def K(self):
        return int(self.raw["quantified"]["K"])

    @property
    def jobs(self):
        return int(self.raw["jobs"])

    @property
    def out(self):
        return Path(self.raw["out"])


# -- single runs ----------------------------------------------------------------


def run_scheme(cfg, scheme, n_steps, grid=None, K=None, record_trajectory=False):
    """Build what ``scheme`` needs for ``n_steps`` and propagate over ``[0, T]``.

    Only the toolkit entries the run visits are built; the result equals that
    of a full build.  ``grid`` overrides the configured eps policy.
    """
    model, fld = cfg.model, cfg.field
    dt = cfg.T / n_steps
    if scheme == "strang":
        return propagate_strang(model, fld, n_steps, T=cfg.T, record_trajectory=record_trajectory)
    if grid is None:
        grid = cfg.policy_for(scheme).grid(fld, n_steps, dt)
    mids = midpoint_values(fld, n_steps, dt)
    if scheme in ("toolkit", "improved_low"):
        tk = build_toolkit(model, grid, dt, indices=grid.nearest_indices(mids))
        if scheme == "toolkit":
            res = propagate_toolkit(model, fld, tk, n_steps, record_trajectory)
        else:
            il = cfg.raw["improved_low"]
            corr = build_correctors(model, dt, sign=il["corrector_sign"])
            res = propagate_improved_low(model, fld, tk, corr, n_steps, il["beta_divisor"], il["init"],
                                         record_trajectory)
    else:
        ells = np.unique(grid.brackets(mids)[0])
        tk = build_toolkit(model, grid, dt, keep_factors=True, indices=np.concatenate([ells, ells + 1]))
        if scheme == "improved_high":
            res = propagate_improved_high(model, fld, tk, n_steps, record_trajectory)
        else:
            ptk = build_pair_toolkit(tk, K or cfg.K, brackets=ells)
            res = propagate_quantified_high(model, fld, ptk, n_steps, record_trajectory)
            res.info["pair_products"] = ptk.build_cost.matrix_products
    res.info["build_eigendecompositions"] = tk.build_cost.eigendecompositions
    return res


_REFERENCE_CACHE = {}


def reference_state(cfg):
    """Reference solution at ``T``; cached per (model, field, T, settings) within the process."""
    ref = cfg.raw["reference"]
    key = (cfg.model.fingerprint(), json.dumps(cfg.raw["field"], sort_keys=True), cfg.T,
           json.dumps(ref, sort_keys=True))
    if key not in _REFERENCE_CACHE:
        _REFERENCE_CACHE[key] = propagate_reference(
            cfg.model, cfg.field, T=cfg.T, tol=ref["tol"], n_start=int(ref["n_start"]),
            max_n=int(ref["max_n"]), method=ref.get("method", "taylor"))
    return _REFERENCE_CACHE[key]


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# -- reports ---------------------------------------------------------------------


@dataclass
class ConvergenceRow:
    scheme: str
    dt: float
    delta_eps: Optional[float]
    n_steps: int
    m: Optional[int]
    error: float
    cost: dict
    nominal_products: int
    in_fit: bool = False


@dataclass
class FitResult:
    slope: float
    intercept: float
    residual: float
    n_points: int

    def predict(self, x):
        return math.exp(self.intercept) * x ** self.slope


@dataclass
class ConvergenceReport:
    """Rows of one sweep and the fitted order per scheme.

    ``axis`` is ``"dt"`` for time-step sweeps and ``"delta_eps"`` for
    field-grid sweeps.
    """

    axis: str
    rows: list
    fits: dict = dc_field(default_factory=dict)
    metadata: dict = dc_field(default_factory=dict)
    warnings: list = dc_field(default_factory=list)

    def x(self, row):
        return row.dt if self.axis == "dt" else row.delta_eps

    def series(self, scheme):
        """``(x, error)`` arrays for one scheme, in row order."""
        rows = [r for r in self.rows if r.scheme == scheme]
        return np.array([self.x(r) for r in rows]), np.array([r.error for r in rows])

    @property
    def schemes(self):
        return list(dict.fromkeys(r.scheme for r in self.rows))

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scheme", "dt", "delta_eps", "N", "m", "error", "in_fit", "nominal_products",
                        "applies", "online_exponentials", "toolkit_entries_used"])
            for r in self.rows:
                w.writerow([r.scheme, repr(r.dt), "" if r.delta_eps is None else repr(r.delta_eps),
                            r.n_steps, "" if r.m is None else r.m, repr(r.error), int(r.in_fit),
                            r.nominal_products, r.cost["matrix_vector_applies"],
                            r.cost["online_exponentials"], r.cost["toolkit_entries_used"]])
        return path


def fit_order(points):
    """Least-squares slope of ``log(error)`` against ``log(x)``.

    Returns ``(slope, intercept, residual)`` where ``residual`` is the RMS of
    the log-residuals.  Points with a nonpositive error are dropped; fewer than
    three usable points is an error.
    """
    pts = [(float(x), float(e)) for x, e in points if e > 0 and x > 0]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points with positive error to fit an order, got {len(pts)}")
    lx = np.log([p[0] for p in pts])
    le = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, le, 1)
    resid = le - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


def check_monotone(xs, errors, floor=0.0, label=""):
    """Refining ``x`` should not raise the error; returns warning strings.

    A rise by more than 2x produces a warning, by more than 10x a
    :class:`SweepError`.  Points below ``floor`` are not checked.
    """
    order = np.argsort(-np.asarray(xs))
    errs = np.asarray(errors)[order]
    out = []
    for a, b in zip(errs[:-1], errs[1:]):
        if a <= floor or b <= floor:
            continue
        if b > 10 * a:
            raise SweepError(f"{label}: error jumped from {a:.3e} to {b:.3e} on refinement")
        if b > 2 * a:
            out.append(f"{label}: error rose from {a:.3e} to {b:.3e} on refinement")
    return out


def _fit_rows(report, scheme, drop_largest, floor):
    rows = sorted((r for r in report.rows if r.scheme == scheme), key=report.x, reverse=True)
    window = [r for r in rows[drop_largest:] if r.error > floor]
    for r in window:
        r.in_fit = True
    if len(window) < 3:
        report.warnings.append(f"{scheme}: {len(window)} point(s) in the fit window, need at least 3")
        return None
    return FitResult(*fit_order([(report.x(r), r.error) for r in window]), n_points=len(window))


# Two unit vectors are at most 2 apart; anything beyond means the run lost unitarity.
ERROR_BOUND = 2.0 + 1e-9


def _row(scheme, res, psi_ref, products_per_step):
    err = float(np.linalg.norm(res.final_state - psi_ref))
    if not err <= ERROR_BOUND:
        raise SweepError(f"{scheme} at N={res.n_steps}: error {err:.3e} exceeds the bound 2 for unit states")
    return ConvergenceRow(scheme, res.dt, res.delta_eps, res.n_steps, res.m, err, res.cost.as_dict(),
                          products_per_step.get(scheme, 0) * res.n_steps)


def _finish(report, drop_largest, floor, floor_factor):
    for s in report.schemes:
        xs, es = report.series(s)
        msgs = check_monotone(xs, es, floor_factor * floor, s)
        for msg in msgs:
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
        report.warnings.extend(msgs)
        fit = _fit_rows(report, s, drop_largest, floor_factor * floor)
        if fit is not None:
            report.fits[s] = fit
    report.metadata["fitted_slopes"] = {s: f.slope for s, f in report.fits.items()}
    return report


def _annotate(fn, scheme, label):
    try:
        return fn()
    except ToolkitError as exc:
        exc.add_note(f"while running {scheme} at {label}")
        raise


def run_convergence(cfg, jobs=None):
    """Time-step sweep of every configured scheme against the reference solution."""
    jobs = resolve_jobs(cfg.jobs if jobs is None else jobs)
    ref = reference_state(cfg)
    psi_ref = ref.final_state
    products = cfg.raw["cost"]["products_per_step"]
    points = [(s, n) for s in cfg.schemes for n in cfg.sweep_steps]

    def one(p):
        s, n = p
        res = _annotate(lambda: run_scheme(cfg, s, n), s, f"N={n}")
        return _row(s, res, psi_ref, products)

    rows = _map(one, points, jobs)
    floor = ref.info.get("gap", 0.0)
    report = ConvergenceReport("dt", rows, metadata={
        "x_axis": "dt", "T": cfg.T, "model": cfg.model.label,
        "eps_policy": {s: cfg.policy_for(s).to_dict() for s in cfg.schemes},
        "reference": {"n_ref": ref.n_steps, "gap": floor, "tol": ref.info.get("tol")},
        "config": cfg.to_dict(),
    })
    fit = cfg.raw["fit"]
    return _finish(report, int(fit["drop_largest"]), floor, float(fit["floor_factor"]))


def eps_sweep_grids(cfg):
    es = cfg.raw["eps_sweep"]
    fld = cfg.field
    if "m" in es:
        ms = [int(m) for m in es["m"]]
    else:
        ms = _pow2_range(es.get("m_min", 8), es.get("m_max", 4096), "eps_sweep")
    return [make_grid(fld.eps_min, fld.eps_max, m) for m in ms]


def run_eps_sweep(cfg, jobs=None):
    """Field-grid sweep at a fixed small time step.

    The time-discretization floor is the error of the same run with exact
    field values; points within ``floor_factor`` of it are left out of the fit.
    """
    jobs = resolve_jobs(cfg.jobs if jobs is None else jobs)
    es = cfg.raw["eps_sweep"]
    n = int(es["n_steps"])
    schemes = [cfg.scheme(s) for s in es.get("schemes", ["toolkit"])]
    ref = reference_state(cfg)
    psi_ref = ref.final_state
    products = cfg.raw["cost"]["products_per_step"]
    grids = eps_sweep_grids(cfg)
    points = [(s, g) for s in schemes for g in grids]

    def one(p):
        s, g = p
        res = _annotate(lambda: run_scheme(cfg, s, n, grid=g), s, f"m={g.m}")
        return _row(s, res, psi_ref, products)

    rows = _map(one, points, jobs)
    exact = run_scheme(cfg, "toolkit", n, grid=EpsPolicy("exact").grid(cfg.field, n, cfg.T / n))
    dt_floor = float(np.linalg.norm(exact.final_state - psi_ref))
    floor = max(dt_floor, ref.info.get("gap", 0.0))
    report = ConvergenceReport("delta_eps", rows, metadata={
        "x_axis": "delta_eps", "T": cfg.T, "N": n, "dt": cfg.T / n, "model": cfg.model.label,
        "dt_floor": dt_floor,
        "reference": {"n_ref": ref.n_steps, "gap": ref.info.get("gap"), "tol": ref.info.get("tol")},
        "config": cfg.to_dict(),
    })
    fit = cfg.raw["fit"]
    return _finish(report, int(fit.get("eps_drop_largest", 0)), floor, float(fit["floor_factor"]))


def emit_plot_data(report, path):
    """Write ``scheme,x,error`` rows to ``path`` and axis/slope metadata next to it.

    Returns the paths of the CSV file and of the ``.json`` sidecar.
    """
    if not report.rows:
        raise ValueError("cannot emit plot data for an empty report")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "x", "error"])
        for r in report.rows:
            w.writerow([r.scheme, repr(float(report.x(r))), repr(r.error)])
    meta = {
        "x_axis": report.axis,
        "y_axis": "l2_error",
        "scale": "loglog",
        "schemes": report.schemes,
        "fits": {s: {"slope": f.slope, "intercept": f.intercept, "residual": f.residual,
                     "n_points": f.n_points} for s, f in report.fits.items()},
        "warnings": list(report.warnings),
    }
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return path, side


def write_report(report, out_dir, stem):
    """Full rows CSV, plot data and a metadata JSON under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / f"{stem}_rows.csv")
    emit_plot_data(report, out / f"{stem}.csv")
    meta = dict(report.metadata)
    meta["warnings"] = list(report.warnings)
    (out / f"{stem}_meta.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return out


# -- cost to tolerance -------------------------------------------------------------


@dataclass
class CostTableRow:
    scheme: str
    n_steps: int
    m: Optional[int]
    delta_eps: Optional[float]
    K: Optional[int]
    matrix_products: int
    applies: int
    online_exponentials: int
    build_eigendecompositions: int
    achieved_error: float
    reached: bool
    m_amplitude: Optional[float] = None


def cost_to_tolerance(cfg, tol=None, jobs=None):
    """Smallest power-of-two ``N`` (and grid ``m``) reaching ``tol``, per scheme.

    ``N`` doubles from ``cost.n_min``; for each ``N`` the grid size doubles from
    ``cost.m_min`` and stops at the first success.  The charge is the nominal
    per-step product count times ``N``, so the first ``N`` that succeeds is the
    cheapest.  Schemes that never reach ``tol`` within the caps are reported
    with ``reached=False`` and their best error.  Rows are sorted by charge.
    """
    c = cfg.raw["cost"]
    tol = float(c["tol"] if tol is None else tol)
    if not 0 < tol < 2 + 1e-12:
        raise ValueError(f"tolerance must lie in (0, 2], got {tol}")
    jobs = resolve_jobs(cfg.jobs if jobs is None else jobs)
    psi_ref = reference_state(cfg).final_state
    fld = cfg.field
    products = c["products_per_step"]
    amplitude = max(abs(fld.eps_min), abs(fld.eps_max))
    n_list = _pow2_range(c["n_min"], c["n_max"], "cost N range")
    m_list = _pow2_range(c["m_min"], c["m_max"], "cost m range")

    def search(scheme):
        best = None
        for n in n_list:
            for m in ([None] if scheme == "strang" else m_list):
                grid = None if m is None else make_grid(fld.eps_min, fld.eps_max, m)
                res = run_scheme(cfg, scheme, n, grid=grid)
                err = float(np.linalg.norm(res.final_state - psi_ref))
                row = CostTableRow(
                    scheme, n, m, res.delta_eps, cfg.K if scheme == "quantified_high" else None,
                    products.get(scheme, 0) * n, res.cost.matrix_vector_applies,
                    res.cost.online_exponentials, res.info.get("build_eigendecompositions", 0),
                    err, err <= tol,
                    None if m is None else amplitude / res.delta_eps)
                if row.reached:
                    return row
                if best is None or err < best.achieved_error:
                    best = row
        return best

    rows = _map(search, cfg.schemes, jobs)
    return sorted(rows, key=lambda r: (not r.reached, r.matrix_products, r.n_steps))


def write_cost_table(rows, path, cfg=None, tol=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["scheme", "N", "m", "m_amplitude", "delta_eps", "K", "matrix_products", "applies", "online_exponentials",
            "build_eigendecompositions", "achieved_error", "reached"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([r.scheme, r.n_steps, "" if r.m is None else r.m,
                        "" if r.m_amplitude is None else repr(r.m_amplitude),
                        "" if r.delta_eps is None else repr(r.delta_eps), "" if r.K is None else r.K,
                        r.matrix_products, r.applies, r.online_exponentials, r.build_eigendecompositions,
                        repr(r.achieved_error), int(r.reached)])
    meta = {
        "tol": tol,
        "columns": cols,
        "m_convention": "m = (eps_max - eps_min) / delta_eps is the grid size; "
                        "m_amplitude = max|eps| / delta_eps counts against the amplitude only",
        "matrix_products": "nominal products per step times N",
        "unreachable": [r.scheme for r in rows if not r.reached],
    }
    if cfg is not None:
        meta["config"] = cfg.to_dict()
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return path, side
