"""Command-line entry point ``tdse-toolkit``.

Exit codes: 0 on success, 1 for an invalid configuration or input file, 2 for a
numerical failure (reference not converged, tolerance unreachable, broken
sweep).
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    FieldBoundsError,
    HermiticityError,
    HorizonError,
    ParseError,
    ToolkitError,
)
from .harness import (
    EpsPolicy,
    ExperimentConfig,
    cost_to_tolerance,
    reference_state,
    resolve_jobs,
    run_convergence,
    run_eps_sweep,
    run_scheme,
    write_cost_table,
    write_report,
)
from .schemes import propagate_reference
from .toolkit import build_toolkit, save_toolkit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
_INPUT_ERRORS = (ConfigError, ParseError, DimensionError, HermiticityError, FieldBoundsError, HorizonError)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=str) + "\n")


def cmd_build(cfg, out, jobs):
    b = cfg.raw["build"]
    n = int(b["n_steps"])
    dt = cfg.T / n
    grid = EpsPolicy.from_dict(b.get("eps_policy", {"kind": "exact"})).grid(cfg.field, n, dt)
    tk = build_toolkit(cfg.model, grid, dt, keep_factors=bool(b.get("keep_factors")), jobs=jobs)
    manifest = save_toolkit(tk, out / "toolkit", cfg.model)
    print(f"built {tk.indices.size} entries (dt={dt:.6g}, m={grid.m}) -> {manifest}")
    return EXIT_OK


def _run_propagate(cfg, scheme, n, p):
    if scheme == "reference":
        ref = cfg.raw["reference"]
        return propagate_reference(cfg.model, cfg.field, n_ref=n, T=cfg.T, tol=None,
                                   method=ref.get("method", "taylor"))
    scheme = cfg.scheme(scheme)
    grid = None
    if "eps_policy" in p and scheme != "strang":
        grid = EpsPolicy.from_dict(p["eps_policy"]).grid(cfg.field, n, cfg.T / n)
    return run_scheme(cfg, scheme, n, grid=grid, record_trajectory=bool(p.get("trajectory")))


def cmd_propagate(cfg, out, jobs):
    """Single run; ``out`` is a directory, or the state CSV path itself if it ends in ``.csv``."""
    p = cfg.raw["propagate"]
    name = str(p["scheme"]).replace("-", "_")
    scheme = "reference" if name == "reference" else cfg.scheme(name)
    n = int(p["n_steps"])
    if n < 1:
        raise ConfigError(f"propagate.n_steps must be >= 1, got {n}")
    res = _run_propagate(cfg, scheme, n, p)
    state_path = out if out.suffix == ".csv" else out / "state.csv"
    out = state_path.parent
    out.mkdir(parents=True, exist_ok=True)
    with state_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "re", "im"])
        for i, z in enumerate(res.final_state):
            w.writerow([i, repr(float(z.real)), repr(float(z.imag))])
    if scheme == "reference" and p.get("trajectory"):
        print("warning: the reference solver does not record trajectories", file=sys.stderr)
    if res.trajectory is not None:
        with (out / "trajectory.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "t", "index", "re", "im"])
            for j, psi in enumerate(res.trajectory):
                for i, z in enumerate(psi):
                    w.writerow([j, repr(j * res.dt), i, repr(float(z.real)), repr(float(z.imag))])
    meta = {"scheme": scheme, "N": n, "dt": res.dt, "T": res.T, "m": res.m, "delta_eps": res.delta_eps,
            "state": str(state_path),
            "cost": res.cost.as_dict(), "info": res.info, "norm": float(np.linalg.norm(res.final_state)),
            "model": cfg.model.label}
    if p.get("compare_reference"):
        ref = reference_state(cfg)
        meta["error"] = float(np.linalg.norm(res.final_state - ref.final_state))
        meta["reference_n"] = ref.n_steps
    _write_json(out / "propagate.json", meta)
    print(f"{scheme}: N={n}, |psi|={meta['norm']:.15f}" + (f", error={meta['error']:.3e}" if "error" in meta else ""))
    return EXIT_OK


def _print_warnings(report):
    for msg in report.warnings:
        print(f"warning: {msg}", file=sys.stderr)


def cmd_convergence(cfg, out, jobs):
    rep = run_convergence(cfg, jobs=jobs)
    write_report(rep, out, "convergence")
    for s, f in rep.fits.items():
        print(f"{s:16s} slope {f.slope:6.3f}  (rms residual {f.residual:.3f}, {f.n_points} points)")
    _print_warnings(rep)
    return EXIT_OK


def cmd_eps_sweep(cfg, out, jobs):
    rep = run_eps_sweep(cfg, jobs=jobs)
    write_report(rep, out, "eps_sweep")
    for s, f in rep.fits.items():
        print(f"{s:16s} slope {f.slope:6.3f} vs delta_eps  (rms residual {f.residual:.3f})")
    _print_warnings(rep)
    return EXIT_OK


def cmd_cost_table(cfg, out, jobs):
    tol = cfg.raw["cost"]["tol"]
    rows = cost_to_tolerance(cfg, tol, jobs=jobs)
    write_cost_table(rows, out / "cost_table.csv", cfg, tol)
    print(f"{'scheme':16s} {'N':>7s} {'m':>6s} {'products':>9s} {'error':>10s}")
    for r in rows:
        flag = "" if r.reached else "  UNREACHABLE"
        m = "-" if r.m is None else str(r.m)
        print(f"{r.scheme:16s} {r.n_steps:7d} {m:>6s} {r.matrix_products:9d} {r.achieved_error:10.3e}{flag}")
    return EXIT_OK if all(r.reached for r in rows) else EXIT_NUMERICAL


COMMANDS = {
    "build": cmd_build,
    "propagate": cmd_propagate,
    "convergence": cmd_convergence,
    "eps-sweep": cmd_eps_sweep,
    "cost-table": cmd_cost_table,
}


def make_parser():
    parser = argparse.ArgumentParser(prog="tdse-toolkit", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config (JSON)")
    parser.add_argument("--out", help="output directory (overrides the config's 'out')")
    parser.add_argument("--jobs", type=int, help="worker threads (the TDSE_TOOLKIT_JOBS variable wins)")
    prop = parser.add_argument_group("propagate overrides")
    prop.add_argument("--scheme", help="toolkit, improved-low, improved-high, quantified-high, strang or reference")
    prop.add_argument("--n-steps", type=int)
    prop.add_argument("--trajectory", action="store_true", help="also write trajectory.csv")
    return parser


def _apply_overrides(cfg, args):
    p = cfg.raw["propagate"]
    if args.scheme is not None:
        p["scheme"] = args.scheme
    if args.n_steps is not None:
        p["n_steps"] = args.n_steps
    if args.trajectory:
        p["trajectory"] = True


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        _apply_overrides(cfg, args)
        jobs = resolve_jobs(args.jobs if args.jobs is not None else cfg.jobs)
        out = Path(args.out) if args.out else cfg.out
        return COMMANDS[args.command](cfg, out, jobs)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ToolkitError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
