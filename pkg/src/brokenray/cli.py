"""Command-line entry point: ``brokenray {phantom,simulate,reconstruct,trace,evaluate}``.

Every command is deterministic given its arguments and seed.  Structured
outputs are JSON, plot-ready tables are CSV.  The exit status is 0 exactly
when the run produced no error record.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .field import PHANTOMS, FourierField, phantom, uniform_grid
from .forward import Sinogram, resolve_threads, simulate
from .geometry import InvalidRayError, TomographySet, make_ray, trace_csv
from .reconstruct import (OpenSetPlan, ReconstructionError, SingletonPlan, build_open_plan,
                          build_singleton_plan, field_metrics, reconstruct_a0_singleton,
                          reconstruct_open)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _load_plan(path):
    rec = json.loads(Path(path).read_text())
    if rec.get("kind") == "singleton":
        return SingletonPlan.from_dict(rec)
    return OpenSetPlan.from_dict(rec)


def raster_csv(field: FourierField, n_theta: int) -> str:
    """Field values on ``grid x {2 pi j / n_theta}`` as ``r,theta,value`` rows."""
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    vals = field.eval(field.grid[:, None], theta[None, :])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "theta", "value"])
    for i, r in enumerate(field.grid):
        for j, t in enumerate(theta):
            w.writerow([f"{r:.17g}", f"{t:.17g}", f"{vals[i, j]:.17g}"])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def cmd_phantom(args) -> int:
    field = phantom(args.name, uniform_grid(args.grid))
    _write(args.out, field.to_json() + "\n")
    if args.raster:
        _write(args.raster, raster_csv(field, args.n_theta))
    return 0


def _plan_from_args(args):
    if args.plan:
        return _load_plan(args.plan)
    if args.mode == "singleton":
        return build_singleton_plan(args.point, n_min=args.n_min, n_targets=args.targets)
    E = TomographySet.from_intervals([tuple(args.arc)])
    return build_open_plan(E, args.K, n_max=args.n_max, lam_rel=args.lam)


def cmd_simulate(args) -> int:
    field = FourierField.from_json(Path(args.field).read_text())
    plan = _plan_from_args(args)
    if args.plan_out:
        _write(args.plan_out, _dump(plan.to_dict()))
    sino = simulate(field, plan.rays, normalized=not args.raw, sigma=args.sigma or None,
                    seed=args.seed, threads=args.threads)
    _write(args.out, sino.to_json() + "\n")
    if args.csv:
        _write(args.csv, sino.to_csv())
    return 0


def cmd_reconstruct(args) -> int:
    sino = Sinogram.from_json(Path(args.sinogram).read_text())
    plan = _load_plan(args.plan)
    grid = uniform_grid(args.grid)
    report = {"errors": [], "sinogram_entries": len(sino)}
    recon = None
    try:
        if isinstance(plan, SingletonPlan):
            report["mode"] = "singleton"
            a0 = reconstruct_a0_singleton(sino, plan, grid)
            recon = FourierField(grid, a0.values[None, :], np.zeros((0, len(grid))))
        else:
            report["mode"] = "open"
            if args.lam is not None:
                plan.lam_rel = args.lam
            res = reconstruct_open(sino, plan, grid, threads=args.threads)
            recon = res.field
            report["errors"].extend(res.errors)
            report["systems"] = res.systems
            report["cond"] = res.cond
            report["cond_reg"] = res.cond_reg
            report["lam_rel"] = plan.lam_rel
    except ReconstructionError as exc:
        rec = {"error": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "failures"):
            rec["failures"] = exc.failures
        report["errors"].append(rec)
    if recon is not None:
        _write(args.out, recon.to_json() + "\n")
        if args.truth:
            truth = FourierField.from_json(Path(args.truth).read_text())
            if report["mode"] == "singleton":
                truth = FourierField(truth.grid, truth.a[:1], np.zeros((0, len(truth.grid))))
            report["metrics"] = field_metrics(truth, recon)
    _write(args.report, _dump(report))
    return 1 if report["errors"] else 0


def cmd_trace(args) -> int:
    ray = make_ray(args.n, args.m, args.iota, args.kappa)
    _write(args.out, trace_csv(ray))
    return 0


def cmd_evaluate(args) -> int:
    truth = FourierField.from_json(Path(args.truth).read_text())
    recon = FourierField.from_json(Path(args.recon).read_text())
    _write(args.out, _dump(field_metrics(truth, recon)))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brokenray", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: $BRT_THREADS or 1)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    ph = sub.add_parser("phantom", parents=[common], help="write a test field")
    ph.add_argument("--name", required=True, choices=sorted(PHANTOMS))
    ph.add_argument("--grid", type=int, default=512, help="radial intervals N")
    ph.add_argument("--out", default="-")
    ph.add_argument("--raster", help="CSV of values on a polar grid")
    ph.add_argument("--n-theta", type=int, default=64)
    ph.set_defaults(func=cmd_phantom)

    si = sub.add_parser("simulate", parents=[common], help="compute a sinogram")
    si.add_argument("--field", required=True)
    si.add_argument("--plan", help="existing plan JSON; otherwise one is built")
    si.add_argument("--mode", choices=("singleton", "open"), default="singleton")
    si.add_argument("--point", type=float, default=0.0)
    si.add_argument("--n-min", type=int, default=512)
    si.add_argument("--targets", type=int, default=64)
    si.add_argument("--arc", type=float, nargs=2, default=(-0.25, 0.25), metavar=("A", "B"))
    si.add_argument("--K", type=int, default=8)
    si.add_argument("--n-max", type=int, default=400)
    si.add_argument("--lam", type=float, default=1e-8)
    si.add_argument("--plan-out")
    si.add_argument("--sigma", type=float, default=0.0)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--raw", action="store_true", help="store totals instead of means")
    si.add_argument("--out", default="-")
    si.add_argument("--csv")
    si.set_defaults(func=cmd_simulate)

    re_ = sub.add_parser("reconstruct", parents=[common], help="invert a sinogram")
    re_.add_argument("--sinogram", required=True)
    re_.add_argument("--plan", required=True)
    re_.add_argument("--grid", type=int, default=512)
    re_.add_argument("--lam", type=float, default=None, help="override the plan's relative Tikhonov weight")
    re_.add_argument("--truth")
    re_.add_argument("--out", required=True)
    re_.add_argument("--report", required=True)
    re_.set_defaults(func=cmd_reconstruct)

    tr = sub.add_parser("trace", parents=[common], help="vertex CSV of one ray")
    tr.add_argument("--n", type=int, required=True)
    tr.add_argument("--m", type=int, required=True)
    tr.add_argument("--iota", type=float, default=0.0)
    tr.add_argument("--kappa", type=float, default=0.0)
    tr.add_argument("--out", default="-")
    tr.set_defaults(func=cmd_trace)

    ev = sub.add_parser("evaluate", parents=[common], help="compare two fields")
    ev.add_argument("--truth", required=True)
    ev.add_argument("--recon", required=True)
    ev.add_argument("--out", default="-")
    ev.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.threads = resolve_threads(args.threads)
    try:
        return args.func(args)
    except (InvalidRayError, ValueError, OSError) as exc:
        print(f"brokenray: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
