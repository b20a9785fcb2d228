"""Command line entry point.

    uniqlab distance  --scenario interval-alpha2
    uniqlab volume    --config my.ini --radii 0.5 1 1.5
    uniqlab capacity  --scenario interval-alpha0 --target boundary --collar 1
    uniqlab evolve    --scenario euclidean-square --generator hd --t 0.1 --dt 1e-3
    uniqlab certify   --config my.ini --emit text --out results/
    uniqlab scenario  interval-alpha2

Exit codes: 0 when the run completed (whatever the verdict), 2 for a bad
config or problem definition, 3 when a solver fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors
from .capacity import capacity_trace
from .config import Config, load_config, parse_resolution
from .metric import ball_volume_curve, riemannian_distance
from .report import certify, emit, write_tables
from .scenarios import SCENARIOS, scenario_config
from .semigroup import ALIASES, assemble_generator, evolve

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_OTHER = 0, 2, 3, 1

_CONFIG_ERRORS = (errors.ConfigError, errors.UnknownScenario, errors.EmptyInterior, errors.Disconnected,
                  errors.NonFinite, errors.NotPositiveDefinite, errors.OriginOutside)
_SOLVER_ERRORS = (errors.SolverFailure, errors.MaximumPrincipleViolated, errors.PositivityLost)


def _problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="INI config file")
    src.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in scenario")
    p.add_argument("--resolution", help="override the grid resolution (e.g. 257 or 161x43)")


def _load(args) -> Config:
    return load_config(args.config) if args.config else scenario_config(args.scenario)


def _field(args, cfg: Config):
    res = parse_resolution(args.resolution) if args.resolution else cfg.resolutions[-1]
    return cfg.problem.discretize(res)


def _open_out(path):
    if path is None or str(path) == "-":
        return sys.stdout
    return open(path, "w", newline="")


def _write_csv(path, header, rows) -> None:
    fh = _open_out(path)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_distance(args) -> int:
    cfg = _load(args)
    fld = _field(args, cfg)
    dist = riemannian_distance(fld, order=args.order)
    pts = fld.grid.points
    header = [f"x{k + 1}" for k in range(fld.grid.dim)] + ["rho"]
    _write_csv(args.out, header, ([*map(float, p), float(r)] for p, r in zip(pts, dist.values)))
    return EXIT_OK


def cmd_volume(args) -> int:
    cfg = _load(args)
    fld = _field(args, cfg)
    dist = riemannian_distance(fld)
    if args.radii:
        radii = sorted(args.radii)
    else:
        radii = np.linspace(0.0, cfg.analysis["r_max"], cfg.analysis["n_radii"] + 1)
    curve = ball_volume_curve(dist, radii)
    _write_csv(args.out, ["r", "volume", "truncated"], curve.rows())
    return EXIT_OK


def _read_points(path: Path) -> np.ndarray:
    try:
        return np.loadtxt(path, ndmin=2, comments="#")
    except (OSError, ValueError) as exc:
        raise errors.ConfigError(f"cannot read target set {path}: {exc}") from None


def cmd_capacity(args) -> int:
    cfg = _load(args)
    target = None if args.target == "boundary" else _read_points(Path(args.target))
    ks = (args.collar,) if args.collar else cfg.analysis["collars"]
    res = [parse_resolution(args.resolution)] if args.resolution else cfg.resolutions
    est = capacity_trace(cfg.problem, res, ks, target, cfg.analysis["tol_cap"])
    doc = est.as_dict()
    doc = {"value": doc["value"], "trace": doc["trace"], "verdict": doc["verdict"], "target": doc["target"]}
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = _load(args)
    fld = _field(args, cfg)
    gen = assemble_generator(fld, args.generator)
    if args.psi0 == "one":
        psi0 = np.ones(fld.grid.n)
    elif args.psi0 == "random":
        psi0 = np.random.default_rng(cfg.analysis["seed"]).uniform(0.0, 1.0, fld.grid.n)
    else:
        psi0 = np.loadtxt(args.psi0)
        if psi0.shape != (fld.grid.n,):
            raise errors.ConfigError(f"initial data needs {fld.grid.n} values, got {psi0.size}")
    traj = evolve(gen, psi0, args.t, args.dt, every=args.every, scheme=args.scheme)
    m = fld.grid.vol
    rows = ((float(t), m * float(p.sum()), float(np.sqrt(m * np.sum(p * p))), float(np.abs(p).max()))
            for t, p in zip(traj.times, traj.states))
    _write_csv(args.out, ["t", "mass", "l2norm", "linfnorm"], rows)
    if args.dump:
        out = Path(args.dump)
        out.mkdir(parents=True, exist_ok=True)
        for t, p in zip(traj.times, traj.states):
            np.savetxt(out / f"psi_t{t:.6g}.txt", p)
    return EXIT_OK


def _report(cfg: Config, args) -> int:
    rep = certify(cfg)
    sys.stdout.write(emit(rep, args.emit))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(emit(rep, "json"))
        write_tables(rep, out)
    return EXIT_OK


def cmd_certify(args) -> int:
    return _report(load_config(args.config), args)


def cmd_scenario(args) -> int:
    return _report(scenario_config(args.name), args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uniqlab", description="Numerical uniqueness certifier for diffusion operators.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="Riemannian distance to the origin, one CSV row per node")
    _problem_args(p)
    p.add_argument("--order", type=int, default=None, help="stencil order (max-norm radius)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("volume", help="ball volumes |B(r)| as CSV r,volume,truncated")
    _problem_args(p)
    p.add_argument("--radii", type=float, nargs="+")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("capacity", help="capacity refinement trace as JSON")
    _problem_args(p)
    p.add_argument("--target", default="boundary", help="'boundary' or a file of points, one per line")
    p.add_argument("--collar", type=int, default=None, help="collar width k (default: config collars)")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("evolve", help="heat semigroup trajectory as CSV t,mass,l2norm,linfnorm")
    _problem_args(p)
    p.add_argument("--generator", choices=sorted(ALIASES), default="hd")
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--every", type=int, default=1, help="snapshot every N steps")
    p.add_argument("--scheme", choices=("implicit-euler", "crank-nicolson"), default="implicit-euler")
    p.add_argument("--psi0", default="one", help="'one', 'random' or a file of node values")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--dump", help="directory for flat snapshot files")
    p.set_defaults(func=cmd_evolve)

    for name, help_ in (("certify", "full hypothesis report for a config"),
                        ("scenario", "full hypothesis report for a built-in scenario")):
        p = sub.add_parser(name, help=help_)
        if name == "certify":
            p.add_argument("--config", type=Path, required=True)
        else:
            p.add_argument("name", help="one of: " + ", ".join(SCENARIOS))
        p.add_argument("--emit", choices=("json", "text"), default="text")
        p.add_argument("--out", help="directory for report.json and CSV tables")
        p.set_defaults(func=cmd_certify if name == "certify" else cmd_scenario)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"uniqlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _SOLVER_ERRORS as exc:
        print(f"uniqlab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except errors.UniqlabError as exc:
        print(f"uniqlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    raise SystemExit(main())
