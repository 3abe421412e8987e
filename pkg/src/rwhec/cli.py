"""Command-line entry point.

Exit codes: 0 on success, 2 when a solver fails, 3 when input validation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import simulation as sim
from .assembly import objective_value
from .baseline import solve_linear
from .certifier import certifiable_rwhec, certify_candidate
from .config import Config
from .dataset import read_dataset, save_dataset
from .errors import (
    DivergedError,
    KernelAmbiguousError,
    ParseError,
    RankDeficientError,
    ScaleNearZeroError,
    SolverFailure,
    ValidationError,
)
from .identifiability import analyze
from .local_solver import refine
from .solution import CalibrationSolution

EXIT_OK, EXIT_SOLVER, EXIT_INVALID = 0, 2, 3
SOLVER_ERRORS = (SolverFailure, DivergedError, KernelAmbiguousError, RankDeficientError, ScaleNearZeroError)

log = logging.getLogger("rwhec")


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _load(args, cfg: Config):
    d = cfg.data["dataset"]
    ds = read_dataset(args.dataset, d["reject_tol"], d["reproject_tol"])
    if getattr(args, "monocular", False):
        ds.graph.monocular = True
    return ds


def _solution_report(sol: CalibrationSolution, truth, graph) -> dict:
    rep = sol.to_dict()
    rep["X_names"] = list(graph.x_names)
    rep["Y_names"] = list(graph.y_names)
    if truth is not None:
        rep["metrics"] = sim.compute_errors(sol, truth, graph.monocular).summary()
    return rep


def _solve(method: str, graph, cfg: Config, init: CalibrationSolution | None = None):
    """Run one method and return ``(solution, certificate_or_None)``."""
    if method == "sdp":
        return certifiable_rwhec(graph, cfg.certifier_options())
    if method == "linear":
        return solve_linear(graph), None
    if method == "local":
        if init is None:
            init = solve_linear(graph)
        return refine(graph, init, cfg.local_options()), None
    raise ValueError(f"unknown method {method!r}")


def cmd_simulate(args, cfg: Config) -> int:
    spec = sim.SCENARIOS[args.scenario]
    spec = replace(
        spec,
        seed=args.seed,
        gt_seed=cfg.data["simulation"]["gt_seed"],
        langevin_convention=cfg.data["simulation"]["langevin_convention"],
    )
    graph, truth = sim.synthesize_dataset(spec)
    save_dataset(graph, args.out, truth)
    _emit({"scenario": args.scenario, "seed": args.seed, "pairs": graph.num_pairs, "path": args.out}, None)
    return EXIT_OK


def cmd_check(args, cfg: Config) -> int:
    ds = _load(args, cfg)
    rep = analyze(ds.graph, **cfg.identifiability)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK


def cmd_calibrate(args, cfg: Config) -> int:
    ds = _load(args, cfg)
    graph = ds.graph
    t0 = time.perf_counter()
    init = None
    if args.method == "local":
        if args.init == "file":
            if not args.init_file:
                raise ValidationError("--init file requires --init-file")
            init = CalibrationSolution.from_dict(json.loads(Path(args.init_file).read_text()))
            init.method = "file"
        else:
            init = solve_linear(graph)
    sol, cert = _solve(args.method, graph, cfg, init)
    report = {
        "mode": "monocular" if graph.monocular else "standard",
        "method": args.method,
        "solution": _solution_report(sol, ds.ground_truth, graph),
        "objective": objective_value(graph, sol.xs, sol.ys, sol.alpha),
        "seconds": time.perf_counter() - t0,
    }
    if init is not None:
        report["initializer"] = {
            "method": init.method,
            "cost": sol.info.get("initial_cost"),
            "final_cost": sol.cost,
        }
    if cert is not None:
        report["certificate"] = cert.to_dict()
        report["solver"] = {k: v for k, v in sol.info.items() if k not in report["certificate"]}
    _emit(report, args.out)
    return EXIT_OK


def cmd_certify(args, cfg: Config) -> int:
    ds = _load(args, cfg)
    graph = ds.graph
    t0 = time.perf_counter()
    if args.solution:
        cand = CalibrationSolution.from_dict(json.loads(Path(args.solution).read_text()))
        cert = certify_candidate(graph, cand, cfg.certifier_options())
        sol = cand
    else:
        sol, cert = certifiable_rwhec(graph, cfg.certifier_options())
    report = {
        "mode": "monocular" if graph.monocular else "standard",
        "method": "sdp",
        "certificate": cert.to_dict(),
        "solution": _solution_report(sol, ds.ground_truth, graph),
        "seconds": time.perf_counter() - t0,
    }
    _emit(report, args.out)
    return EXIT_OK


def cmd_benchmark(args, cfg: Config) -> int:
    spec = replace(
        sim.SCENARIOS[args.scenario],
        gt_seed=cfg.data["simulation"]["gt_seed"],
        langevin_convention=cfg.data["simulation"]["langevin_convention"],
    )
    methods = {}
    for m in args.methods.split(","):
        m = m.strip()
        if m == "sdp":
            methods["sdp"] = lambda g: certifiable_rwhec(g, cfg.certifier_options())[0]
        elif m == "linear":
            methods["linear"] = solve_linear
        elif m == "local":
            methods["local"] = lambda g: refine(g, solve_linear(g), cfg.local_options())
        else:
            raise ValidationError(f"unknown method {m!r}", [m])
    res = sim.run_benchmark(spec, args.trials, methods, args.seed)
    csv = sim.benchmark_csv(res)
    if args.csv:
        Path(args.csv).write_text(csv)
    else:
        sys.stdout.write(csv)
    if args.json:
        Path(args.json).write_text(json.dumps(res, indent=2, default=_jsonable) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwhec", description="Certifiable robot-world and hand-eye calibration.")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic dataset")
    s.add_argument("--scenario", choices=sorted(sim.SCENARIOS), default="sphere_k125_s1cm")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check-identifiability", help="report sufficient uniqueness conditions")
    s.add_argument("dataset")
    s.add_argument("--out")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("calibrate", help="estimate the extrinsics")
    s.add_argument("dataset")
    s.add_argument("--method", choices=("sdp", "local", "linear"), default="sdp")
    s.add_argument("--init", choices=("linear", "file"), default="linear")
    s.add_argument("--init-file")
    s.add_argument("--monocular", action="store_true", help="estimate the translation scale")
    s.add_argument("--out")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("certify", help="solve the dual and bound the suboptimality of an estimate")
    s.add_argument("dataset")
    s.add_argument("--solution", help="candidate solution JSON; defaults to the extracted estimate")
    s.add_argument("--monocular", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("benchmark", help="seeded Monte Carlo comparison of methods")
    s.add_argument("--scenario", choices=sorted(sim.SCENARIOS), default="sphere_k125_s1cm")
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--methods", default="sdp,linear")
    s.add_argument("--seed", type=int, default=0, help="seed of the first trial")
    s.add_argument("--csv")
    s.add_argument("--json")
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config.load(args.config) if args.config else Config()
        cfg.apply_global_tolerances()
        return args.func(args, cfg)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
