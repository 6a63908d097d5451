"""``crossdiff`` command line: run, convergence, sweep, validate-reaction.

Exit codes: 0 success, 1 a structural check failed, 2 configuration
error, 3 continuation stall, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import BACKEND, __version__
from .config import ConfigError, RunConfig, resolve
from .experiments import (astar_sweep, heat_solution, reference_solution,
                          run_convergence)
from .reaction import mass_action_3species, steady_state, validate
from .solver import ContinuationStall, InvariantMonitor, simulate
from .writers import (DiagnosticsWriter, write_eoc, write_snapshot, write_summary,
                      write_sweep)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_STALL, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("crossdiff")


def _prepare_output(directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _case_info(cfg: RunConfig) -> dict:
    c = cfg.case
    return {"case": c.name, "domain": c.domain, "cells": c.cells, "dt": c.dt,
            "final_time": c.final_time, "matrix": np.asarray(c.coefficients),
            "astar": c.astar, "reaction": c.reaction is not None,
            "reproducible": cfg.reproducible, "seed": cfg.seed, "backend": BACKEND,
            "package_version": __version__}


def cmd_run(cfg: RunConfig) -> int:
    case = cfg.case
    mesh = case.mesh()
    matrix = cfg.matrix()
    U0 = case.initial_state(mesh)
    grid = case.time_grid()
    out = _prepare_output(cfg.output)
    monitor = InvariantMonitor(mesh, matrix, case.reaction)
    n_steps = grid.n_steps
    tic = time.perf_counter()

    def snapshots(step, t, U, report):
        if step % cfg.stride == 0 or step == n_steps:
            write_snapshot(out, step, U, mesh)
            log.info("step %d/%d t=%.6g entropy=%.10g rel=%.6g newton=%d",
                     step, n_steps, t, report.entropy, report.relative_entropy,
                     report.newton_iterations)

    status, last = "ok", None

    def track(step, t, U, report):
        nonlocal last
        last = report

    with DiagnosticsWriter(out / "diagnostics.csv", matrix.n_species) as diag:
        try:
            simulate(U0, grid, matrix, mesh, case.reaction, cfg.solver,
                     observers=[diag, monitor, snapshots, track],
                     stride=max(n_steps, 1))
        except ContinuationStall as exc:
            status = "stall"
            log.error("%s", exc)
    verdicts = monitor.verdicts()
    write_summary(out / "summary.json", {
        "command": "run", "status": status, **_case_info(cfg),
        "steps_completed": last.step if last else 0,
        "final_time_reached": last.time if last else 0.0,
        "final_entropy": last.entropy if last else None,
        "final_relative_entropy": last.relative_entropy if last else None,
        "wall_time": time.perf_counter() - tic,
        "invariants": verdicts,
        "passed": monitor.passed,
    })
    if status == "stall":
        return EXIT_STALL
    return EXIT_OK if monitor.passed else EXIT_CHECK


def _reference(cfg: RunConfig, size, dt):
    case = cfg.case
    if case.reference == "closed_form":
        return heat_solution(case, case.final_time), None
    if case.reference == "none":
        raise ConfigError(f"case {case.name} has no reference solution")
    if size is None:
        raise ConfigError("reference_size is required for this case")
    log.info("reference run on %d cells", size)
    return reference_solution(case, size, dt, cfg.solver)


def cmd_convergence(cfg: RunConfig) -> int:
    conv = cfg.convergence
    sizes = conv.get("grid_sizes")
    if not sizes:
        raise ConfigError("convergence.grid_sizes is required")
    dt = conv.get("dt", cfg.case.dt)
    ref_size = conv.get("reference_size")
    if cfg.case.reference == "finest":
        if ref_size is None or ref_size <= sizes[-1] or any(ref_size % n for n in sizes):
            raise ConfigError("reference_size must be a finer multiple of every grid size")
    if len(cfg.case.domain) != 1:
        raise ConfigError("convergence studies run on 1D cases")
    out = _prepare_output(cfg.output)
    tic = time.perf_counter()
    reference = None if cfg.case.reference == "closed_form" else \
        _reference(cfg, ref_size, dt)
    table = run_convergence(cfg.case, sizes, dt, ref_size, reference, cfg.solver,
                            workers=conv.get("workers", 1))
    write_eoc(out / "eoc.csv", table)
    for cells, err, order in table.rows():
        log.info("cells=%d error=%.4e eoc=%.3f", cells, err, order)
    write_summary(out / "summary.json", {
        "command": "convergence", "status": "ok", **_case_info(cfg),
        "grid_sizes": table.cells, "errors": table.errors, "eoc": table.eocs,
        "reference_size": ref_size, "wall_time": time.perf_counter() - tic})
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    sw = cfg.sweep
    values = sw.get("astar")
    if not values:
        raise ConfigError("sweep.astar is required")
    if len(cfg.case.domain) != 1:
        raise ConfigError("a* sweeps run on 1D cases")
    cells = sw.get("cells", 32)
    dt = sw.get("dt", cfg.case.dt)
    ref_size = sw.get("reference_size")
    if cfg.case.reference == "finest" and (ref_size is None or ref_size % cells):
        raise ConfigError("sweep.reference_size must be a multiple of sweep.cells")
    out = _prepare_output(cfg.output)
    tic = time.perf_counter()
    reference = _reference(cfg, ref_size, dt)
    table = astar_sweep(cfg.case, values, reference, cells, dt, cfg.solver,
                        refine=sw.get("refine", False), refine_tol=sw.get("tol", 0.02),
                        workers=sw.get("workers", 1))
    write_sweep(out / "astar_sweep.csv", table)
    log.info("a*_opt = %.4g", table.best)
    write_summary(out / "summary.json", {
        "command": "sweep", "status": "ok", **_case_info(cfg), "sweep_cells": cells,
        "astar_opt": table.best, "min_error": min(table.errors),
        "evaluations": len(table.astar), "wall_time": time.perf_counter() - tic})
    return EXIT_OK


def cmd_validate_reaction(cfg: RunConfig) -> int:
    model = cfg.case.reaction
    if model is None:
        model = mass_action_3species()
        model = model.with_equilibrium(steady_state(model)[0])
    report = validate(model, cfg.samples, cfg.seed)
    d = report.as_dict()
    for key in ("isochore", "positivity", "entropy_dissipation"):
        print(f"{key:20s} {'PASS' if d[key]['passed'] else 'FAIL'} "
              f"({d[key]['violations']} violations)")
    if cfg.output is not None:
        out = _prepare_output(cfg.output)
        write_summary(out / "summary.json", {
            "command": "validate-reaction", "status": "ok", "seed": cfg.seed,
            "forward_rate": model.forward_rate, "backward_rate": model.backward_rate,
            "equilibrium": model.equilibrium, "report": d})
    return EXIT_OK if report.passed else EXIT_CHECK


COMMANDS = {"run": cmd_run, "convergence": cmd_convergence, "sweep": cmd_sweep,
            "validate-reaction": cmd_validate_reaction}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossdiff", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", help="catalog case or preset name")
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--stride", type=int, help="snapshot every N steps")
    common.add_argument("--reproducible", action="store_true", default=None,
                        help="order-independent (exactly rounded) reductions")
    common.add_argument("--seed", type=int, help="RNG seed for the validators")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="time-integrate one case")
    c = sub.add_parser("convergence", parents=[common], help="grid-convergence study")
    c.add_argument("--sizes", type=int, nargs="+", help="override grid sizes")
    c.add_argument("--reference-size", type=int)
    c.add_argument("--workers", type=int)
    s = sub.add_parser("sweep", parents=[common], help="a* sensitivity sweep")
    s.add_argument("--astar", type=float, nargs="+", help="override a* values")
    s.add_argument("--cells", type=int)
    s.add_argument("--reference-size", type=int)
    s.add_argument("--no-refine", action="store_true")
    s.add_argument("--workers", type=int)
    v = sub.add_parser("validate-reaction", parents=[common],
                       help="Monte-Carlo check of the reaction hypotheses")
    v.add_argument("--samples", type=int)
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.command == "convergence":
        for key, val in (("grid_sizes", args.sizes), ("reference_size", args.reference_size),
                         ("workers", args.workers)):
            if val is not None:
                cfg.convergence[key] = val
    elif args.command == "sweep":
        for key, val in (("astar", args.astar), ("cells", args.cells),
                         ("reference_size", args.reference_size), ("workers", args.workers)):
            if val is not None:
                cfg.sweep[key] = val
        if args.no_refine:
            cfg.sweep["refine"] = False
    elif args.command == "validate-reaction" and args.samples is not None:
        cfg.samples = args.samples
    if cfg.stride < 1:
        raise ConfigError("--stride must be >= 1")
    if cfg.seed < 0 or cfg.seed >= 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        case_name = args.case
        if args.command == "validate-reaction" and not (args.case or args.config):
            case_name = "reactive_2d"
        cfg = resolve(case_name, args.config, out=args.out, stride=args.stride,
                      reproducible=args.reproducible, seed=args.seed)
        if args.command == "validate-reaction" and args.out is None:
            cfg.output = None
        cfg = _apply_overrides(cfg, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"crossdiff: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContinuationStall as exc:
        print(f"crossdiff: {exc}", file=sys.stderr)
        return EXIT_STALL
    except OSError as exc:
        print(f"crossdiff: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
