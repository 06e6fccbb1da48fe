"""Command-line front end: ``nonlocal-isaacs {solve,check,rates} --config run.yaml``.

Exit codes: 0 success, 2 configuration or I/O error, 3 solver failure,
4 a property suite or rate study failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import Coupling, consistency_order, refinement_study, truncation_distance
from .checks import run_checks
from .config import RunConfig
from .errors import CFLViolation, ConfigurationError, NonlocalIsaacsError
from .stepper import Scheme, stability_bound

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_FAILED = 0, 2, 3, 4


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(out: Path, files: dict[str, str]):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


# ---------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig) -> tuple[int, dict[str, str]]:
    problem = cfg.build_problem()
    grid = cfg.build_grid(problem)
    scheme = Scheme(problem, grid, cfg.scheme, threads=cfg.threads)
    fld = scheme.solve()
    fld.check_finite()
    bound = stability_bound(problem, grid)
    sup = np.max(np.abs(fld.values), axis=1)
    excess = float(np.max(sup - bound))
    ok = excess <= 10 * cfg.scheme.fixed_point_tol
    buf = io.StringIO()
    rows = fld.table()
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(grid.dim)] + ["value"])
    np.savetxt(buf, rows, fmt="%.17g", delimiter=",", header=header, comments="")
    summary = _csv([
        ["key", "value"],
        ["problem", problem.name],
        ["dx", grid.dx], ["dt", grid.dt], ["steps", grid.steps], ["delta", scheme.delta],
        ["final_linf", float(sup[-1])],
        ["stability_bound", float(bound[-1])],
        ["stability_excess", excess],
        ["stability_ok", ok],
    ])
    print(f"solved {problem.name}: final sup norm {sup[-1]:.6g}, stability {'ok' if ok else 'VIOLATED'}")
    return (EXIT_OK if ok else EXIT_FAILED), {"solution.csv": buf.getvalue(), "summary.csv": summary}


def cmd_check(cfg: RunConfig, levels: int | None = None, stencil_hook=None) -> tuple[int, dict[str, str]]:
    problem = cfg.build_problem()
    grid = cfg.build_grid(problem)
    results = run_checks(problem, grid, cfg.scheme, pairs=cfg.checks.pairs, seed=cfg.seed,
                         threads=cfg.threads, levels=levels or cfg.study.levels,
                         partition_samples=cfg.checks.partition_samples,
                         stencil_samples=cfg.checks.stencil_samples, stencil_hook=stencil_hook)
    rows = [["suite", "passed", "value", "threshold", "detail"]]
    for r in results:
        rows.append([r.name, r.passed, r.value, r.threshold, r.detail])
        print(r.line())
    status = EXIT_OK if all(r.passed for r in results) else EXIT_FAILED
    return status, {"check_report.csv": _csv(rows)}


def cmd_rates(cfg: RunConfig, levels: int | None = None) -> tuple[int, dict[str, str]]:
    problem = cfg.build_problem()
    grid = cfg.build_grid(problem)
    st = cfg.study
    levels = levels or st.levels
    files: dict[str, str] = {}
    text: list[str] = []
    passed = True
    if "refinement" in st.modes:
        coupling = Coupling(dt_factor=st.dt_factor, dt_power=st.dt_power, delta_rule=st.delta_rule,
                            delta_factor=st.delta_factor, delta_power=st.delta_power,
                            theta=cfg.scheme.theta, vartheta=cfg.scheme.vartheta,
                            diffusion_correction=cfg.scheme.diffusion_correction,
                            fixed_point_tol=cfg.scheme.fixed_point_tol)
        rep = refinement_study(problem, st.base_dx or grid.dx, levels, coupling,
                               box_radius=grid.box_radius, reference=st.reference,
                               reference_factor=st.reference_factor, threads=cfg.threads,
                               box_check=st.box_check, extension=grid.extension)
        files["rates.csv"] = rep.to_csv()
        text.append(rep.table())
        passed &= rep.passed
    if "truncation" in st.modes:
        # default sweep: dx, 2dx, 4dx, ... capped at one
        deltas = st.deltas or tuple(sorted({min(1.0, grid.dx * 2.0**k) for k in range(levels + 1)}))
        rep = truncation_distance(problem, deltas, grid, theta=cfg.scheme.theta,
                                  vartheta=cfg.scheme.vartheta, threads=cfg.threads)
        files["truncation.csv"] = rep.to_csv()
        text.append(rep.table())
        passed &= rep.passed
    if "consistency" in st.modes:
        rows = [["ingredient", "sigma", "slope", "expected", "passed"]]
        lines = []
        for name in st.ingredients:
            res = consistency_order(name, problem.sigma)
            ok = res.within()
            rows.append([name, res.sigma, res.slope, res.expected, ok])
            lines.append(f"consistency {name}: slope {res.slope:.4f} vs {res.expected:.4f}: "
                         f"{'PASS' if ok else 'FAIL'}")
            passed &= ok
        text.append("\n".join(lines))
        files["consistency.csv"] = _csv(rows)
    files["rates.txt"] = "\n\n".join(text) + "\n"
    print(files["rates.txt"], end="")
    return (EXIT_OK if passed else EXIT_FAILED), files


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "rates": cmd_rates}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocal-isaacs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        p.add_argument("--threads", type=int, help="worker threads for stencil assembly")
        p.add_argument("--level-count", type=int, help="number of refinement levels")
        p.add_argument("--seed", type=int, help="seed for sampling-based checks")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        changes = {}
        if args.threads is not None:
            changes["threads"] = args.threads
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out is not None:
            changes["output_dir"] = str(args.out)
        if changes:
            cfg = replace(cfg, **changes)
            cfg.validate()
        if args.level_count is not None and args.level_count < 3:
            raise ConfigurationError("--level-count must be at least 3")
    except (OSError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "solve":
            status, files = cmd_solve(cfg)
        else:
            status, files = COMMANDS[args.command](cfg, args.level_count)
    except CFLViolation as exc:
        print(f"configuration rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonlocalIsaacsError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    try:
        _write(Path(cfg.output_dir), files)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return status


if __name__ == "__main__":
    sys.exit(main())
