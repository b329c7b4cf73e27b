"""Command-line front end.

    hjgeo run <file|name> [--out DIR] [--format json|csv] [--tol X] [--seed N]
    hjgeo run --all [--jobs N] ...
    hjgeo list-scenarios [--kind K] [--dir DIR]
    hjgeo flow <file|name> --tmax T --h H [--out FILE]

Exit codes: 0 pass, 1 suite failure, 2 invalid scenario, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, dynamics, scenario as scn, suites
from .nonholonomic import GammaOffConstraintError
from .submanifold import SubmanifoldError

EXIT_PASS, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3

NUMERIC_ERRORS = (ArithmeticError, np.linalg.LinAlgError, SubmanifoldError)


def _error(msg: str) -> None:
    print(f"hjgeo: {msg}", file=sys.stderr)


def _load(ref: str) -> scn.Scenario:
    try:
        path = scn.resolve(ref)
    except FileNotFoundError:
        raise scn.ScenarioError("$", f"no such scenario file or bundled name: {ref}") from None
    return scn.load(path)


def write_report(report: suites.Report, out: Path, fmt: str, wall_time: float | None = None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        target = out / f"{report.scenario}.report.json"
        target.write_text(json.dumps(report.to_dict(wall_time), indent=2) + "\n")
    else:
        target = out / f"{report.scenario}.report.csv"
        with target.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "verdict", "quantity", "value"])
            w.writerows(report.rows())
            w.writerow(["suite", "pass" if report.verdict else "fail", "verdict", ""])
    for key, traj in sorted(report.trajectories.items()):
        with (out / f"{report.scenario}.{key}.csv").open("w", newline="") as fh:
            traj.write_csv(fh)
    return target


def _summary(report: suites.Report) -> str:
    lines = [f"{report.scenario} ({report.kind}): {'PASS' if report.verdict else 'FAIL'}"]
    for c in report.checks:
        nums = [f"{k}={v:.3g}" for k, v in c.values.items() if isinstance(v, float)]
        lines.append(f"  [{'pass' if c.verdict else 'FAIL'}] {c.id}  " + " ".join(nums[:4]))
    return "\n".join(lines)


def run_one(ref: str, out: str, fmt: str, tol: float | None, seed: int | None,
            timing: bool = False) -> tuple[int, str, str]:
    """Run one scenario; returns (exit code, stdout text, stderr text)."""
    try:
        sc = _load(ref)
    except scn.ScenarioError as exc:
        return EXIT_INVALID, "", f"invalid scenario {ref}: {exc}"
    start = time.perf_counter()
    try:
        report = suites.run_scenario(sc, tol=tol, seed=seed)
    except GammaOffConstraintError as exc:
        field = "$.W" if sc.get("W") is not None else "$.gamma"
        return EXIT_INVALID, "", f"invalid scenario {sc.name}: {field}: {exc}"
    except NUMERIC_ERRORS as exc:
        return EXIT_NUMERIC, "", f"numerical failure in {sc.name}: {type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    target = write_report(report, Path(out), fmt, elapsed if timing else None)
    text = _summary(report) + f"\n  report: {target}"
    return (EXIT_PASS if report.verdict else EXIT_FAIL), text, ""


def _star(args):
    return run_one(*args)


def cmd_run(args) -> int:
    if args.all == bool(args.scenario):
        _error("run needs exactly one of <scenario> or --all")
        return EXIT_INVALID
    refs = [str(p) for p in scn.bundled_paths()] if args.all else [args.scenario]
    jobs = [(r, args.out, args.format, args.tol, args.seed, args.timing) for r in refs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_star, jobs))
    else:
        results = [run_one(*j) for j in jobs]
    for code, text, err in results:
        if text:
            print(text)
        if err:
            _error(err)
    codes = [c for c, _, _ in results]
    # most severe outcome wins: numerical > invalid > fail > pass
    for code in (EXIT_NUMERIC, EXIT_INVALID, EXIT_FAIL):
        if code in codes:
            return code
    return EXIT_PASS


def cmd_list(args) -> int:
    if args.dir:
        folder = Path(args.dir)
        if not folder.is_dir():
            _error(f"not a directory: {folder}")
            return EXIT_INVALID
        paths = sorted(folder.glob("*.json"))
    else:
        paths = scn.bundled_paths()
    rows = []
    for path in paths:
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            continue
        if not isinstance(data, dict):
            continue
        if args.kind and data.get("kind") != args.kind:
            continue
        rows.append((data.get("name", path.stem), data.get("kind", "?"), data.get("description", "")))
    w1 = max([len("name")] + [len(r[0]) for r in rows])
    w2 = max([len("kind")] + [len(r[1]) for r in rows])
    print(f"{'name':<{w1}}  {'kind':<{w2}}  description")
    for name, kind, desc in rows:
        print(f"{name:<{w1}}  {kind:<{w2}}  {desc}")
    return EXIT_PASS


def cmd_flow(args) -> int:
    try:
        sc = _load(args.scenario)
        field = suites.phase_field_for(sc)
        x0, t0 = suites.initial_state(sc)
    except scn.ScenarioError as exc:
        _error(f"invalid scenario {args.scenario}: {exc}")
        return EXIT_INVALID
    except ValueError as exc:
        _error(f"invalid scenario {args.scenario}: $.flow: {exc}")
        return EXIT_INVALID
    if not (args.h > 0 and args.tmax >= 0):
        _error("--h must be positive and --tmax nonnegative")
        return EXIT_INVALID
    steps = int(round(args.tmax / args.h))
    try:
        traj = dynamics.flow(field, x0, t0, args.h, steps, backend=args.backend)
    except NUMERIC_ERRORS as exc:
        _error(f"numerical failure: {exc}")
        return EXIT_NUMERIC
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            traj.write_csv(fh)
    else:
        traj.write_csv(sys.stdout)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hjgeo", description="Geometric Hamilton-Jacobi verification suites.")
    ap.add_argument("--version", action="version", version=f"hjgeo {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the verification suite of a scenario")
    r.add_argument("scenario", nargs="?", help="scenario file or bundled scenario name")
    r.add_argument("--all", action="store_true", help="run every bundled scenario")
    r.add_argument("--out", default=".", help="output directory (default: current)")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--tol", type=float, help="override the scenario residual tolerance")
    r.add_argument("--seed", type=int, help="override the sampling seed")
    r.add_argument("--timing", action="store_true", help="record wall time in the report")
    r.add_argument("--jobs", type=int, default=1, help="parallel workers for --all")
    r.set_defaults(func=cmd_run)

    ls = sub.add_parser("list-scenarios", help="list bundled scenarios")
    ls.add_argument("--kind", choices=scn.KINDS)
    ls.add_argument("--dir", help="list scenario files in DIR instead of the bundled set")
    ls.set_defaults(func=cmd_list)

    f = sub.add_parser("flow", help="dump the phase-space trajectory of a scenario as CSV")
    f.add_argument("scenario")
    f.add_argument("--tmax", type=float, required=True)
    f.add_argument("--h", type=float, required=True)
    f.add_argument("--out", help="CSV file (default: stdout)")
    f.add_argument("--backend", choices=("numpy", "numba"))
    f.set_defaults(func=cmd_flow)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
