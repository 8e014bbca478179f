"""Command-line front end.

    ellbb gen FAMILY SIZE [--m ROWS] [--seed S] [-o PATH]
    ellbb solve INSTANCE [--tol T] [--time-limit S] [--verify] [--warm|--cold]
    ellbb bench MANIFEST [-o RUNS.csv] [--tol T] [--time-limit S] [--threads K]
    ellbb profile RUNS.csv [-o PROFILE.csv] [--tau 1,2,4,...]

Exit codes of ``solve``: 0 optimal, 10 infeasible, 11 time limit,
12 verification mismatch.  Any command exits with 1 on unreadable or
malformed input.  ``ELLBB_OUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import __version__
from .bnb import SolveParams, solve
from .brute import enumerate_optimum
from .instances import FAMILIES, InstanceFormatError, generate, model_row_count, read_instance, write_instance
from .linalg import LinalgError
from .runs import (
    RUN_COLUMNS,
    SOLVERS,
    ManifestError,
    ProfileError,
    RunRecord,
    format_profile_csv,
    format_runs_csv,
    parse_manifest,
    performance_profile,
    read_runs_csv,
    run_bench,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 10
EXIT_TIME_LIMIT = 11
EXIT_VERIFY = 12
VERIFY_MAX_N = 20
DEFAULT_TIME_LIMIT = 60.0
OUT_DIR_ENV = "ELLBB_OUT_DIR"

STATUS_EXIT = {"Optimal": EXIT_OK, "Infeasible": EXIT_INFEASIBLE, "TimeLimit": EXIT_TIME_LIMIT}


def _out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def _err(msg: str) -> None:
    print(f"ellbb: {msg}", file=sys.stderr)


def _time_limit(value: float | None) -> float | None:
    if value is None or value < 0 or math.isinf(value):
        return None
    return value


def cmd_gen(args) -> int:
    try:
        inst = generate(args.family, args.size, args.seed, args.m)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT
    path = Path(args.output) if args.output else _out_dir() / f"{inst.label}.inst"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_instance(path, inst)
    print(f"{inst.label} n={inst.n} m={model_row_count(inst)} -> {path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        inst = read_instance(args.instance)
    except (OSError, InstanceFormatError, LinalgError) as exc:
        _err(f"cannot read {args.instance}: {exc}")
        return EXIT_INPUT
    solver = "bb-ellas-cold" if args.cold else "bb-ellas"
    params = SolveParams(opt_tol=args.tol, time_limit=_time_limit(args.time_limit),
                         warm_start=not args.cold)
    res = solve(inst, params)
    st = res.stats
    rec = RunRecord(inst.label, inst.family, inst.n, model_row_count(inst), res.status,
                    float(res.value), float(st.bound), float(st.wall_time), st.nodes,
                    st.ellas_iterations, float(st.ps_pct), solver)
    print(f"instance  {inst.label} (n={inst.n}, m={rec.m})", file=sys.stderr)
    print(f"status    {res.status}", file=sys.stderr)
    print(f"value     {res.value:.10g}   bound {st.bound:.10g}", file=sys.stderr)
    print(f"nodes     {st.nodes}   iterations {st.ellas_iterations}   "
          f"%ps {st.ps_pct:.2f}   time {st.wall_time:.3f}s", file=sys.stderr)
    if res.x is not None:
        print("x         " + " ".join(str(int(v)) for v in res.x), file=sys.stderr)
    print(",".join(RUN_COLUMNS))
    print(",".join(rec.csv_row()))
    code = STATUS_EXIT[res.status]
    if args.verify:
        if inst.n > VERIFY_MAX_N:
            _err(f"--verify skipped: n={inst.n} exceeds {VERIFY_MAX_N}")
        else:
            ref = enumerate_optimum(inst)
            ok = _verify(res, st, ref.value, args.tol)
            print(f"verify    enumeration {ref.value:.10g} over {ref.count} points: "
                  f"{'ok' if ok else 'MISMATCH'}", file=sys.stderr)
            if not ok:
                _err(f"verification failed: solver {res.status} {res.value!r}, enumeration {ref.value!r}")
                return EXIT_VERIFY
    return code


def _verify(res, stats, best: float, tol: float) -> bool:
    slack = 1e-6
    if res.status == "Infeasible":
        return math.isinf(best)
    if res.status == "Optimal":
        return math.isfinite(best) and abs(res.value - best) <= tol + slack
    # time limit: the incumbent cannot beat the optimum, the bound cannot exceed it
    return res.value >= best - slack and stats.bound <= best + slack


def cmd_bench(args) -> int:
    try:
        path = Path(args.manifest)
        entries = parse_manifest(path.read_text(encoding="utf-8"), base=path.parent)
    except (OSError, ManifestError) as exc:
        _err(f"cannot read manifest: {exc}")
        return EXIT_INPUT
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    unknown = [s for s in solvers if s not in SOLVERS]
    if unknown:
        _err(f"unknown solver(s): {', '.join(unknown)}; choose from {', '.join(SOLVERS)}")
        return EXIT_INPUT

    def progress(rec: RunRecord) -> None:
        print(f"{rec.label:<28} {rec.solver:<14} {rec.status:<10} {rec.value:.8g} "
              f"{rec.time_s:.3f}s", file=sys.stderr)

    try:
        records = run_bench(entries, solvers, args.tol, _time_limit(args.time_limit),
                            args.threads, sink=progress)
    except (OSError, InstanceFormatError, LinalgError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    out = Path(args.output) if args.output else _out_dir() / "runs.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(format_runs_csv(records), encoding="utf-8")
    print(f"{len(records)} runs -> {out}")
    return EXIT_OK


def cmd_profile(args) -> int:
    try:
        rows = read_runs_csv(Path(args.runs).read_text(encoding="utf-8"))
        taus = None
        if args.tau:
            taus = [float(t) for t in args.tau.split(",")]
            if any(t < 1.0 for t in taus):
                raise ProfileError("tau values must be >= 1")
        solvers, points = performance_profile(rows, taus)
    except (OSError, ProfileError, ValueError) as exc:
        _err(f"cannot build profile: {exc}")
        return EXIT_INPUT
    text = format_profile_csv(solvers, points)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"profile for {len(solvers)} solver(s) -> {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ellbb", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded instance file")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("size", type=int, help="n (random), r (grid families) or |V|")
    g.add_argument("--m", type=int, default=None, help="number of rows (random family)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--tol", type=float, default=1e-4, help="absolute optimality tolerance")
    s.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT,
                   help="seconds; negative means no limit")
    s.add_argument("--verify", action="store_true", help=f"check against enumeration (n <= {VERIFY_MAX_N})")
    s.add_argument("--cold", action="store_true", help="disable warm starts")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark manifest")
    b.add_argument("manifest")
    b.add_argument("-o", "--output", default=None)
    b.add_argument("--tol", type=float, default=1e-4)
    b.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--solvers", default="bb-ellas,bb-ellas-cold")
    b.set_defaults(func=cmd_bench)

    f = sub.add_parser("profile", help="performance profile from a runs CSV")
    f.add_argument("runs")
    f.add_argument("-o", "--output", default=None)
    f.add_argument("--tau", default=None, help="comma-separated tau grid (default 1,2,4,...,1024)")
    f.set_defaults(func=cmd_profile)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
