"""Run records, benchmark manifests and performance profiles.

Runs CSV (version 1)::

    # ellbb-runs 1
    label,family,n,m,status,value,bound,time_s,nodes,iters,ps_pct,solver
    ...one row per (instance, solver)...
    # avg solver=<tag> solved=<k>/<N> time_s=... nodes=... iters=... ps_pct=...

Lines starting with ``#`` are comments; the averages block covers solved
instances only.  Profile CSV (version 1) has a ``tau`` column followed by one
column per solver holding ``rho_s(tau)``.
"""

from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .bnb import SolveParams, solve
from .instances import Instance, generate, model_row_count, read_instance

__all__ = [
    "RunRecord",
    "RUN_COLUMNS",
    "SOLVERS",
    "ManifestEntry",
    "ManifestError",
    "ProfileError",
    "parse_manifest",
    "run_instance",
    "run_bench",
    "format_runs_csv",
    "read_runs_csv",
    "averages",
    "performance_profile",
    "format_profile_csv",
    "default_tau_grid",
    "record_from_row",
]

RUNS_HEADER = "# ellbb-runs 1"
PROFILE_HEADER = "# ellbb-profile 1"
SOLVERS = {"bb-ellas": True, "bb-ellas-cold": False}  # tag -> warm start


class ManifestError(ValueError):
    pass


class ProfileError(ValueError):
    pass


@dataclass
class RunRecord:
    label: str
    family: str
    n: int
    m: int
    status: str
    value: float
    bound: float
    time_s: float
    nodes: int
    iters: int
    ps_pct: float
    solver: str = "bb-ellas"

    def csv_row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


RUN_COLUMNS = [f.name for f in fields(RunRecord)]


def run_instance(inst: Instance, solver: str = "bb-ellas", opt_tol: float = 1e-4,
                 time_limit: float | None = 60.0) -> RunRecord:
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    params = SolveParams(opt_tol=opt_tol, time_limit=time_limit, warm_start=SOLVERS[solver])
    res = solve(inst, params)
    st = res.stats
    return RunRecord(
        label=inst.label,
        family=inst.family,
        n=inst.n,
        m=model_row_count(inst),
        status=res.status,
        value=float(res.value),
        bound=float(st.bound),
        time_s=float(st.wall_time),
        nodes=st.nodes,
        iters=st.ellas_iterations,
        ps_pct=float(st.ps_pct),
        solver=solver,
    )


@dataclass
class ManifestEntry:
    family: str
    size: int | None = None
    seed: int | None = None
    m: int | None = None
    path: str | None = None

    def load(self) -> Instance:
        if self.path is not None:
            return read_instance(self.path)
        return generate(self.family, self.size, self.seed, self.m)


def _seeds(tok: str, line: int) -> list[int]:
    out = []
    for part in tok.split(","):
        mt = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not mt:
            raise ManifestError(f"line {line}: bad seed spec {tok!r}")
        lo = int(mt.group(1))
        hi = int(mt.group(2)) if mt.group(2) else lo
        if hi < lo:
            raise ManifestError(f"line {line}: empty seed range {part!r}")
        out.extend(range(lo, hi + 1))
    return out


def parse_manifest(text: str, base: Path | None = None) -> list[ManifestEntry]:
    """One entry per line: ``<family> <size> <seeds> [m=<rows>]`` or ``file <path>``.

    Seeds are ``3``, ``0-9`` or comma-separated combinations of those.
    """
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "file":
            if len(tok) != 2:
                raise ManifestError(f"line {no}: 'file' needs exactly one path")
            p = Path(tok[1])
            if base is not None and not p.is_absolute():
                p = base / p
            out.append(ManifestEntry(family="file", path=str(p)))
            continue
        if len(tok) not in (3, 4):
            raise ManifestError(f"line {no}: expected '<family> <size> <seeds> [m=<rows>]'")
        try:
            size = int(tok[1])
        except ValueError:
            raise ManifestError(f"line {no}: size must be an integer") from None
        m = None
        if len(tok) == 4:
            mt = re.fullmatch(r"m=(\d+)", tok[3])
            if not mt:
                raise ManifestError(f"line {no}: expected m=<rows>, got {tok[3]!r}")
            m = int(mt.group(1))
        if tok[0] == "random" and m is None:
            raise ManifestError(f"line {no}: family random needs m=<rows>")
        for seed in _seeds(tok[2], no):
            out.append(ManifestEntry(tok[0], size, seed, m))
    return out


def _bench_job(args) -> RunRecord:
    entry, solver, opt_tol, time_limit = args
    return run_instance(entry.load(), solver, opt_tol, time_limit)


def run_bench(entries: list[ManifestEntry], solvers=("bb-ellas", "bb-ellas-cold"),
              opt_tol: float = 1e-4, time_limit: float | None = 60.0,
              threads: int = 1, sink=None) -> list[RunRecord]:
    """Run every (instance, solver) pair; records come back in manifest order."""
    jobs = [(e, s, opt_tol, time_limit) for e in entries for s in solvers]
    records: list[RunRecord] = []
    if threads <= 1 or len(jobs) <= 1:
        results = map(_bench_job, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=threads)
        results = pool.map(_bench_job, jobs)
    for rec in results:
        records.append(rec)
        if sink is not None:
            sink(rec)
    if threads > 1 and len(jobs) > 1:
        pool.shutdown()
    return records


def averages(records: list[RunRecord]) -> list[str]:
    """Comment lines averaging time, nodes, iterations and %ps over solved runs, per solver."""
    lines = []
    tags = list(dict.fromkeys(r.solver for r in records))
    for tag in tags:
        mine = [r for r in records if r.solver == tag]
        solved = [r for r in mine if r.status == "Optimal"]
        if solved:
            avg = {k: float(np.mean([getattr(r, k) for r in solved]))
                   for k in ("time_s", "nodes", "iters", "ps_pct")}
            body = " ".join(f"{k}={v:.6g}" for k, v in avg.items())
        else:
            body = "time_s=nan nodes=nan iters=nan ps_pct=nan"
        lines.append(f"# avg solver={tag} solved={len(solved)}/{len(mine)} {body}")
    return lines


def format_runs_csv(records: list[RunRecord], summary: bool = True) -> str:
    buf = io.StringIO()
    buf.write(RUNS_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in records:
        w.writerow(r.csv_row())
    if summary:
        for line in averages(records):
            buf.write(line + "\n")
    return buf.getvalue()


def _data_lines(text: str) -> list[str]:
    return [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def read_runs_csv(text: str) -> list[dict]:
    """Rows of a runs CSV as dicts (comment lines skipped)."""
    lines = _data_lines(text)
    if not lines:
        raise ProfileError("runs CSV has no header row")
    reader = csv.DictReader(lines)
    return list(reader)


def default_tau_grid() -> list[float]:
    return [float(2**k) for k in range(11)]


def performance_profile(rows: list[dict], taus=None) -> tuple[list[str], list[tuple[float, list[float]]]]:
    """``rho_s(tau)`` for each solver.

    ``r_{p,s} = t_{p,s} / min_s' t_{p,s'}`` over solved runs; a run that is not
    ``Optimal`` (or is missing) has ``r = inf`` and is never counted.
    """
    taus = default_tau_grid() if taus is None else [float(t) for t in taus]
    if not rows:
        return [], [(t, []) for t in taus]
    missing = {"label", "status", "time_s"} - set(rows[0].keys())
    if missing:
        raise ProfileError(f"runs CSV is missing column(s): {', '.join(sorted(missing))}")
    times: dict[str, dict[str, float]] = {}
    solvers: list[str] = []
    for row in rows:
        tag = row.get("solver") or "solver"
        if tag not in solvers:
            solvers.append(tag)
        try:
            t = float(row["time_s"])
        except (TypeError, ValueError):
            raise ProfileError(f"bad time_s value {row['time_s']!r}") from None
        solved = row["status"] == "Optimal" and math.isfinite(t) and t >= 0.0
        times.setdefault(row["label"], {})[tag] = t if solved else math.inf
    ratios = {s: [] for s in solvers}
    for per in times.values():
        best = min(per.values(), default=math.inf)
        for s in solvers:
            t = per.get(s, math.inf)
            if not math.isfinite(t):
                r = math.inf
            elif best == 0.0:
                r = 1.0 if t == 0.0 else math.inf
            else:
                r = t / best
            ratios[s].append(r)
    n_prob = len(times)
    points = []
    for tau in taus:
        points.append((tau, [sum(r <= tau for r in ratios[s]) / n_prob for s in solvers]))
    return solvers, points


def format_profile_csv(solvers: list[str], points) -> str:
    buf = io.StringIO()
    buf.write(PROFILE_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", *solvers])
    for tau, rhos in points:
        w.writerow([repr(tau), *(repr(float(r)) for r in rhos)])
    return buf.getvalue()


def record_from_row(row: dict) -> RunRecord:
    kw = {}
    for f in fields(RunRecord):
        v = row[f.name]
        kw[f.name] = int(v) if f.type == "int" else float(v) if f.type == "float" else v
    return RunRecord(**kw)
