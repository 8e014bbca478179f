"""Acceptance criteria 1-9, one test each, each printing a PASS/FAIL line.

Run directly for just the report::

    python tests/test_acceptance.py
"""

import functools
import math
import sys
import time
import warnings

import numpy as np
import pytest

from ellbb import brute, instances, subproblem
from ellbb.bnb import SolveParams, solve
from ellbb.ellas import InvariantChecker
from ellbb.linalg import CorruptedPseudoInverse, PseudoInverse, moore_penrose_residuals, pinv_append_row, pinv_delete_row, pinv_full
from ellbb.runs import performance_profile

OPT_TOL = 1e-4
COMBINATORIAL = [("grid-sp", (3, 4, 5)), ("assignment", (6, 8)), ("mst", (5, 6, 7)), ("tsp", (6, 7, 8))]
SEEDS_PER_SIZE = 10
# soft criterion: iterations per node, one order of magnitude above the reference ratio of about 6.4
WARM_RATIO_LIMIT = 25.0


REPORT_LINES: list[str] = []


def report(k, ok, detail, soft=False):
    """Record the criterion line; conftest prints them in the terminal summary."""
    tag = "PASS" if ok else ("WARN" if soft else "FAIL")
    line = f"CRITERION {k}: {tag} - {detail}"
    REPORT_LINES.append(line)
    print(line)
    return line


def criterion1_instances():
    """50 seeded instances cycling through n in {8,10,12} and m in {20,50}."""
    out = []
    for k in range(50):
        n = (8, 10, 12)[k % 3]
        m = (20, 50)[(k // 3) % 2]
        out.append(instances.gen_random_binary(n, m, k))
    return out


class CountingDelete:
    """Wraps the row-deletion update to count corrupted-state signals."""

    def __init__(self, fn):
        self.fn = fn
        self.raised = 0

    def __call__(self, p, r):
        try:
            return self.fn(p, r)
        except CorruptedPseudoInverse:
            self.raised += 1
            raise


@functools.lru_cache(maxsize=None)
def campaign():
    """Solve every criterion-1 and criterion-2 instance once under one invariant monitor."""
    checker = InvariantChecker()
    counting = CountingDelete(subproblem.pinv_delete_row)
    subproblem.pinv_delete_row = counting
    t0 = time.perf_counter()
    try:
        random_runs = []
        for inst in criterion1_instances():
            res = solve(inst, SolveParams(opt_tol=OPT_TOL, capture_node_log=True), monitor=checker)
            random_runs.append((inst, res))
        corrupt_before = counting.raised
        combo_runs = []
        for family, sizes in COMBINATORIAL:
            for size in sizes:
                for seed in range(SEEDS_PER_SIZE):
                    inst = instances.generate(family, size, seed)
                    combo_runs.append((inst, solve(inst, SolveParams(opt_tol=OPT_TOL), monitor=checker)))
        corrupt_combo = counting.raised - corrupt_before
    finally:
        subproblem.pinv_delete_row = counting.fn
    return {
        "checker": checker,
        "random": random_runs,
        "combo": combo_runs,
        "corrupt_combo": corrupt_combo,
        "seconds": time.perf_counter() - t0,
    }


def _violations(checker, *needles):
    return [v for v in checker.violations if any(nd in v for nd in needles)]


def test_criterion_1_random_binary_matches_enumeration():
    runs = campaign()["random"]
    bad = []
    for inst, res in runs:
        ref = brute.enumerate_optimum(inst)
        if res.status != "Optimal" or abs(res.value - ref.value) > OPT_TOL:
            bad.append((inst.label, res.status, res.value, ref.value))
    ok = not bad and len(runs) == 50
    report(1, ok, f"{len(runs) - len(bad)}/{len(runs)} random binary instances within {OPT_TOL} of enumeration")
    assert ok, bad[:5]


def test_criterion_2_combinatorial_families_match_enumeration():
    runs = campaign()["combo"]
    bad = []
    for inst, res in runs:
        ref = brute.enumerate_optimum(inst)
        feasible = res.x is not None and inst.oracle().separate(res.x) is None
        if res.status != "Optimal" or not feasible or abs(res.value - ref.value) > OPT_TOL:
            bad.append((inst.label, res.status, res.value, ref.value))
    ok = not bad and len(runs) == SEEDS_PER_SIZE * sum(len(s) for _, s in COMBINATORIAL)
    report(2, ok, f"{len(runs) - len(bad)}/{len(runs)} grid-sp/assignment/mst/tsp instances match enumeration")
    assert ok, bad[:5]


def test_criterion_3_strong_duality_at_every_optimal_relaxation():
    checker = campaign()["checker"]
    bad = _violations(checker, "duality gap", "rejected by the oracle", "at optimality")
    enough = checker.optimal_terminations >= 10_000
    ok = not bad and enough
    report(3, ok, f"{checker.optimal_terminations} optimal relaxations, max relative gap {checker.max_gap:.2e}, "
                  f"{len(bad)} violations")
    assert enough, checker.optimal_terminations
    assert not bad, bad[:5]


def test_criterion_4_active_set_size():
    checker = campaign()["checker"]
    bad = _violations(checker, "active set size")
    ok = not bad and checker.iterations > 0
    report(4, ok, f"m <= n+1 on {checker.iterations} iterations and m <= n at every optimum; {len(bad)} violations")
    assert ok, bad[:5]


def test_criterion_5_lexicographic_ascent():
    checker = campaign()["checker"]
    bad = _violations(checker, "lexicographic")
    ok = not bad
    report(5, ok, f"ascent checked on {checker.iterations} iterations; {len(bad)} violations")
    assert ok, bad[:5]


def test_criterion_6_pseudo_inverse_robustness():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 41))
        m_max = int(rng.integers(1, min(n, 30) + 1))
        p = pinv_full(rng.standard_normal((1, n)))
        for _ in range(int(rng.integers(5, 31))):
            if p.rows == 0 or (p.rows < m_max and rng.random() < 0.55):
                res = pinv_append_row(p, rng.standard_normal(n))
                if isinstance(res, PseudoInverse):
                    p = res
            else:
                p = pinv_delete_row(p, int(rng.integers(p.rows)))
            scale = 1.0 + (np.linalg.norm(p.of, 2) if p.rows else 0.0)
            worst = max(worst, max(moore_penrose_residuals(p.of, p.pinv)) / scale)
    corrupt = campaign()["corrupt_combo"]
    ok = worst <= 1e-7 and corrupt == 0
    report(6, ok, f"worst scaled Moore-Penrose residual {worst:.2e} over 1000 sequences; "
                  f"{corrupt} corrupted-state signals in criterion-2 solves")
    assert worst <= 1e-7
    assert corrupt == 0


def test_criterion_7_warm_start_iterations_per_node():
    nodes = iters = 0
    for seed in range(10):
        res = solve(instances.gen_random_binary(25, 1000, seed), SolveParams(opt_tol=OPT_TOL))
        nodes += res.stats.nodes
        iters += res.stats.ellas_iterations
    ratio = iters / nodes
    ok = ratio <= WARM_RATIO_LIMIT
    report(7, ok, f"iterations/nodes = {ratio:.2f} ({iters}/{nodes}); reference ratio about 6.4", soft=True)
    if not ok:
        warnings.warn(f"warm-start ratio {ratio:.2f} above {WARM_RATIO_LIMIT}")


def test_criterion_8_performance_profile_fixture():
    rows = [
        {"label": "p1", "solver": "A", "status": "Optimal", "time_s": "1"},
        {"label": "p1", "solver": "B", "status": "Optimal", "time_s": "2"},
        {"label": "p2", "solver": "A", "status": "Optimal", "time_s": "2"},
        {"label": "p2", "solver": "B", "status": "Optimal", "time_s": "1"},
    ]
    solvers, points = performance_profile(rows, [1, 2])
    got = {tau: dict(zip(solvers, rho)) for tau, rho in points}
    ok = got == {1.0: {"A": 0.5, "B": 0.5}, 2.0: {"A": 1.0, "B": 1.0}}
    report(8, ok, f"rho(1) = {got[1.0]}, rho(2) = {got[2.0]}")
    assert ok


def test_criterion_9_every_dual_value_is_a_valid_node_bound():
    checked = nodes = 0
    bad = []
    for inst, res in campaign()["random"]:
        pts = brute.binary_points(inst.n)
        pts = pts[np.all(pts @ inst.rows_a.T <= inst.rows_b + 1e-9, axis=1)]
        vals = pts @ inst.c + np.sqrt(np.einsum("ij,jk,ik->i", pts, inst.q, pts))
        for entry in res.node_log:
            nodes += 1
            inside = np.all((pts >= entry.lower) & (pts <= entry.upper), axis=1)
            best = vals[inside].min() if inside.any() else math.inf
            for v in entry.dual_values:
                checked += 1
                if v > best + 1e-7 * (1 + abs(best)):
                    bad.append((inst.label, entry.node_id, v, best))
    ok = not bad and checked > 0
    report(9, ok, f"{checked} dual values at {nodes} nodes checked against box-restricted enumeration; "
                  f"{len(bad)} exceed it")
    assert ok, bad[:5]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
