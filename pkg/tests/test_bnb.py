import math

import numpy as np
import pytest

from ellbb import brute, instances
from ellbb.bnb import (
    Branched,
    Incumbent,
    NewIncumbent,
    Node,
    Problem,
    Pruned,
    SolveParams,
    branch,
    process_node,
    root_node,
    select_branching_variable,
    solve,
    solve_node_relaxation,
)
from ellbb.ellas import InvariantChecker, Optimal
from ellbb.instances import Instance
from ellbb.linalg import spd_sqrt_inverse
from ellbb.subproblem import ActiveSet


def explicit(c, q, a, b, lo=0.0, hi=1.0):
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    return Instance("random", "hand", c, np.asarray(q, dtype=float), np.full(n, lo), np.full(n, hi),
                    rows_a=np.atleast_2d(np.asarray(a, dtype=float)), rows_b=np.asarray(b, dtype=float))


class TestSelect:
    def test_examples(self):
        lo, hi = np.zeros(3), np.ones(3)
        assert select_branching_variable([0.0, 1.0, 0.5], lo, hi) == 2
        assert select_branching_variable([0.4, 0.45], lo[:2], hi[:2]) == 1
        assert select_branching_variable([0.0, 1.0, 1.0], lo, hi) is None

    def test_skips_fixed_and_nearly_integral(self):
        assert select_branching_variable([0.5, 0.3], [0, 0], [0, 1]) == 1
        assert select_branching_variable([1e-8, 0.0], [0, 0], [1, 1]) is None


class TestBranch:
    def test_binary_split(self):
        node = Node(np.zeros(3), np.ones(3))
        down, up = branch(node, 1, 0.5)
        np.testing.assert_array_equal(down.upper, [1, 0, 1])
        np.testing.assert_array_equal(up.lower, [0, 1, 0])
        np.testing.assert_array_equal(down.pending_branch_row[0], [0, 1, 0])
        assert down.pending_branch_row[1] == 0.0
        np.testing.assert_array_equal(up.pending_branch_row[0], [0, -1, 0])
        assert up.pending_branch_row[1] == -1.0
        assert down.depth == up.depth == 1

    def test_padded_multipliers_stay_feasible(self):
        inst = instances.gen_random_binary(10, 20, 2)
        problem = Problem.from_instance(inst)
        res, state, _ = solve_node_relaxation(problem, root_node(problem))
        assert isinstance(res, Optimal)
        i = select_branching_variable(res.x, problem.lower, problem.upper)
        assert i is not None
        for child in branch(root_node(problem), i, res.x[i], warm=state.aset):
            aset = child.warm.copy()
            aset.append(*child.pending_branch_row)
            assert aset.lam[-1] == 0.0
            assert np.linalg.norm(aset.ellipsoid_vector(state.s)) <= 1 + 1e-9

    def test_children_do_not_share_state(self):
        f = spd_sqrt_inverse(np.eye(2))
        aset = ActiveSet(np.eye(2), np.ones(2), np.ones(2), f.q_inv_half)
        down, up = branch(Node(np.zeros(2), np.ones(2)), 0, 0.5, warm=aset)
        down.warm.lam[0] = 7.0
        assert up.warm.lam[0] == 1.0 and aset.lam[0] == 1.0


class TestProcessNode:
    def test_contradictory_bounds_pruned(self):
        problem = Problem.from_instance(explicit([1.0], [[1.0]], [[1.0]], [1.0]))
        out = process_node(problem, Node(np.array([1.0]), np.array([0.0])), Incumbent())
        assert isinstance(out, Pruned) and out.reason == "infeasible"

    def test_infeasible_rows_pruned(self):
        problem = Problem.from_instance(explicit([1.0, 1.0], np.eye(2), [[-1.0, -1.0]], [-3.0]))
        out = process_node(problem, root_node(problem), Incumbent())
        assert isinstance(out, Pruned) and out.reason == "infeasible"

    def test_integral_root(self):
        inst = explicit([-2.0], [[1.0]], [[0.0]], [0.0])
        res = solve(inst)
        assert res.stats.nodes == 1
        out = process_node(Problem.from_instance(inst), root_node(Problem.from_instance(inst)), Incumbent())
        assert isinstance(out, NewIncumbent)

    def test_fractional_branches(self):
        problem = Problem.from_instance(instances.gen_random_binary(10, 20, 2))
        out = process_node(problem, root_node(problem), Incumbent())
        assert isinstance(out, Branched)
        assert all(ch.pending_branch_row is not None for ch in out.children)


class TestSolve:
    def test_toy(self):
        res = solve(explicit([-2.0], [[1.0]], [[0.0]], [0.0]))
        assert res.status == "Optimal"
        np.testing.assert_array_equal(res.x, [1.0])
        assert res.value == pytest.approx(-1.0)

    def test_infeasible(self):
        res = solve(explicit([1.0, 1.0], np.eye(2), [[1.0, 1.0], [-1.0, -1.0]], [0.5, -0.75]))
        assert res.status == "Infeasible"
        assert res.x is None

    def test_time_limit_zero(self):
        res = solve(instances.gen_random_binary(10, 20, 0), SolveParams(time_limit=0))
        assert res.status == "TimeLimit"
        assert res.stats.nodes == 0 and res.stats.bound == -math.inf

    def test_node_limit_reports_gap(self):
        inst = instances.gen_mst_complete(6, 0)
        res = solve(inst, SolveParams(node_limit=3))
        assert res.status == "TimeLimit"
        best = brute.enumerate_optimum(inst).value
        assert res.stats.bound <= best + 1e-9
        assert res.value >= best - 1e-9

    def test_general_integer_box(self):
        inst = explicit([-1.0, 0.5], [[2.0, 0.3], [0.3, 1.0]], [[1.0, 1.0]], [2.5], lo=-2.0, hi=3.0)
        res = solve(inst)
        ref = brute.enumerate_box(inst.c, inst.q, inst.lower, inst.upper, rows=(inst.rows_a, inst.rows_b))
        assert res.value == pytest.approx(ref.value, abs=1e-4)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_matches_enumeration(self, seed):
        inst = instances.gen_random_binary(12, 50 if seed % 2 else 20, seed)
        checker = InvariantChecker()
        res = solve(inst, monitor=checker)
        ref = brute.enumerate_optimum(inst)
        assert res.status == "Optimal"
        assert abs(res.value - ref.value) <= 1e-4
        assert inst.boxed_oracle().separate(res.x) is None
        assert res.stats.bound <= res.value + 1e-9
        assert checker.violations == []

    def test_warm_and_cold_agree(self):
        inst = instances.gen_tsp(6, 2)
        warm = solve(inst, SolveParams(warm_start=True))
        cold = solve(inst, SolveParams(warm_start=False))
        assert warm.value == pytest.approx(cold.value, abs=1e-4)
        assert warm.stats.ellas_iterations < cold.stats.ellas_iterations


def test_warm_children_need_fewer_iterations():
    """Re-solve every non-root node cold and compare iteration counts."""
    better = total = 0
    for seed in range(10):
        inst = instances.gen_random_binary(20, 40, seed)
        problem = Problem.from_instance(inst)
        stack = [root_node(problem)]
        incumbent = Incumbent()
        visited = 0
        while stack and visited < 40:
            node = stack.pop()
            visited += 1
            if node.depth > 0:
                _, warm_state, _ = solve_node_relaxation(problem, node, None, warm=True)
                _, cold_state, _ = solve_node_relaxation(problem, node, None, warm=False)
                total += 1
                better += warm_state.iter < cold_state.iter
            out = process_node(problem, node, incumbent)
            if isinstance(out, NewIncumbent) and out.value < incumbent.value:
                incumbent = Incumbent(out.x, out.value, "relaxation-integral")
            elif isinstance(out, Branched):
                stack.extend(reversed(out.children))
    assert total >= 50
    print(f"warm better on {better}/{total} nodes")
    assert better / total >= 0.8, f"{better}/{total}"


from hypothesis import given
from hypothesis import strategies as st


@given(st.integers(2, 7), st.integers(1, 8), st.integers(0, 2**31 - 1), st.booleans())
def test_small_instances_match_enumeration(n, m, seed, tight):
    r = np.random.default_rng(seed)
    a = r.integers(-3, 6, size=(m, n)).astype(float)
    # tight right-hand sides make infeasible instances common
    b = np.floor((0.2 if tight else 0.5) * a.sum(axis=1)) - (1.0 if tight else 0.0)
    q = instances.gen_q(n, instances.make_rng(seed))
    inst = explicit(r.uniform(-1, 1, n), q, a, b)
    res = solve(inst, SolveParams(node_limit=5000))
    ref = brute.enumerate_optimum(inst)
    if math.isinf(ref.value):
        assert res.status == "Infeasible"
    else:
        assert res.status == "Optimal"
        assert abs(res.value - ref.value) <= 1e-4
