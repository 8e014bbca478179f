import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ellbb import brute
from ellbb.instances import assignment_model, complete_model, grid_model, grid_sp_model
from ellbb.oracles import (
    BoxedOracle,
    ExplicitRowsOracle,
    GraphOracle,
    check_membership,
    separate_explicit,
    separate_graph_equalities,
    separate_mst_subtour,
    separate_tsp_cut,
)


def indicator(model, pairs):
    x = np.zeros(model.n_edges)
    for u, v in pairs:
        for e, (a, b) in enumerate(model.edges):
            if {a, b} == {u, v}:
                x[e] = 1.0
    return x


def subsets(nv):
    for k in range(1, nv + 1):
        for sub in itertools.combinations(range(nv), k):
            mask = np.zeros(nv, dtype=bool)
            mask[list(sub)] = True
            yield mask


def max_subtour_violation(model, x):
    """Exhaustive-subset separator, kept out of the package on purpose."""
    return max(x[model.edges_within(m)].sum() - (m.sum() - 1) for m in subsets(model.n_vertices))


def min_cut_weight(model, x):
    return min(x[model.edges_across(m)].sum() for m in subsets(model.n_vertices) if not m.all())


class TestExplicit:
    def test_feasible(self):
        assert separate_explicit([[1.0]], [1.0], [0.5]) is None

    def test_most_violated(self):
        cut = separate_explicit([[1.0, 1.0], [1.0, 0.0]], [1.0, 0.2], [0.9, 0.9])
        np.testing.assert_array_equal(cut.a, [1.0, 1.0])
        assert cut.b == 1.0 and cut.violation == pytest.approx(0.8)

    def test_ten_thousand_rows_match_scan(self, rng):
        a = rng.standard_normal((10_000, 6))
        b = rng.standard_normal(10_000)
        x = rng.standard_normal(6)
        cut = separate_explicit(a, b, x)
        viol = a @ x - b
        assert cut.violation == pytest.approx(viol.max())
        np.testing.assert_array_equal(cut.a, a[int(np.argmax(viol))])


class TestEqualities:
    def test_grid_source_row(self):
        model = grid_sp_model(2)
        cut = separate_graph_equalities(model, np.zeros(4))
        assert cut.violation == pytest.approx(1.0)
        assert cut.b == -1.0
        # -(out-flow of s) <= -1
        np.testing.assert_array_equal(cut.a, -model.incidence()[0])

    def test_assignment_matching_feasible(self):
        model = assignment_model(4)
        assert separate_graph_equalities(model, indicator(model, [(0, 2), (1, 3)])) is None

    def test_tsp_tour_degrees(self):
        model = complete_model("tsp", 4)
        assert separate_graph_equalities(model, indicator(model, [(0, 1), (1, 2), (2, 3), (3, 0)])) is None


class TestSubtour:
    def test_spanning_tree(self):
        model = complete_model("mst", 4)
        assert separate_mst_subtour(model, indicator(model, [(0, 1), (1, 2), (1, 3)])) is None

    def test_triangle(self):
        model = complete_model("mst", 4)
        cut = separate_mst_subtour(model, indicator(model, [(0, 1), (1, 2), (0, 2)]))
        assert cut.violation == pytest.approx(1.0)
        assert cut.b == 2.0
        np.testing.assert_array_equal(cut.a, indicator(model, [(0, 1), (1, 2), (0, 2)]))

    @given(st.integers(0, 2**31 - 1))
    def test_matches_subset_enumeration_on_k7(self, seed):
        model = complete_model("mst", 7)
        r = np.random.default_rng(seed)
        x = r.uniform(0, 1, model.n_edges) * (r.random(model.n_edges) < 0.5)
        ref = max_subtour_violation(model, x)
        cut = separate_mst_subtour(model, x)
        if ref > 1e-6:
            assert cut is not None
            assert cut.violation == pytest.approx(ref, abs=1e-7)
            assert cut.a @ x - cut.b == pytest.approx(cut.violation, abs=1e-12)
        else:
            assert cut is None

    def test_grid_graph(self):
        model = grid_model("mst-grid", 3)
        r = np.random.default_rng(5)
        for _ in range(20):
            x = r.uniform(0, 1, model.n_edges)
            cut = separate_mst_subtour(model, x)
            ref = max_subtour_violation(model, x)
            assert (cut is None) == (ref <= 1e-6)
            if cut is not None:
                assert cut.violation == pytest.approx(ref, abs=1e-7)


class TestTspCut:
    def test_tour_feasible(self):
        model = complete_model("tsp", 5)
        assert separate_tsp_cut(model, indicator(model, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])) is None

    def test_two_triangles(self):
        model = complete_model("tsp", 6)
        x = indicator(model, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
        cut = separate_tsp_cut(model, x)
        assert cut.violation == pytest.approx(2.0)
        assert cut.b == -2.0
        side = {0, 1, 2}
        expect = np.array([-1.0 if ((u in side) != (v in side)) else 0.0 for u, v in model.edges])
        np.testing.assert_array_equal(cut.a, expect)

    @given(st.integers(0, 2**31 - 1))
    def test_min_cut_matches_enumeration_on_k8(self, seed):
        model = complete_model("tsp", 8)
        x = np.random.default_rng(seed).uniform(0, 0.3, model.n_edges)
        ref = min_cut_weight(model, x)
        cut = separate_tsp_cut(model, x)
        if ref < 2 - 1e-6:
            assert cut.violation == pytest.approx(2 - ref, abs=1e-7)
        else:
            assert cut is None


class TestValidity:
    """No separator may cut off an integer point of the model."""

    @pytest.mark.parametrize("kind,size,objects", [
        ("grid-sp", 4, lambda m: brute.grid_paths(4, m.edges)),
        ("assignment", 8, lambda m: brute.perfect_matchings(4, m.edges)),
        ("mst", 6, lambda m: brute.spanning_trees(6, m.edges)),
        ("tsp", 7, lambda m: brute.tours(7, m.edges)),
    ])
    def test_integer_points_accepted(self, kind, size, objects):
        model = {"grid-sp": grid_sp_model, "assignment": assignment_model}.get(kind)
        model = model(size) if model else complete_model(kind, size)
        oracle = GraphOracle(model)
        for x in objects(model):
            assert oracle.separate(x) is None

    def test_cuts_valid_for_every_tree(self):
        model = complete_model("mst", 6)
        trees = np.array(brute.spanning_trees(6, model.edges))
        r = np.random.default_rng(2)
        oracle = GraphOracle(model)
        for _ in range(50):
            x = r.uniform(0, 1, model.n_edges)
            cut = oracle.separate(x)
            if cut is not None:
                assert np.all(trees @ cut.a <= cut.b + 1e-9)

    def test_cuts_valid_for_every_tour(self):
        model = complete_model("tsp", 6)
        tours = np.array(brute.tours(6, model.edges))
        r = np.random.default_rng(3)
        oracle = GraphOracle(model)
        for _ in range(50):
            cut = oracle.separate(r.uniform(0, 1, model.n_edges))
            if cut is not None:
                assert np.all(tours @ cut.a <= cut.b + 1e-9)

    def test_accepted_points_satisfy_all_model_rows(self):
        model = complete_model("tsp", 5)
        oracle = GraphOracle(model)
        r = np.random.default_rng(4)
        for _ in range(200):
            x = r.uniform(0, 1, model.n_edges)
            if oracle.separate(x) is None:
                assert np.abs(model.eq_matrix @ x - model.eq_rhs).max() <= 2e-6
                assert min_cut_weight(model, x) >= 2 - 2e-6


def test_boxed_oracle_checks_bounds_first():
    oracle = BoxedOracle(ExplicitRowsOracle([[1.0, 1.0]], [0.5]), np.zeros(2), np.ones(2))
    cut = oracle.separate(np.array([1.5, 0.0]))
    np.testing.assert_array_equal(cut.a, [1.0, 0.0])
    assert cut.b == 1.0
    cut = oracle.separate(np.array([0.0, -0.25]))
    np.testing.assert_array_equal(cut.a, [0.0, -1.0])
    assert cut.b == 0.0


def test_check_membership_forms():
    model = complete_model("tsp", 6)
    tour = indicator(model, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)])
    split = indicator(model, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert check_membership(model, tour)
    assert not check_membership(model, split)
    assert check_membership((np.eye(2), np.ones(2)), np.array([1.0, 0.5]))
