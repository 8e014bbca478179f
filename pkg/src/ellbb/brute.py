"""Exhaustive enumeration of integer optima for small instances.

These routines share nothing with the solver path except the objective
formula: explicit rows are checked by direct matrix products and the graph
families enumerate their combinatorial objects (paths, matchings, trees,
tours) directly rather than going through a separation oracle.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

__all__ = ["EnumerationResult", "enumerate_optimum", "enumerate_box", "binary_points",
           "grid_paths", "perfect_matchings", "spanning_trees", "tours", "MAX_ENUM_N"]

MAX_ENUM_N = 22
FEAS_TOL = 1e-9


class EnumerationResult:
    __slots__ = ("x", "value", "count")

    def __init__(self, x, value, count):
        self.x = x
        self.value = value
        self.count = count

    def __repr__(self):
        return f"EnumerationResult(value={self.value!r}, count={self.count})"


def _f_many(c, q, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    quad = np.einsum("ij,jk,ik->i", xs, q, xs)
    return xs @ c + np.sqrt(np.maximum(quad, 0.0))


def _best(c, q, xs) -> EnumerationResult:
    if len(xs) == 0:
        return EnumerationResult(None, math.inf, 0)
    xs = np.asarray(xs, dtype=np.float64)
    vals = _f_many(c, q, xs)
    k = int(np.argmin(vals))
    return EnumerationResult(xs[k].copy(), float(vals[k]), xs.shape[0])


def binary_points(n: int) -> np.ndarray:
    if n > MAX_ENUM_N:
        raise ValueError(f"refusing to enumerate 2^{n} points")
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)


def enumerate_box(c, q, lower, upper, rows=None, accept=None) -> EnumerationResult:
    """Best integer point of the box satisfying ``rows = (a, b)`` and ``accept(x)``."""
    lower = np.asarray(lower, dtype=np.int64)
    upper = np.asarray(upper, dtype=np.int64)
    n = lower.shape[0]
    if np.any(lower > upper):
        return EnumerationResult(None, math.inf, 0)
    if np.all(upper - lower <= 1):
        base = binary_points(n)
        pts = lower + base * (upper - lower)
        pts = np.unique(pts, axis=0)
    else:
        ranges = [range(lo, hi + 1) for lo, hi in zip(lower, upper)]
        total = math.prod(len(r) for r in ranges)
        if total > 2**MAX_ENUM_N:
            raise ValueError("box too large to enumerate")
        pts = np.array(list(itertools.product(*ranges)), dtype=np.float64).reshape(-1, n)
    if rows is not None:
        a, b = rows
        ok = np.all(pts @ np.asarray(a, dtype=np.float64).T <= np.asarray(b) + FEAS_TOL, axis=1)
        pts = pts[ok]
    if accept is not None:
        pts = np.array([p for p in pts if accept(p)]).reshape(-1, n)
    return _best(np.asarray(c, dtype=np.float64), np.asarray(q, dtype=np.float64), pts)


def _edge_index(edges) -> dict:
    return {(int(u), int(v)): e for e, (u, v) in enumerate(edges)}


def grid_paths(r: int, edges) -> list[np.ndarray]:
    """Incidence vectors of all right/down paths from the top-left to the bottom-right corner."""
    idx = _edge_index(edges)
    out = []
    for downs in itertools.combinations(range(2 * (r - 1)), r - 1):
        x = np.zeros(len(edges))
        i = j = 0
        down_set = set(downs)
        for step in range(2 * (r - 1)):
            v = i * r + j
            if step in down_set:
                i += 1
            else:
                j += 1
            x[idx[(v, i * r + j)]] = 1.0
        out.append(x)
    return out


def perfect_matchings(k: int, edges) -> list[np.ndarray]:
    """All perfect matchings of K_{k,k} with sides ``0..k-1`` and ``k..2k-1``."""
    idx = _edge_index(edges)
    out = []
    for perm in itertools.permutations(range(k)):
        x = np.zeros(len(edges))
        for i, j in enumerate(perm):
            x[idx[(i, k + j)]] = 1.0
        out.append(x)
    return out


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def spanning_trees(n_vertices: int, edges) -> list[np.ndarray]:
    """All spanning trees, by testing every (|V|-1)-subset of edges for acyclicity."""
    edges = [tuple(map(int, e)) for e in edges]
    out = []
    for combo in itertools.combinations(range(len(edges)), n_vertices - 1):
        parent = list(range(n_vertices))
        ok = True
        for e in combo:
            u, v = edges[e]
            ru, rv = _find(parent, u), _find(parent, v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            x = np.zeros(len(edges))
            x[list(combo)] = 1.0
            out.append(x)
    return out


def tours(n_vertices: int, edges) -> list[np.ndarray]:
    """All Hamiltonian cycles of the complete graph, each counted once."""
    idx = {}
    for e, (u, v) in enumerate(edges):
        idx[(int(u), int(v))] = e
        idx[(int(v), int(u))] = e
    out = []
    for perm in itertools.permutations(range(1, n_vertices)):
        if perm[0] > perm[-1]:
            continue  # reversed duplicate
        cyc = (0,) + perm
        x = np.zeros(len(edges))
        for a, b in zip(cyc, cyc[1:] + (0,)):
            x[idx[(a, b)]] = 1.0
        out.append(x)
    return out


def enumerate_optimum(inst) -> EnumerationResult:
    """Integer optimum of an :class:`~ellbb.instances.Instance` by brute force."""
    c, q = inst.c, inst.q
    if inst.graph is None:
        return enumerate_box(c, q, inst.lower, inst.upper, rows=(inst.rows_a, inst.rows_b))
    g = inst.graph
    if g.kind == "grid-sp":
        xs = grid_paths(g.param, g.edges)
    elif g.kind == "assignment":
        xs = perfect_matchings(g.n_vertices // 2, g.edges)
    elif g.kind in ("mst", "mst-grid"):
        xs = spanning_trees(g.n_vertices, g.edges)
    elif g.kind == "tsp":
        xs = tours(g.n_vertices, g.edges)
    else:
        raise ValueError(g.kind)
    lo, hi = np.asarray(inst.lower), np.asarray(inst.upper)
    xs = [x for x in xs if np.all(x >= lo) and np.all(x <= hi)]
    return _best(c, q, xs)
