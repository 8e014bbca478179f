"""Separation oracles.

An oracle answers ``x in P?`` and, if not, returns an inequality
``a^T x <= b`` that is valid for every integer point of ``P`` but violated
by ``x``.  Equalities of the combinatorial models are screened as pairs of
inequalities because the dual machinery only handles ``<=`` rows.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "Violated",
    "SeparationOracle",
    "ExplicitRowsOracle",
    "GraphOracle",
    "BoxedOracle",
    "GraphModel",
    "separate_explicit",
    "separate_graph_equalities",
    "separate_mst_subtour",
    "separate_tsp_cut",
    "check_membership",
    "GRAPH_KINDS",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-6
FLOW_SCALE = 1e9
_INF_CAP = np.int64(1) << np.int64(50)

GRAPH_KINDS = ("grid-sp", "assignment", "mst", "mst-grid", "tsp")


@dataclass
class Violated:
    a: np.ndarray
    b: float
    violation: float


class SeparationOracle(abc.ABC):
    @abc.abstractmethod
    def separate(self, x, tol: float = DEFAULT_TOL) -> Violated | None:
        """Return a violated valid inequality, or ``None`` if ``x`` is accepted."""


@dataclass
class GraphModel:
    """Graph underlying a combinatorial family; edge ``e`` is variable ``e``."""

    kind: str
    param: int
    n_vertices: int
    edges: np.ndarray
    directed: bool = False
    source: int | None = None
    sink: int | None = None
    eq_matrix: np.ndarray = field(init=False, repr=False)
    eq_rhs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ValueError(f"unknown graph kind {self.kind!r}")
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.eq_matrix, self.eq_rhs = self._equalities()

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def incidence(self) -> np.ndarray:
        inc = np.zeros((self.n_vertices, self.n_edges))
        idx = np.arange(self.n_edges)
        if self.directed:
            inc[self.edges[:, 0], idx] += 1.0
            inc[self.edges[:, 1], idx] -= 1.0
        else:
            inc[self.edges[:, 0], idx] += 1.0
            inc[self.edges[:, 1], idx] += 1.0
        return inc

    def _equalities(self):
        nv = self.n_vertices
        if self.kind == "grid-sp":
            rhs = np.zeros(nv)
            rhs[self.source] = 1.0
            rhs[self.sink] = -1.0
            return self.incidence(), rhs
        if self.kind == "assignment":
            return self.incidence(), np.ones(nv)
        if self.kind == "tsp":
            return self.incidence(), np.full(nv, 2.0)
        return np.ones((1, self.n_edges)), np.array([nv - 1.0])

    def edges_within(self, mask: np.ndarray) -> np.ndarray:
        return mask[self.edges[:, 0]] & mask[self.edges[:, 1]]

    def edges_across(self, mask: np.ndarray) -> np.ndarray:
        return mask[self.edges[:, 0]] != mask[self.edges[:, 1]]


def separate_explicit(a, b, x, tol: float = DEFAULT_TOL) -> Violated | None:
    """Most violated row of ``a x <= b`` (smallest index on ties)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    j, viol = _kernels.most_violated(a, b, x)
    if j < 0 or viol <= tol:
        return None
    return Violated(a[j].copy(), float(b[j]), viol)


def separate_graph_equalities(model: GraphModel, x, tol: float = DEFAULT_TOL) -> Violated | None:
    """Screen each equality as ``a x <= b`` and ``-a x <= -b``; return the worst half."""
    x = np.asarray(x, dtype=np.float64)
    r = model.eq_matrix @ x - model.eq_rhs
    halves = np.empty(2 * r.shape[0])
    halves[0::2] = r
    halves[1::2] = -r
    k = int(np.argmax(halves))
    viol = float(halves[k])
    if viol <= tol:
        return None
    i, sign = divmod(k, 2)
    sgn = -1.0 if sign else 1.0
    return Violated(sgn * model.eq_matrix[i].copy(), sgn * float(model.eq_rhs[i]), viol)


def _capacities(model: GraphModel, x, extra: int) -> np.ndarray:
    nv = model.n_vertices
    cap = np.zeros((nv + extra, nv + extra), dtype=np.int64)
    w = np.rint(np.clip(x, 0.0, None) * FLOW_SCALE).astype(np.int64)
    u, v = model.edges[:, 0], model.edges[:, 1]
    np.add.at(cap, (u, v), w)
    np.add.at(cap, (v, u), w)
    return cap


def separate_mst_subtour(model: GraphModel, x, tol: float = DEFAULT_TOL) -> Violated | None:
    """Most violated ``sum_{e in E(X)} x_e <= |X| - 1`` via one min cut per vertex.

    For a vertex set ``X``, ``2(|X| - x(E(X))) = x(δ(X)) + sum_{v in X} (2 - d_x(v))``,
    so minimising the right side over ``X`` containing a fixed vertex is an
    s-t cut problem.  Vertices with a smaller index are forced out of ``X``
    so that each set is examined exactly once.
    """
    x = np.asarray(x, dtype=np.float64)
    nv = model.n_vertices
    if nv < 2:
        return None
    xc = np.clip(x, 0.0, None)
    inc = np.zeros((nv, model.n_edges))
    idx = np.arange(model.n_edges)
    inc[model.edges[:, 0], idx] = 1.0
    inc[model.edges[:, 1], idx] = 1.0
    weight = 2.0 - inc @ xc
    base = _capacities(model, xc, 2)
    s, t = nv, nv + 1
    node_cap = np.rint(np.abs(weight) * FLOW_SCALE).astype(np.int64)
    pos = weight >= 0.0
    best_viol, best_mask = -np.inf, None
    for k in range(nv):
        cap = base.copy()
        cap[np.flatnonzero(pos), t] = node_cap[pos]
        cap[s, np.flatnonzero(~pos)] = node_cap[~pos]
        cap[:k, t] = _INF_CAP
        cap[s, k] = _INF_CAP
        cap[k, t] = 0
        _, reach = _kernels.edmonds_karp(cap, s, t)
        mask = reach[:nv]
        viol = float(xc[model.edges_within(mask)].sum()) - (int(mask.sum()) - 1)
        if viol > best_viol:
            best_viol, best_mask = viol, mask
    if best_viol <= tol:
        return None
    a = model.edges_within(best_mask).astype(np.float64)
    return Violated(a, float(best_mask.sum() - 1), best_viol)


def separate_tsp_cut(model: GraphModel, x, tol: float = DEFAULT_TOL) -> Violated | None:
    """Global minimum cut by ``|V| - 1`` max-flows from vertex 0; returns ``-x(δ(X)) <= -2``."""
    x = np.asarray(x, dtype=np.float64)
    nv = model.n_vertices
    if nv < 2:
        return None
    xc = np.clip(x, 0.0, None)
    cap = _capacities(model, xc, 0)
    best_w, best_mask = np.inf, None
    for t in range(1, nv):
        _, mask = _kernels.edmonds_karp(cap, 0, t)
        w = float(xc[model.edges_across(mask)].sum())
        if w < best_w:
            best_w, best_mask = w, mask
    if 2.0 - best_w <= tol:
        return None
    a = -model.edges_across(best_mask).astype(np.float64)
    return Violated(a, -2.0, 2.0 - best_w)


class ExplicitRowsOracle(SeparationOracle):
    def __init__(self, a, b):
        self.a = np.ascontiguousarray(a, dtype=np.float64)
        self.b = np.ascontiguousarray(b, dtype=np.float64)

    def separate(self, x, tol: float = DEFAULT_TOL) -> Violated | None:
        return separate_explicit(self.a, self.b, x, tol)


class GraphOracle(SeparationOracle):
    """Equalities first, then the family's exponential cut class."""

    def __init__(self, model: GraphModel):
        self.model = model

    def separate(self, x, tol: float = DEFAULT_TOL) -> Violated | None:
        cut = separate_graph_equalities(self.model, x, tol)
        if cut is not None:
            return cut
        if self.model.kind in ("mst", "mst-grid"):
            return separate_mst_subtour(self.model, x, tol)
        if self.model.kind == "tsp":
            return separate_tsp_cut(self.model, x, tol)
        return None


class BoxedOracle(SeparationOracle):
    """Bounds ``lower <= x <= upper`` checked before delegating to ``base``."""

    def __init__(self, base: SeparationOracle, lower, upper):
        self.base = base
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)

    def separate(self, x, tol: float = DEFAULT_TOL) -> Violated | None:
        x = np.asarray(x, dtype=np.float64)
        over = x - self.upper
        under = self.lower - x
        i_over = int(np.argmax(over))
        i_under = int(np.argmax(under))
        n = x.shape[0]
        if max(over[i_over], under[i_under]) > tol:
            a = np.zeros(n)
            if over[i_over] >= under[i_under]:
                a[i_over] = 1.0
                return Violated(a, float(self.upper[i_over]), float(over[i_over]))
            a[i_under] = -1.0
            return Violated(a, -float(self.lower[i_under]), float(under[i_under]))
        return self.base.separate(x, tol)


def check_membership(oracle, x, tol: float = DEFAULT_TOL) -> bool:
    """True iff every separator accepts ``x``.  ``oracle`` may also be a
    :class:`GraphModel` or an ``(a, b)`` row pair."""
    if isinstance(oracle, GraphModel):
        oracle = GraphOracle(oracle)
    elif isinstance(oracle, tuple):
        oracle = ExplicitRowsOracle(*oracle)
    return oracle.separate(x, tol) is None
