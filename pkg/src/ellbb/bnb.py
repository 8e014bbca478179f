"""Depth-first branch-and-bound around the dual active-set relaxation solver.

Children inherit the parent's terminal active set (rows, multipliers and
pseudo-inverse).  Because the child's feasible region is smaller, the
inherited multipliers stay dual feasible, and the violated branching bound
is pushed straight into the active set with a zero multiplier.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ellas import (
    BoundPruned,
    Infeasible,
    IterationLimit,
    IterationLimits,
    Optimal,
    initialize,
    objective,
    solve_relaxation,
    warm_state,
)
from .linalg import SpdFactor, spd_sqrt_inverse
from .oracles import BoxedOracle, SeparationOracle
from .subproblem import ActiveSet

__all__ = [
    "Problem",
    "Node",
    "Incumbent",
    "SolveParams",
    "SolveStats",
    "SolveResult",
    "NodeLogEntry",
    "Pruned",
    "NewIncumbent",
    "Branched",
    "select_branching_variable",
    "branch",
    "process_node",
    "solve_node_relaxation",
    "root_node",
    "solve",
    "INTEGRALITY_TOL",
    "WARM_FEASIBILITY_TOL",
]

INTEGRALITY_TOL = 1e-6
WARM_FEASIBILITY_TOL = 1e-9


@dataclass
class Problem:
    """Objective data, the factored ``Q`` and the oracle for ``P`` (without the box)."""

    c: np.ndarray
    factor: SpdFactor
    oracle: SeparationOracle
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @classmethod
    def from_instance(cls, inst) -> "Problem":
        return cls(
            c=np.asarray(inst.c, dtype=np.float64),
            factor=spd_sqrt_inverse(inst.q),
            oracle=inst.oracle(),
            lower=np.asarray(inst.lower, dtype=np.float64),
            upper=np.asarray(inst.upper, dtype=np.float64),
        )

    def f(self, x) -> float:
        return objective(self.c, self.factor, x)

    def boxed(self, lower, upper) -> BoxedOracle:
        return BoxedOracle(self.oracle, lower, upper)


@dataclass
class Node:
    lower: np.ndarray
    upper: np.ndarray
    warm: ActiveSet | None = None
    parent_bound: float = -math.inf
    depth: int = 0
    pending_branch_row: tuple[np.ndarray, float] | None = None
    node_id: int = 0


@dataclass
class Incumbent:
    x: np.ndarray | None = None
    value: float = math.inf
    source: str = "none"  # "relaxation-integral" or "none"


@dataclass
class SolveParams:
    opt_tol: float = 1e-4
    time_limit: float | None = None
    node_limit: int | None = None
    warm_start: bool = True
    max_iter_per_node: int = 100_000
    capture_node_log: bool = False


@dataclass
class SolveStats:
    nodes: int = 0
    ellas_iterations: int = 0
    pinv_recomputes: int = 0
    wall_time: float = 0.0
    status: str = "Optimal"  # Optimal | Infeasible | TimeLimit
    bound: float = -math.inf
    warm_fallbacks: int = 0

    @property
    def ps_pct(self) -> float:
        if self.ellas_iterations == 0:
            return 0.0
        return min(100.0, 100.0 * self.pinv_recomputes / self.ellas_iterations)


@dataclass
class NodeLogEntry:
    node_id: int
    depth: int
    lower: np.ndarray
    upper: np.ndarray
    outcome: str
    bound: float
    iterations: int
    dual_values: list[float] = field(default_factory=list)


@dataclass
class SolveResult:
    status: str
    incumbent: Incumbent
    stats: SolveStats
    node_log: list[NodeLogEntry] = field(default_factory=list)

    @property
    def x(self):
        return self.incumbent.x

    @property
    def value(self) -> float:
        return self.incumbent.value


@dataclass
class Pruned:
    bound: float
    reason: str  # "infeasible", "bound", "point"


@dataclass
class NewIncumbent:
    x: np.ndarray
    value: float
    bound: float


@dataclass
class Branched:
    children: tuple[Node, Node]
    bound: float


def select_branching_variable(x, lower, upper) -> int | None:
    """Most fractional free variable (first index on ties), or ``None`` if ``x`` is integral."""
    x = np.asarray(x, dtype=np.float64)
    frac = np.minimum(x - np.floor(x), np.ceil(x) - x)
    free = np.asarray(lower) < np.asarray(upper)
    frac = np.where(free & (frac > INTEGRALITY_TOL), frac, -1.0)
    if frac.size == 0 or frac.max() < 0.0:
        return None
    return int(np.argmax(frac))


def branch(node: Node, i: int, x_i: float, warm: ActiveSet | None = None,
           bound: float | None = None, inject: bool = True) -> tuple[Node, Node]:
    """Split the domain of variable ``i`` at ``x_i``; the down child comes first."""
    lo, hi = math.floor(x_i), math.ceil(x_i)
    if hi == lo:
        hi = lo + 1
    if not (node.lower[i] <= lo and hi <= node.upper[i]):
        raise ValueError(f"cannot branch x[{i}]={x_i} inside [{node.lower[i]}, {node.upper[i]}]")
    n = node.lower.shape[0]
    bound = node.parent_bound if bound is None else bound
    e = np.zeros(n)
    e[i] = 1.0
    down_up = node.upper.copy()
    down_up[i] = lo
    up_lo = node.lower.copy()
    up_lo[i] = hi
    down = Node(node.lower.copy(), down_up, warm=None if warm is None else warm.copy(),
                parent_bound=bound, depth=node.depth + 1,
                pending_branch_row=(e, float(lo)) if inject else None)
    up = Node(up_lo, node.upper.copy(), warm=None if warm is None else warm.copy(),
              parent_bound=bound, depth=node.depth + 1,
              pending_branch_row=(-e, -float(hi)) if inject else None)
    return down, up


def root_node(problem: Problem) -> Node:
    return Node(problem.lower.copy(), problem.upper.copy())


def _start_state(problem: Problem, node: Node, warm: bool):
    if warm and node.warm is not None:
        state = warm_state(problem.factor, problem.c, node.warm, node.pending_branch_row)
        ell = float(np.linalg.norm(state.aset.ellipsoid_vector(state.s)))
        if ell <= 1.0 + WARM_FEASIBILITY_TOL and np.min(state.aset.lam, initial=0.0) >= 0.0:
            return state, False
    return initialize(problem.factor, problem.c, node.lower, node.upper), node.warm is not None and warm


def solve_node_relaxation(problem: Problem, node: Node, prune_bound: float | None = None,
                          params: SolveParams | None = None, warm: bool = True,
                          deadline: float | None = None, monitor=None, on_value=None):
    """Relaxation of one node; returns ``(result, state, fell_back_to_cold)``."""
    params = params or SolveParams()
    state, fell_back = _start_state(problem, node, warm)
    limits = IterationLimits(max_iter=params.max_iter_per_node, opt_tol=params.opt_tol,
                             deadline=deadline)
    oracle = problem.boxed(node.lower, node.upper)
    result = solve_relaxation(state, oracle, prune_bound=prune_bound, limits=limits,
                              monitor=monitor, on_value=on_value)
    return result, state, fell_back


def _integral(x) -> np.ndarray | None:
    r = np.rint(x)
    if np.max(np.abs(x - r), initial=0.0) <= INTEGRALITY_TOL:
        return r
    return None


def _fallback_split(node: Node, x) -> tuple[int, float] | None:
    """Branching point when the relaxation gave no usable fractional point."""
    if x is not None:
        xc = np.clip(x, node.lower, node.upper)
        i = select_branching_variable(xc, node.lower, node.upper)
        if i is not None:
            return i, float(xc[i])
    free = np.flatnonzero(node.lower < node.upper)
    if free.size == 0:
        return None
    i = int(free[0])
    return i, math.floor(0.5 * (node.lower[i] + node.upper[i])) + 0.5


def _single_point(problem: Problem, node: Node, bound: float):
    x = node.lower.copy()
    if problem.boxed(node.lower, node.upper).separate(x) is None:
        return NewIncumbent(x, problem.f(x), bound)
    return Pruned(bound, "point")


def process_node(problem: Problem, node: Node, incumbent: Incumbent,
                 params: SolveParams | None = None, deadline: float | None = None,
                 monitor=None, on_value=None, stats: SolveStats | None = None):
    """Solve one node and decide what happens to it."""
    params = params or SolveParams()
    if np.any(node.lower > node.upper):
        return Pruned(math.inf, "infeasible")
    prune = incumbent.value if math.isfinite(incumbent.value) else None
    result, state, fell_back = solve_node_relaxation(
        problem, node, prune, params, params.warm_start, deadline, monitor, on_value)
    if stats is not None:
        stats.ellas_iterations += state.iter
        stats.pinv_recomputes += state.aset.recomputes
        stats.warm_fallbacks += int(fell_back)
    bound = max(state.best_dual_value, node.parent_bound)

    if isinstance(result, Infeasible):
        return Pruned(math.inf, "infeasible")
    if isinstance(result, BoundPruned):
        return Pruned(bound, "bound")
    if isinstance(result, Optimal):
        x = result.x
        xi = _integral(x)
        if xi is not None:
            if problem.boxed(node.lower, node.upper).separate(xi) is None:
                return NewIncumbent(xi, problem.f(xi), bound)
            split = _fallback_split(node, None)
        else:
            i = select_branching_variable(x, node.lower, node.upper)
            split = (i, float(x[i])) if i is not None else _fallback_split(node, None)
        inject = True
    else:  # IterationLimit
        split = _fallback_split(node, state.last_x)
        inject = False
    if split is None:
        return _single_point(problem, node, bound)
    i, xi_val = split
    warm = state.aset if params.warm_start else None
    children = branch(node, i, xi_val, warm=warm, bound=bound, inject=inject)
    return Branched(children, bound)


def solve(instance, params: SolveParams | None = None, monitor=None) -> SolveResult:
    """Minimise ``c^T x + sqrt(x^T Q x)`` over the integer points of ``P`` within the box.

    ``instance`` may be an :class:`~ellbb.instances.Instance` or a :class:`Problem`.
    The returned value is within ``params.opt_tol`` of the optimum unless the
    status is ``TimeLimit``.
    """
    params = params or SolveParams()
    t0 = time.perf_counter()
    problem = instance if isinstance(instance, Problem) else Problem.from_instance(instance)
    if np.any(problem.lower > problem.upper):
        raise ValueError("empty box: l > u")
    if not (np.all(np.isfinite(problem.lower)) and np.all(np.isfinite(problem.upper))):
        raise ValueError("box must be finite")
    stats = SolveStats()
    incumbent = Incumbent()
    log: list[NodeLogEntry] = []
    deadline = None if params.time_limit is None else t0 + params.time_limit

    if params.time_limit is not None and params.time_limit <= 0:
        stats.status = "TimeLimit"
        stats.wall_time = time.perf_counter() - t0
        return SolveResult("TimeLimit", incumbent, stats, log)

    stack = [root_node(problem)]
    leaf_bound = math.inf
    next_id = 1
    limit_hit = False
    while stack:
        if deadline is not None and time.perf_counter() >= deadline:
            limit_hit = True
            break
        if params.node_limit is not None and stats.nodes >= params.node_limit:
            limit_hit = True
            break
        node = stack.pop()
        stats.nodes += 1
        values: list[float] = []
        on_value = values.append if params.capture_node_log else None
        iters_before = stats.ellas_iterations
        out = process_node(problem, node, incumbent, params, deadline, monitor, on_value, stats)
        if deadline is not None and time.perf_counter() >= deadline and isinstance(out, Branched):
            # relaxation was cut short by the clock; the node stays open
            stack.append(node)
            node.parent_bound = max(node.parent_bound, out.bound)
            limit_hit = True
            _log(log, params, node, "TimeLimit", out.bound, stats.ellas_iterations - iters_before, values)
            break
        if isinstance(out, Pruned):
            kind = f"Pruned:{out.reason}"
            if out.reason != "infeasible":
                leaf_bound = min(leaf_bound, out.bound)
        elif isinstance(out, NewIncumbent):
            kind = "NewIncumbent"
            leaf_bound = min(leaf_bound, out.value)
            if out.value < incumbent.value:
                incumbent = Incumbent(out.x, out.value, "relaxation-integral")
        else:
            kind = "Branched"
            down, up = out.children
            for child in (up, down):
                child.node_id = next_id
                next_id += 1
            stack.append(up)
            stack.append(down)
        _log(log, params, node, kind, out.bound, stats.ellas_iterations - iters_before, values)

    if limit_hit:
        stats.status = "TimeLimit"
        open_bound = min((nd.parent_bound for nd in stack), default=math.inf)
        stats.bound = min(open_bound, leaf_bound, incumbent.value)
    elif incumbent.x is None:
        stats.status = "Infeasible"
        stats.bound = math.inf
    else:
        stats.status = "Optimal"
        stats.bound = min(leaf_bound, incumbent.value)
    stats.wall_time = time.perf_counter() - t0
    return SolveResult(stats.status, incumbent, stats, log)


def _log(log, params, node, kind, bound, iters, values) -> None:
    if params.capture_node_log:
        log.append(NodeLogEntry(node.node_id, node.depth, node.lower.copy(), node.upper.copy(),
                                kind, bound, iters, values))
