"""Dual active-set method for the continuous relaxation.

The relaxation is ``min c^T x + sqrt(x^T Q x)`` over ``x`` in ``P ∩ [l, u]``
where ``P`` is only available through a separation oracle.  The method keeps
a dual feasible multiplier vector at all times, so the dual value at any
iteration is a valid lower bound; this is what makes early pruning and
early termination safe inside branch-and-bound.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import PseudoInverse, SpdFactor
from .subproblem import (
    ActiveSet,
    BoundedOptimum,
    DegenerateRecovery,
    DualInfeasibleDetected,
    Unbounded,
    ZeroOptimal,
    recover_primal,
    solve_dual_subproblem,
)

__all__ = [
    "EllasState",
    "IterationLimits",
    "Optimal",
    "Infeasible",
    "BoundPruned",
    "IterationLimit",
    "IterationRecord",
    "InvariantChecker",
    "InvariantViolation",
    "EmptyReleaseSet",
    "initialize",
    "warm_state",
    "dual_step",
    "primal_step",
    "feasibility_safeguard",
    "solve_relaxation",
    "objective",
]

NONNEG_TOL = 1e-12
ZERO_VALUE_TOL = 1e-10
ORACLE_TOL = 1e-6
ROW_RESIDUAL_TOL = 1e-6
# ellipsoid overshoot accepted without a line search
SAFEGUARD_SLACK = 1e-10


class EmptyReleaseSet(AssertionError):
    """Bounded dual step with no negative direction entry; cannot happen in exact arithmetic."""


class InvariantViolation(AssertionError):
    pass


class _NeedsRecompute(Exception):
    pass


def objective(c, factor: SpdFactor, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(c @ x) + float(np.sqrt(max(0.0, x @ factor.q @ x)))


@dataclass
class IterationLimits:
    max_iter: int = 100_000
    stall_window: int | None = None  # default 2(n+1)
    tail_tol: float = 1e-9
    opt_tol: float = 1e-4
    deadline: float | None = None  # time.perf_counter() value


@dataclass
class EllasState:
    aset: ActiveSet
    factor: SpdFactor
    c: np.ndarray
    s: np.ndarray
    best_dual_value: float = -np.inf
    iter: int = 0
    pinv_recomputes: int = 0
    last_x: np.ndarray | None = None
    certificate: np.ndarray | None = None
    last_step: float = 0.0
    last_cut: object = None

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass
class Optimal:
    x: np.ndarray
    lam: np.ndarray
    value: float


@dataclass
class Infeasible:
    ray: np.ndarray


@dataclass
class BoundPruned:
    bound: float


@dataclass
class IterationLimit:
    bound: float


@dataclass
class IterationRecord:
    iter: int
    kind: str  # "primal", "dual", "unbounded", "infeasible"
    value_before: float
    value_after: float
    norm_before: float
    norm_after: float
    step: float
    m_k: int
    ellipsoid: float
    min_lambda: float


def initialize(factor: SpdFactor, c, l, u, recompute_every: int = 500) -> EllasState:
    """Cold start from the box: one bound row per variable, chosen by the sign of ``c``."""
    c = np.asarray(c, dtype=np.float64).ravel()
    l = np.asarray(l, dtype=np.float64).ravel()
    u = np.asarray(u, dtype=np.float64).ravel()
    n = c.shape[0]
    if l.shape != (n,) or u.shape != (n,):
        raise ValueError("box dimensions do not match the objective")
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(u))):
        raise ValueError("box must be finite")
    if np.any(l > u):
        raise ValueError("empty box: l > u")
    neg = c < 0
    sign = np.where(neg, 1.0, -1.0)
    a = np.diag(sign)
    b = np.where(neg, u, -l)
    lam = np.abs(c)
    # (A Q^{-1/2})^+ = Q^{1/2} A for a signed identity A
    pinv = PseudoInverse(sign[:, None] * factor.q_inv_half, factor.q_half * sign[None, :], True)
    aset = ActiveSet(a, b, lam, factor.q_inv_half, pinv=pinv, recompute_every=recompute_every)
    state = EllasState(aset=aset, factor=factor, c=c, s=factor.q_inv_half @ c)
    state.best_dual_value = aset.dual_value()
    return state


def warm_state(factor: SpdFactor, c, aset: ActiveSet, pending_row=None) -> EllasState:
    """State continuing from an inherited active set, optionally with one extra row."""
    c = np.asarray(c, dtype=np.float64).ravel()
    aset = aset.copy()
    if pending_row is not None:
        aset.append(*pending_row)
    state = EllasState(aset=aset, factor=factor, c=c, s=factor.q_inv_half @ c)
    state.best_dual_value = aset.dual_value()
    return state


def feasibility_safeguard(state: EllasState, lambda_prev, lambda_tilde) -> np.ndarray:
    """Largest step from ``lambda_prev`` toward ``lambda_tilde`` inside the ellipsoid."""
    lambda_prev = np.asarray(lambda_prev, dtype=np.float64)
    lambda_tilde = np.asarray(lambda_tilde, dtype=np.float64)
    aq = state.aset.aq
    w = aq.T @ (lambda_tilde - lambda_prev)
    u = state.s + aq.T @ lambda_prev
    if float(np.linalg.norm(u + w)) <= 1.0 + SAFEGUARD_SLACK:
        return lambda_tilde
    qa = float(w @ w)
    qb = 2.0 * float(u @ w)
    # lambda_prev is feasible; a positive value here is roundoff on the boundary
    qc = min(0.0, float(u @ u) - 1.0)
    if qa == 0.0:
        return lambda_prev.copy()
    disc = max(0.0, qb * qb - 4.0 * qa * qc)
    # larger root, written to avoid cancellation
    if qb >= 0.0:
        delta = (-2.0 * qc) / (qb + np.sqrt(disc)) if qb + np.sqrt(disc) > 0.0 else 0.0
    else:
        delta = (-qb + np.sqrt(disc)) / (2.0 * qa)
    delta = min(1.0, max(0.0, delta))
    return (1.0 - delta) * lambda_prev + delta * lambda_tilde


def dual_step(state: EllasState, outcome) -> np.ndarray | None:
    """Move along the dual ascent direction and release one row.

    Returns the infeasibility ray if the unbounded direction is nonnegative,
    otherwise ``None``.
    """
    aset = state.aset
    lam = aset.lam
    if isinstance(outcome, Unbounded):
        p = outcome.direction
        if np.all(p >= -NONNEG_TOL):
            return p
    else:
        p = outcome.lambda_tilde - lam
    neg = np.flatnonzero(p < -NONNEG_TOL)
    if neg.size == 0:
        raise EmptyReleaseSet("no negative entry in a bounded dual step")
    ratios = -lam[neg] / p[neg]
    k = int(np.argmin(ratios))
    j = int(neg[k])
    alpha = max(0.0, float(ratios[k]))
    new = lam + alpha * p
    new[j] = 0.0
    np.maximum(new, 0.0, out=new)
    aset.lam = new
    aset.delete(j)
    state.last_step = alpha
    return None


def primal_step(state: EllasState, lambda_tilde, oracle) -> np.ndarray | None:
    """Accept ``lambda_tilde`` and either certify optimality or add a cut.

    Returns the optimal primal point, or ``None`` when a violated cut was
    appended to the active set.
    """
    aset = state.aset
    aset.lam = np.maximum(np.asarray(lambda_tilde, dtype=np.float64), 0.0)
    if abs(aset.dual_value()) <= ZERO_VALUE_TOL:
        # bound is zero = f(0): the origin is optimal whenever it is feasible
        zero = np.zeros(state.n)
        if oracle.separate(zero, ORACLE_TOL) is None:
            state.last_x = zero
            return zero
        if np.linalg.norm(aset.b) <= 1e-12:
            x = zero
        else:
            x = recover_primal(aset, aset.lam, state.factor, state.c)
    else:
        x = recover_primal(aset, aset.lam, state.factor, state.c)
    if aset.m and np.max(np.abs(aset.a @ x - aset.b)) > ROW_RESIDUAL_TOL:
        raise _NeedsRecompute
    state.last_x = x
    cut = oracle.separate(x, ORACLE_TOL)
    if cut is None:
        return x
    aset.append(cut.a, cut.b)
    state.last_cut = cut
    return None


class InvariantChecker:
    """Runtime checks of the dual active-set invariants.

    Collects violations rather than raising unless ``strict`` is set, so a
    test can report all of them at once.
    """

    def __init__(self, strict: bool = False):
        self.strict = strict
        self.violations: list[str] = []
        self.iterations = 0
        self.optimal_terminations = 0
        self.max_gap = 0.0
        self.max_ellipsoid = 0.0
        self.min_lambda = 0.0
        self.max_m_ratio = 0.0

    def _fail(self, msg: str) -> None:
        self.violations.append(msg)
        if self.strict:
            raise InvariantViolation(msg)

    def on_iteration(self, state: EllasState, rec: IterationRecord) -> None:
        self.iterations += 1
        n = state.n
        self.max_ellipsoid = max(self.max_ellipsoid, rec.ellipsoid - 1.0)
        self.min_lambda = min(self.min_lambda, rec.min_lambda)
        if rec.ellipsoid > 1.0 + 1e-9:
            self._fail(f"iter {rec.iter}: ellipsoid residual {rec.ellipsoid - 1:.3e}")
        if rec.min_lambda < -NONNEG_TOL:
            self._fail(f"iter {rec.iter}: negative multiplier {rec.min_lambda:.3e}")
        if rec.m_k > n + 1:
            self._fail(f"iter {rec.iter}: active set size {rec.m_k} > n+1 = {n + 1}")
        if rec.step > 1e-12 and rec.kind in ("primal", "dual", "unbounded"):
            dv = rec.value_after - rec.value_before
            if not (dv > 0.0 or (dv >= -1e-10 and rec.norm_after < rec.norm_before)):
                self._fail(
                    f"iter {rec.iter} ({rec.kind}): no lexicographic ascent, "
                    f"dvalue={dv:.3e} dnorm={rec.norm_after - rec.norm_before:.3e}"
                )

    def on_optimal(self, state: EllasState, result: Optimal, oracle) -> None:
        self.optimal_terminations += 1
        n = state.n
        f = objective(state.c, state.factor, result.x)
        gap = abs(f - result.value)
        self.max_gap = max(self.max_gap, gap / (1.0 + abs(f)))
        if gap > 1e-6 * (1.0 + abs(f)):
            self._fail(f"duality gap {gap:.3e} at termination (f={f:.6g})")
        if oracle.separate(result.x, ORACLE_TOL) is not None:
            self._fail("optimal point rejected by the oracle")
        if state.aset.m > n:
            self._fail(f"active set size {state.aset.m} > n = {n} at optimality")
        if np.min(result.lam, initial=0.0) < -NONNEG_TOL:
            self._fail("negative multiplier at optimality")
        ell = float(np.linalg.norm(state.aset.ellipsoid_vector(state.s)))
        if ell > 1.0 + 1e-9:
            self._fail(f"ellipsoid residual {ell - 1:.3e} at optimality")


def solve_relaxation(state: EllasState, oracle, prune_bound: float | None = None,
                     limits: IterationLimits | None = None, monitor=None,
                     on_value=None):
    """Run the active-set loop until optimality, infeasibility, pruning or a limit.

    ``monitor`` may provide ``on_iteration(state, record)`` and
    ``on_optimal(state, result, oracle)``; ``on_value(v)`` receives every
    dual value (a valid lower bound) as it is produced.
    """
    limits = limits or IterationLimits()
    n = state.n
    window = limits.stall_window if limits.stall_window is not None else 2 * (n + 1)
    aset = state.aset
    stall = 0
    retried = False
    start_iter = state.iter
    if on_value is not None:
        on_value(state.best_dual_value)

    def pruned() -> bool:
        return prune_bound is not None and state.best_dual_value >= prune_bound - limits.opt_tol

    if pruned():
        return BoundPruned(state.best_dual_value)

    while True:
        if state.iter - start_iter >= limits.max_iter:
            return IterationLimit(state.best_dual_value)
        if limits.deadline is not None and time.perf_counter() >= limits.deadline:
            return IterationLimit(state.best_dual_value)
        aset = state.aset
        lam_before = aset.lam.copy()
        value_before = aset.dual_value()
        norm_before = float(np.linalg.norm(lam_before))
        m_before = aset.m
        state.last_step = 0.0
        kind = "primal"
        result = None
        try:
            outcome = solve_dual_subproblem(aset, state.factor, state.c)
            if isinstance(outcome, Unbounded) or (
                isinstance(outcome, BoundedOptimum) and np.min(outcome.lambda_tilde) < -NONNEG_TOL
            ):
                # the step stops at alpha < 1 on the segment between two feasible points
                kind = "dual" if isinstance(outcome, BoundedOptimum) else "unbounded"
                ray = dual_step(state, outcome)
                if ray is not None:
                    state.certificate = ray
                    state.iter += 1
                    return Infeasible(ray)
                step = state.last_step
            else:
                if isinstance(outcome, ZeroOptimal):
                    lam_t = lam_before
                else:
                    lam_t = feasibility_safeguard(state, lam_before, outcome.lambda_tilde)
                step = float(np.linalg.norm(lam_t - lam_before))
                aset.lam = np.maximum(lam_t, 0.0)
                value_now = aset.dual_value()
                if value_now > state.best_dual_value:
                    state.best_dual_value = value_now
                    if on_value is not None:
                        on_value(value_now)
                if pruned():
                    state.iter += 1
                    _emit(monitor, state, kind, value_before, norm_before, step, lam_before)
                    return BoundPruned(state.best_dual_value)
                x = primal_step(state, aset.lam, oracle)
                if x is not None:
                    result = Optimal(x=x, lam=aset.lam.copy(), value=aset.dual_value())
        except (_NeedsRecompute, DegenerateRecovery, DualInfeasibleDetected):
            aset.lam = lam_before
            if aset.m != m_before:
                raise
            if retried:
                # recompute did not help: give up on this relaxation, the bound stands
                return IterationLimit(state.best_dual_value)
            aset.recompute()
            retried = True
            continue
        retried = False
        state.iter += 1

        value_after = aset.dual_value()
        if value_after > state.best_dual_value:
            state.best_dual_value = value_after
            if on_value is not None:
                on_value(value_after)
        state.pinv_recomputes = aset.recomputes
        _emit(monitor, state, kind, value_before, norm_before, step, lam_before)

        if result is not None:
            if monitor is not None and hasattr(monitor, "on_optimal"):
                monitor.on_optimal(state, result, oracle)
            return result
        if pruned():
            return BoundPruned(state.best_dual_value)

        norm_after = float(np.linalg.norm(aset.lam))
        if value_after > value_before + limits.tail_tol or norm_after < norm_before - limits.tail_tol:
            stall = 0
        else:
            stall += 1
            if stall >= window:
                return IterationLimit(state.best_dual_value)


def _emit(monitor, state: EllasState, kind, value_before, norm_before, step, lam_before) -> None:
    if monitor is None or not hasattr(monitor, "on_iteration"):
        return
    aset = state.aset
    lam = aset.lam
    # compare against the pre-deletion vector: the released entry is zero
    rec = IterationRecord(
        iter=state.iter,
        kind=kind,
        value_before=value_before,
        value_after=aset.dual_value(),
        norm_before=norm_before,
        norm_after=float(np.linalg.norm(lam)),
        step=step,
        m_k=aset.m,
        ellipsoid=float(np.linalg.norm(aset.ellipsoid_vector(state.s))),
        min_lambda=float(np.min(lam, initial=0.0)),
    )
    monitor.on_iteration(state, rec)
