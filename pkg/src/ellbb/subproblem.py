"""Closed-form solution of the equality-constrained subproblem pair.

For an active set ``Â x = b̂`` the primal problem is

    min  c^T x + sqrt(x^T Q x)   s.t.  Â x = b̂

and its dual is

    max  -b̂^T λ   s.t.  || Q^{-1/2} (c + Â^T λ) || <= 1,   λ free.

Everything is expressed through ``M = Â Q^{-1/2}`` and its pseudo-inverse,
which :class:`ActiveSet` keeps current as rows come and go.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    CorruptedPseudoInverse,
    PseudoInverse,
    RankDeficient,
    SpdFactor,
    pinv_append_row,
    pinv_delete_row,
    pinv_full,
)

__all__ = [
    "ActiveSet",
    "Unbounded",
    "BoundedOptimum",
    "ZeroOptimal",
    "DualInfeasibleDetected",
    "DegenerateRecovery",
    "solve_dual_subproblem",
    "recover_primal",
]

KERNEL_TOL = 1e-8
ZERO_RHS_TOL = 1e-12
DUAL_INFEASIBLE_SLACK = 1e-6
CASE_A_TOL = 1e-10
DENOMINATOR_TOL = 1e-12
CASE_B_TOL = 1e-6


class DualInfeasibleDetected(ArithmeticError):
    """The subproblem dual has no feasible point; upstream state is broken."""


class DegenerateRecovery(ArithmeticError):
    """Primal recovery hit a vanishing denominator or inconsistent scaling."""


class ActiveSet:
    """Rows treated as equalities, their multipliers and ``(Â Q^{-1/2})^+``.

    After appending a row that is linearly dependent on the others, the
    inverse is left describing the first ``m - 1`` rows and ``dep_h`` holds
    the coefficients expressing the new row in terms of them.  The next
    deletion restores a full-rank inverse of all rows.
    """

    def __init__(self, a, b, lam, q_inv_half, pinv: PseudoInverse | None = None,
                 recompute_every: int = 500):
        self.a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        self.b = np.asarray(b, dtype=np.float64).ravel()
        self.lam = np.asarray(lam, dtype=np.float64).ravel()
        self.q_inv_half = q_inv_half
        self.aq = self.a @ q_inv_half
        self.dep_h: np.ndarray | None = None
        self.recompute_every = recompute_every
        self.updates = 0
        self.recomputes = 0
        if pinv is None:
            pinv = pinv_full(self.aq)
        self.pinv = pinv

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def copy(self) -> "ActiveSet":
        new = ActiveSet.__new__(ActiveSet)
        new.a = self.a.copy()
        new.b = self.b.copy()
        new.lam = self.lam.copy()
        new.q_inv_half = self.q_inv_half
        new.aq = self.aq.copy()
        new.dep_h = None if self.dep_h is None else self.dep_h.copy()
        new.recompute_every = self.recompute_every
        new.updates = self.updates
        new.recomputes = 0
        new.pinv = self.pinv.copy()
        return new

    def dual_value(self, lam=None) -> float:
        lam = self.lam if lam is None else lam
        return -float(self.b @ lam)

    def ellipsoid_vector(self, s, lam=None) -> np.ndarray:
        """``Q^{-1/2}(c + Â^T λ)`` with ``s = Q^{-1/2} c``."""
        lam = self.lam if lam is None else lam
        return s + self.aq.T @ lam

    def recompute(self) -> None:
        self.aq = self.a @ self.q_inv_half
        self.pinv = pinv_full(self.aq)
        self.dep_h = None
        self.updates = 0
        self.recomputes += 1

    def _count_update(self) -> None:
        self.updates += 1
        if self.updates >= self.recompute_every:
            self.recompute()

    def append(self, row, rhs: float) -> None:
        """Add ``row x <= rhs`` as active with multiplier zero."""
        row = np.asarray(row, dtype=np.float64).ravel()
        aq_row = row @ self.q_inv_half
        self.a = np.vstack([self.a, row])
        self.b = np.append(self.b, float(rhs))
        self.lam = np.append(self.lam, 0.0)
        self.aq = np.vstack([self.aq, aq_row])
        if self.dep_h is not None or not self.pinv.full_row_rank:
            self.recompute()
            return
        res = pinv_append_row(self.pinv, aq_row)
        if isinstance(res, RankDeficient):
            self.dep_h = res.h
        else:
            self.pinv = res
        self._count_update()

    def delete(self, j: int) -> None:
        """Remove row ``j`` (its multiplier must already be zero)."""
        m_old = self.m
        self.a = np.delete(self.a, j, axis=0)
        self.b = np.delete(self.b, j)
        self.lam = np.delete(self.lam, j)
        last = self.aq[-1].copy()
        self.aq = np.delete(self.aq, j, axis=0)
        try:
            if self.dep_h is not None:
                if j == m_old - 1 or not self.pinv.full_row_rank:
                    self.recompute()
                    return
                base = pinv_delete_row(self.pinv, j)
                res = pinv_append_row(base, last)
                if isinstance(res, RankDeficient):
                    self.recompute()
                    return
                self.pinv = res
                self.dep_h = None
            elif self.pinv.full_row_rank:
                self.pinv = pinv_delete_row(self.pinv, j)
            else:
                self.recompute()
                return
        except CorruptedPseudoInverse:
            self.recompute()
            return
        self._count_update()

    def full_pinv(self) -> PseudoInverse:
        """Inverse of all current rows (computed afresh if a dependent row is pending)."""
        if self.dep_h is None:
            return self.pinv
        return pinv_full(self.aq)


@dataclass
class Unbounded:
    """Steepest-ascent ray of the subproblem dual."""

    direction: np.ndarray


@dataclass
class BoundedOptimum:
    """Minimal-norm optimum of the subproblem dual."""

    lambda_tilde: np.ndarray
    value: float
    v_star: np.ndarray
    p_center: np.ndarray
    radius: float


@dataclass
class ZeroOptimal:
    """``b̂ = 0``: every feasible multiplier is optimal and ``x = 0`` solves the primal."""


def _unbounded_from_pending(aset: ActiveSet) -> np.ndarray:
    h = aset.dep_h
    kappa = (h @ aset.b[:-1] - aset.b[-1]) / (1.0 + h @ h)
    return kappa * np.append(-h, 1.0)


def solve_dual_subproblem(aset: ActiveSet, factor: SpdFactor, c) -> Unbounded | BoundedOptimum | ZeroOptimal:
    b = aset.b
    bnorm = float(np.linalg.norm(b))
    if aset.dep_h is not None:
        ray = _unbounded_from_pending(aset)
        if np.linalg.norm(ray) > KERNEL_TOL * (1.0 + bnorm):
            return Unbounded(ray)
        p = aset.full_pinv()
    else:
        p = aset.pinv
    mm, pinv = p.of, p.pinv

    g = pinv @ b
    kernel_part = mm @ g - b
    if np.linalg.norm(kernel_part) > KERNEL_TOL * (1.0 + bnorm):
        return Unbounded(kernel_part)
    if bnorm <= ZERO_RHS_TOL:
        return ZeroOptimal()

    s = factor.q_inv_half @ np.asarray(c, dtype=np.float64)
    p_center = pinv @ (mm @ s)
    gap = float(np.linalg.norm(p_center - s))
    if gap > 1.0 + DUAL_INFEASIBLE_SLACK:
        raise DualInfeasibleDetected(f"distance {gap:.6g} from the ball centre exceeds 1")
    radius = float(np.sqrt(max(0.0, 1.0 - gap * gap)))
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        raise DualInfeasibleDetected("right-hand side vanished under the pseudo-inverse")
    v_star = p_center + (radius / gnorm) * g
    lam = -(pinv.T @ v_star)
    return BoundedOptimum(lambda_tilde=lam, value=-float(b @ lam), v_star=v_star,
                          p_center=p_center, radius=radius)


def recover_primal(aset: ActiveSet, lambda_star, factor: SpdFactor, c) -> np.ndarray:
    """Primal optimum ``x* = α Q^{-1}(c + Â^T λ*)`` of the equality subproblem."""
    lam = np.asarray(lambda_star, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    s = factor.q_inv_half @ c
    u = s + aset.aq.T @ lam
    x_bar = factor.q_inv_half @ u
    b_lam = float(aset.b @ lam)
    if abs(b_lam) > CASE_A_TOL:
        # sqrt(x̄ᵀ Q x̄) = ||u||  and  cᵀ x̄ = sᵀ u
        denom = float(s @ u) - float(np.linalg.norm(u))
        if abs(denom) <= DENOMINATOR_TOL:
            raise DegenerateRecovery("vanishing denominator in the scaling factor")
        alpha = -b_lam / denom
    else:
        ax = aset.a @ x_bar
        j = int(np.argmax(np.abs(ax)))
        if ax.size == 0 or abs(ax[j]) <= DENOMINATOR_TOL:
            raise DegenerateRecovery("Â x̄ vanishes; no scaling reproduces b̂")
        alpha = aset.b[j] / ax[j]
        resid = float(np.linalg.norm(alpha * ax - aset.b))
        if resid > CASE_B_TOL * (1.0 + float(np.linalg.norm(aset.b))):
            raise DegenerateRecovery(f"inconsistent scaling, residual {resid:.3e}")
    return alpha * x_bar
