"""Dense linear algebra used by the active-set solver.

``Q^{-1/2}`` comes from a cyclic Jacobi eigendecomposition.  The
pseudo-inverse of the active rows is kept as an object that grows or shrinks
by one row in O(mn); the subproblem formulas use it through the kernel and
range projections at the bottom of this file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "LinalgError",
    "NotPositiveDefinite",
    "NotSymmetric",
    "DimensionMismatch",
    "CorruptedPseudoInverse",
    "SpdFactor",
    "PseudoInverse",
    "RankDeficient",
    "spd_sqrt_inverse",
    "pinv_full",
    "pinv_append_row",
    "pinv_delete_row",
    "project_kernel",
    "project_range",
    "moore_penrose_residuals",
    "RANK_TOL",
    "SVD_CUTOFF",
]

# relative threshold on ||v|| deciding whether an appended row is independent
RANK_TOL = 1e-9
# singular values below SVD_CUTOFF * sigma_max are treated as zero
SVD_CUTOFF = 1e-11
SYMMETRY_TOL = 1e-10
EIG_FLOOR = 1e-12


class LinalgError(ValueError):
    pass


class NotPositiveDefinite(LinalgError):
    pass


class NotSymmetric(LinalgError):
    pass


class DimensionMismatch(LinalgError):
    pass


class CorruptedPseudoInverse(LinalgError):
    """The incremental state no longer matches a full-row-rank inverse."""


@dataclass
class SpdFactor:
    """A positive definite ``q`` together with its symmetric square roots."""

    q: np.ndarray
    q_inv_half: np.ndarray
    q_half: np.ndarray
    eigenvalues: np.ndarray
    _q_inv: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def q_inv(self) -> np.ndarray:
        if self._q_inv is None:
            self._q_inv = self.q_inv_half @ self.q_inv_half
        return self._q_inv


def spd_sqrt_inverse(q) -> SpdFactor:
    """Factor a symmetric positive definite matrix.

    The eigendecomposition is done with cyclic Jacobi rotations; ``Q^{-1/2}``
    and ``Q^{1/2}`` are assembled from it.

    Raises
    ------
    NotSymmetric
        If ``max|q - q^T|`` exceeds ``1e-10 * max(1, max|q|)``.
    NotPositiveDefinite
        If any eigenvalue is at or below ``1e-12 * trace(q) / n``.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise LinalgError("matrix has non-finite entries")
    n = q.shape[0]
    scale = max(1.0, float(np.max(np.abs(q))))
    if np.max(np.abs(q - q.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric")
    qs = 0.5 * (q + q.T)
    trace = float(np.trace(qs))
    if trace <= 0.0:
        raise NotPositiveDefinite("trace is not positive")
    w, v, _ = _kernels.jacobi_eigh(qs, tol=1e-15 * np.linalg.norm(qs))
    floor = EIG_FLOOR * trace / n
    if np.min(w) <= floor:
        raise NotPositiveDefinite(f"smallest eigenvalue {np.min(w):.3e} is below {floor:.3e}")
    root = np.sqrt(w)
    q_inv_half = (v / root) @ v.T
    q_half = (v * root) @ v.T
    q_inv_half = 0.5 * (q_inv_half + q_inv_half.T)
    q_half = 0.5 * (q_half + q_half.T)
    return SpdFactor(q=qs, q_inv_half=q_inv_half, q_half=q_half, eigenvalues=w)


@dataclass
class PseudoInverse:
    """``pinv`` is the Moore-Penrose inverse of ``of`` (shape m x n -> n x m)."""

    of: np.ndarray
    pinv: np.ndarray
    full_row_rank: bool

    @property
    def rows(self) -> int:
        return self.of.shape[0]

    @property
    def cols(self) -> int:
        return self.of.shape[1]

    def copy(self) -> "PseudoInverse":
        return PseudoInverse(self.of.copy(), self.pinv.copy(), self.full_row_rank)


@dataclass
class RankDeficient:
    """Appending the row would make the matrix rank deficient.

    ``h`` is the coefficient vector with ``new_row = h @ M`` (up to ``RANK_TOL``).
    """

    h: np.ndarray


def pinv_full(m) -> PseudoInverse:
    """Pseudo-inverse from scratch via a truncated SVD."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    rows, cols = m.shape
    if rows == 0:
        return PseudoInverse(m.reshape(0, cols).copy(), np.zeros((cols, 0)), True)
    if not np.all(np.isfinite(m)):
        raise LinalgError("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return PseudoInverse(m.copy(), np.zeros((cols, rows)), False)
    keep = s > SVD_CUTOFF * s[0]
    rank = int(np.count_nonzero(keep))
    pinv = (vt[keep].T / s[keep]) @ u[:, keep].T
    return PseudoInverse(m.copy(), pinv, rank == rows)


def pinv_append_row(p: PseudoInverse, new_row) -> PseudoInverse | RankDeficient:
    """Greville-type update for ``[M; a]`` when ``M`` has full row rank."""
    a = np.asarray(new_row, dtype=np.float64).ravel()
    if a.shape[0] != p.cols:
        raise DimensionMismatch(f"row has {a.shape[0]} entries, matrix has {p.cols} columns")
    if not p.full_row_rank:
        raise CorruptedPseudoInverse("append requires a full-row-rank inverse")
    h = a @ p.pinv
    v = a - h @ p.of
    vv = float(v @ v)
    if np.sqrt(vv) <= RANK_TOL * (1.0 + np.linalg.norm(a)):
        return RankDeficient(h)
    # (M^+ | 0) - v^T (h | -1) / ||v||^2
    pinv = np.empty((p.cols, p.rows + 1))
    pinv[:, :-1] = p.pinv - np.outer(v, h) / vv
    pinv[:, -1] = v / vv
    return PseudoInverse(np.vstack([p.of, a]), pinv, True)


def pinv_delete_row(p: PseudoInverse, r: int) -> PseudoInverse:
    """Drop row ``r`` of a full-row-rank ``M`` and update its inverse."""
    if not 0 <= r < p.rows:
        raise IndexError(f"row {r} out of range for {p.rows} rows")
    if not p.full_row_rank:
        raise CorruptedPseudoInverse("delete requires a full-row-rank inverse")
    w = p.pinv[:, r]
    ww = float(w @ w)
    if np.sqrt(ww) < 1e-14:
        raise CorruptedPseudoInverse(f"column {r} of the inverse vanished")
    updated = p.pinv - np.outer(w, w @ p.pinv) / ww
    return PseudoInverse(np.delete(p.of, r, axis=0), np.delete(updated, r, axis=1), True)


def project_kernel(p: PseudoInverse, y) -> np.ndarray:
    """Project ``y`` (length = rows) onto ``ker(M^T)``: ``y - M M^+ y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != p.rows:
        raise DimensionMismatch(f"vector has {y.shape[0]} entries, expected {p.rows}")
    return y - p.of @ (p.pinv @ y)


def project_range(p: PseudoInverse, y) -> np.ndarray:
    """Project ``y`` (length = cols) onto the row space of ``M``: ``M^+ M y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != p.cols:
        raise DimensionMismatch(f"vector has {y.shape[0]} entries, expected {p.cols}")
    return p.pinv @ (p.of @ y)


def moore_penrose_residuals(m, pinv) -> tuple[float, float, float, float]:
    """Spectral-norm residuals of the four Penrose conditions."""
    m = np.asarray(m, dtype=np.float64)
    pinv = np.asarray(pinv, dtype=np.float64)
    mp = m @ pinv
    pm = pinv @ m

    def nrm(x):
        return float(np.linalg.norm(x, 2)) if x.size else 0.0

    return (
        nrm(mp @ m - m),
        nrm(pm @ pinv - pinv),
        nrm(mp.T - mp),
        nrm(pm.T - pm),
    )
