"""Hot inner loops, each in two flavours.

Every kernel exists as an explicit-loop version compiled with ``numba.njit``
and a vectorised numpy version.  The numba path is used when numba imports
and the environment variable ``ELLBB_NUMBA`` is not set to a false-ish value
(``0``, ``false``, ``no``, ``off``).  Both paths compute the same thing; the
tests run them against each other and ``benchmarks/bench_kernels.py`` times
them.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_FALSEY = {"0", "false", "no", "off"}

NUMBA_AVAILABLE = numba is not None
BACKEND = (
    "numba"
    if NUMBA_AVAILABLE and os.environ.get("ELLBB_NUMBA", "1").strip().lower() not in _FALSEY
    else "numpy"
)


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# cyclic Jacobi eigendecomposition of a symmetric matrix
# ---------------------------------------------------------------------------


def _rotation(app, aqq, apq):
    theta = (aqq - app) / (2.0 * apq)
    if theta >= 0.0:
        t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
    else:
        t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


_rotation_jit = _njit(_rotation)


def _jacobi_loops(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if np.sqrt(off) <= tol:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation_jit(a[p, p], a[q, q], apq)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i]
    return w, v, sweeps


def _jacobi_numpy(a, tol, max_sweeps):
    n = a.shape[0]
    a = np.array(a, dtype=np.float64, copy=True)
    v = np.eye(n)
    iu = np.triu_indices(n, 1)
    sweeps = 0
    for _ in range(max_sweeps):
        if np.sqrt(np.sum(a[iu] ** 2)) <= tol:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                c, s = _rotation(a[p, p], a[q, q], apq)
                cols = a[:, [p, q]]
                a[:, p] = c * cols[:, 0] - s * cols[:, 1]
                a[:, q] = s * cols[:, 0] + c * cols[:, 1]
                rows = a[[p, q], :]
                a[p, :] = c * rows[0] - s * rows[1]
                a[q, :] = s * rows[0] + c * rows[1]
                a[p, q] = a[q, p] = 0.0
                vc = v[:, [p, q]]
                v[:, p] = c * vc[:, 0] - s * vc[:, 1]
                v[:, q] = s * vc[:, 0] + c * vc[:, 1]
    return np.diag(a).copy(), v, sweeps


# ---------------------------------------------------------------------------
# Edmonds-Karp max-flow on a dense integer capacity matrix
# ---------------------------------------------------------------------------

_BIG = np.int64(2) ** 62


def _edmonds_karp_loops(cap, s, t):
    n = cap.shape[0]
    res = cap.copy()
    parent = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    flow = np.int64(0)
    while True:
        for i in range(n):
            parent[i] = -1
        parent[s] = s
        head = 0
        tail = 1
        queue[0] = s
        while head < tail and parent[t] == -1:
            u = queue[head]
            head += 1
            for w in range(n):
                if parent[w] == -1 and res[u, w] > 0:
                    parent[w] = u
                    queue[tail] = w
                    tail += 1
        if parent[t] == -1:
            break
        bottleneck = _BIG
        w = t
        while w != s:
            u = parent[w]
            if res[u, w] < bottleneck:
                bottleneck = res[u, w]
            w = u
        w = t
        while w != s:
            u = parent[w]
            res[u, w] -= bottleneck
            res[w, u] += bottleneck
            w = u
        flow += bottleneck
    reach = np.empty(n, np.bool_)
    for i in range(n):
        reach[i] = parent[i] != -1
    return flow, reach


def _edmonds_karp_numpy(cap, s, t):
    n = cap.shape[0]
    res = np.array(cap, dtype=np.int64, copy=True)
    flow = 0
    while True:
        parent = np.full(n, -1, dtype=np.int64)
        parent[s] = s
        frontier = np.array([s])
        while frontier.size and parent[t] == -1:
            step = (res[frontier] > 0) & (parent == -1)[None, :]
            reached = step.any(axis=0)
            new = np.flatnonzero(reached)
            if new.size == 0:
                break
            parent[new] = frontier[np.argmax(step[:, new], axis=0)]
            frontier = new
        if parent[t] == -1:
            return np.int64(flow), parent != -1
        path = []
        w = t
        while w != s:
            path.append((parent[w], w))
            w = parent[w]
        u_idx = np.array([e[0] for e in path])
        w_idx = np.array([e[1] for e in path])
        bottleneck = res[u_idx, w_idx].min()
        np.subtract.at(res, (u_idx, w_idx), bottleneck)
        np.add.at(res, (w_idx, u_idx), bottleneck)
        flow += int(bottleneck)


# ---------------------------------------------------------------------------
# most violated row of A x <= b
# ---------------------------------------------------------------------------


def _most_violated_loops(a, b, x):
    m, n = a.shape
    best = -np.inf
    arg = -1
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        viol = acc - b[i]
        if viol > best:
            best = viol
            arg = i
    return arg, best


def _most_violated_numpy(a, b, x):
    if a.shape[0] == 0:
        return -1, -np.inf
    viol = a @ x - b
    arg = int(np.argmax(viol))
    return arg, float(viol[arg])


_IMPLS = {
    "jacobi": {"numpy": _jacobi_numpy, "numba": _njit(_jacobi_loops)},
    "edmonds_karp": {"numpy": _edmonds_karp_numpy, "numba": _njit(_edmonds_karp_loops)},
    "most_violated": {"numpy": _most_violated_numpy, "numba": _njit(_most_violated_loops)},
}


def implementation(kernel: str, backend: str | None = None):
    """Return the callable for ``kernel`` on ``backend`` (default: active)."""
    backend = backend or BACKEND
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not importable")
    return _IMPLS[kernel][backend]


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily switch the active backend (``"numba"`` or ``"numpy"``)."""
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not importable")
    saved = BACKEND
    BACKEND = name
    try:
        yield
    finally:
        BACKEND = saved


def jacobi_eigh(a: np.ndarray, tol: float, max_sweeps: int = 100):
    """Eigenvalues, eigenvectors and sweep count of symmetric ``a``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    return implementation("jacobi")(a, float(tol), int(max_sweeps))


def edmonds_karp(cap: np.ndarray, s: int, t: int):
    """Max-flow value and residual-reachable (source side) mask."""
    cap = np.ascontiguousarray(cap, dtype=np.int64)
    flow, reach = implementation("edmonds_karp")(cap, int(s), int(t))
    return int(flow), np.asarray(reach, dtype=bool)


def most_violated(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> tuple[int, float]:
    """Index of the row maximising ``a_i x - b_i`` (first on ties) and its value."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if a.shape[0] == 0:
        return -1, float("-inf")
    arg, viol = implementation("most_violated")(a, b, x)
    return int(arg), float(viol)
