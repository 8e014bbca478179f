"""Seeded instance generators and the text instance format.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; the same
(family, size, seed) triple always yields byte-identical files.

File format (version 1), one item per line, ``#`` starts a comment::

    ellbb-instance 1
    family <random|grid-sp|assignment|mst|mst-grid|tsp>
    label <text>
    n <int>
    seed <int>
    size <int> [<int>]
    c
    <n reals>
    q
    <row i: i+1 reals, lower triangle>       (n lines)
    box
    <n lower bounds>
    <n upper bounds>
    rows <m>                                 (family random)
    <n coefficients> <rhs>                   (m lines)
    graph <kind> <param>                     (graph families)
    edges <E>
    <u> <v>                                  (E lines)
    end

Reals are written with ``repr`` (shortest round-trip decimal), so reading a
file back reproduces every bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .linalg import LinalgError, spd_sqrt_inverse
from .oracles import BoxedOracle, ExplicitRowsOracle, GraphModel, GraphOracle, SeparationOracle

__all__ = [
    "Instance",
    "InstanceFormatError",
    "FAMILIES",
    "make_rng",
    "gen_q",
    "gen_random_binary",
    "gen_grid_sp",
    "gen_assignment",
    "gen_mst_complete",
    "gen_mst_grid",
    "gen_tsp",
    "generate",
    "grid_sp_model",
    "assignment_model",
    "complete_model",
    "grid_model",
    "write_instance",
    "read_instance",
    "format_instance",
    "parse_instance",
    "model_row_count",
]

FORMAT_VERSION = 1
EIG_MIN = 1e-6
FAMILIES = ("random", "grid-sp", "assignment", "mst", "mst-grid", "tsp")


class InstanceFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Instance:
    family: str
    label: str
    c: np.ndarray
    q: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    seed: int = 0
    size: tuple[int, ...] = ()
    rows_a: np.ndarray | None = None
    rows_b: np.ndarray | None = None
    graph: GraphModel | None = None

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def oracle(self) -> SeparationOracle:
        if self.graph is not None:
            return GraphOracle(self.graph)
        return ExplicitRowsOracle(self.rows_a, self.rows_b)

    def boxed_oracle(self, lower=None, upper=None) -> BoxedOracle:
        return BoxedOracle(self.oracle(),
                           self.lower if lower is None else lower,
                           self.upper if upper is None else upper)

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(self.c @ x) + float(np.sqrt(max(0.0, x @ self.q @ x)))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def gen_q(n: int, rng: np.random.Generator) -> np.ndarray:
    """``Q = sum_i λ_i v_i v_i^T`` with λ_i ~ U[0,1] (floored) and orthonormalised v_i ~ U[-1,1]^n."""
    if n < 1:
        raise ValueError("n must be positive")
    lam = np.empty(n)
    for i in range(n):
        val = rng.uniform(0.0, 1.0)
        while val < EIG_MIN:
            val = rng.uniform(0.0, 1.0)
        lam[i] = val
    basis = np.empty((n, n))
    for i in range(n):
        while True:
            v = rng.uniform(-1.0, 1.0, size=n)
            norm0 = np.linalg.norm(v)
            for j in range(i):
                v -= (basis[j] @ v) * basis[j]
            norm = np.linalg.norm(v)
            if norm > 1e-8 * max(norm0, 1.0):
                basis[i] = v / norm
                break
    q = (basis.T * lam) @ basis
    return 0.5 * (q + q.T)


def grid_sp_model(r: int) -> GraphModel:
    """Directed r x r grid, edges pointing right and down, s top-left, t bottom-right."""
    if r < 2:
        raise ValueError("grid needs r >= 2")
    edges = []
    for i in range(r):
        for j in range(r):
            v = i * r + j
            if j + 1 < r:
                edges.append((v, v + 1))
            if i + 1 < r:
                edges.append((v, v + r))
    return GraphModel("grid-sp", r, r * r, np.array(edges), directed=True, source=0, sink=r * r - 1)


def assignment_model(v: int) -> GraphModel:
    """Complete bipartite graph on ``v`` vertices split into halves ``0..k-1`` and ``k..2k-1``."""
    if v < 2 or v % 2:
        raise ValueError("assignment needs an even number of vertices >= 2")
    k = v // 2
    edges = [(i, k + j) for i in range(k) for j in range(k)]
    return GraphModel("assignment", v, v, np.array(edges))


def complete_model(kind: str, v: int) -> GraphModel:
    if v < 3:
        raise ValueError("complete graph needs at least 3 vertices")
    edges = [(i, j) for i in range(v) for j in range(i + 1, v)]
    return GraphModel(kind, v, v, np.array(edges))


def grid_model(kind: str, r: int) -> GraphModel:
    """Undirected r x r grid graph."""
    if r < 2:
        raise ValueError("grid needs r >= 2")
    directed = grid_sp_model(r)
    return GraphModel(kind, r, r * r, directed.edges)


def _graph_instance(family: str, model: GraphModel, size: int, seed: int) -> Instance:
    rng = make_rng(seed)
    n = model.n_edges
    q = gen_q(n, rng)
    return Instance(
        family=family,
        label=f"{family}-{size}-s{seed}",
        c=np.ones(n),
        q=q,
        lower=np.zeros(n),
        upper=np.ones(n),
        seed=seed,
        size=(size,),
        graph=model,
    )


def gen_random_binary(n: int, m: int, seed: int) -> Instance:
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = make_rng(seed)
    q = gen_q(n, rng)
    c = rng.uniform(-1.0, 1.0, size=n)
    a = rng.integers(0, 10, size=(m, n), endpoint=True).astype(np.float64)
    b = np.floor(0.5 * a.sum(axis=1))
    return Instance(
        family="random",
        label=f"random-{n}x{m}-s{seed}",
        c=c,
        q=q,
        lower=np.zeros(n),
        upper=np.ones(n),
        seed=seed,
        size=(n, m),
        rows_a=a,
        rows_b=b,
    )


def gen_grid_sp(r: int, seed: int) -> Instance:
    return _graph_instance("grid-sp", grid_sp_model(r), r, seed)


def gen_assignment(v: int, seed: int) -> Instance:
    return _graph_instance("assignment", assignment_model(v), v, seed)


def gen_mst_complete(v: int, seed: int) -> Instance:
    return _graph_instance("mst", complete_model("mst", v), v, seed)


def gen_mst_grid(r: int, seed: int) -> Instance:
    return _graph_instance("mst-grid", grid_model("mst-grid", r), r, seed)


def gen_tsp(v: int, seed: int) -> Instance:
    return _graph_instance("tsp", complete_model("tsp", v), v, seed)


def generate(family: str, size: int, seed: int, m: int | None = None) -> Instance:
    if family == "random":
        if m is None:
            raise ValueError("family 'random' needs m")
        return gen_random_binary(size, m, seed)
    makers = {
        "grid-sp": gen_grid_sp,
        "assignment": gen_assignment,
        "mst": gen_mst_complete,
        "mst-grid": gen_mst_grid,
        "tsp": gen_tsp,
    }
    if family not in makers:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    return makers[family](size, seed)


def _model_for(kind: str, param: int) -> GraphModel:
    if kind == "grid-sp":
        return grid_sp_model(param)
    if kind == "assignment":
        return assignment_model(param)
    if kind in ("mst", "tsp"):
        return complete_model(kind, param)
    if kind == "mst-grid":
        return grid_model(kind, param)
    raise ValueError(f"unknown graph kind {kind!r}")


def model_row_count(inst: Instance) -> int:
    """Size of the full linear description, counted the way the benchmark tables do."""
    n = inst.n
    if inst.family == "random":
        return int(inst.rows_b.shape[0])
    g = inst.graph
    v = g.n_vertices
    if inst.family == "grid-sp":
        r = g.param
        return 4 * r * r - 2 * r
    if inst.family == "assignment":
        return v + n
    if inst.family in ("mst", "mst-grid"):
        return 2**v + n
    if inst.family == "tsp":
        return 2**v + 3 * n - 2
    raise ValueError(inst.family)


def count_grid_paths(r: int) -> int:
    return comb(2 * (r - 1), r - 1)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def _reals(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def format_instance(inst: Instance) -> str:
    n = inst.n
    out = [
        f"ellbb-instance {FORMAT_VERSION}",
        f"family {inst.family}",
        f"label {inst.label}",
        f"n {n}",
        f"seed {inst.seed}",
        "size " + " ".join(str(int(s)) for s in inst.size),
        "c",
        _reals(inst.c),
        "q",
    ]
    for i in range(n):
        out.append(_reals(inst.q[i, : i + 1]))
    out += ["box", _reals(inst.lower), _reals(inst.upper)]
    if inst.graph is None:
        out.append(f"rows {inst.rows_b.shape[0]}")
        for row, rhs in zip(inst.rows_a, inst.rows_b):
            out.append(_reals(row) + " " + repr(float(rhs)))
    else:
        g = inst.graph
        out.append(f"graph {g.kind} {g.param}")
        out.append(f"edges {g.n_edges}")
        out += [f"{u} {v}" for u, v in g.edges]
    out.append("end")
    return "\n".join(out) + "\n"


def write_instance(path, inst: Instance) -> None:
    Path(path).write_text(format_instance(inst), encoding="utf-8")


class _Lines:
    def __init__(self, text: str):
        self.items = []
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                self.items.append((no, line))
        self.pos = 0

    def next(self, what: str) -> tuple[int, str]:
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise InstanceFormatError(f"unexpected end of file, expected {what}", last + 1)
        item = self.items[self.pos]
        self.pos += 1
        return item

    def keyword(self, key: str) -> tuple[int, list[str]]:
        no, line = self.next(key)
        parts = line.split()
        if parts[0] != key:
            raise InstanceFormatError(f"expected '{key}', found '{parts[0]}'", no)
        return no, parts[1:]

    def reals(self, count: int, what: str) -> np.ndarray:
        no, line = self.next(what)
        try:
            vals = np.array([float(t) for t in line.split()])
        except ValueError as exc:
            raise InstanceFormatError(f"bad number in {what}: {exc}", no) from None
        if vals.shape[0] != count:
            raise InstanceFormatError(f"{what}: expected {count} values, found {vals.shape[0]}", no)
        if not np.all(np.isfinite(vals)):
            raise InstanceFormatError(f"{what}: non-finite value", no)
        return vals


def _int(tok: list[str], no: int, what: str) -> int:
    if len(tok) != 1:
        raise InstanceFormatError(f"{what}: expected one integer", no)
    try:
        return int(tok[0])
    except ValueError:
        raise InstanceFormatError(f"{what}: not an integer: {tok[0]!r}", no) from None


def parse_instance(text: str) -> Instance:
    ln = _Lines(text)
    no, ver = ln.keyword("ellbb-instance")
    if ver != [str(FORMAT_VERSION)]:
        raise InstanceFormatError(f"unsupported format version {' '.join(ver)}", no)
    no, fam = ln.keyword("family")
    if len(fam) != 1 or fam[0] not in FAMILIES:
        raise InstanceFormatError(f"unknown family {' '.join(fam)!r}", no)
    family = fam[0]
    no, lab = ln.keyword("label")
    label = " ".join(lab)
    no, tok = ln.keyword("n")
    n = _int(tok, no, "n")
    if n < 1:
        raise InstanceFormatError("n must be positive", no)
    no, tok = ln.keyword("seed")
    seed = _int(tok, no, "seed")
    no, tok = ln.keyword("size")
    try:
        size = tuple(int(t) for t in tok)
    except ValueError:
        raise InstanceFormatError("size: integers expected", no) from None
    ln.keyword("c")
    c = ln.reals(n, "c")
    q_no, _ = ln.keyword("q")
    q = np.zeros((n, n))
    for i in range(n):
        row = ln.reals(i + 1, f"q row {i}")
        q[i, : i + 1] = row
        q[: i + 1, i] = row
    try:
        spd_sqrt_inverse(q)
    except LinalgError as exc:
        raise InstanceFormatError(f"q is not positive definite: {exc}", q_no) from None
    ln.keyword("box")
    lower = ln.reals(n, "box lower")
    upper = ln.reals(n, "box upper")
    no, _ = ln.items[ln.pos] if ln.pos < len(ln.items) else (None, None)
    inst = Instance(family=family, label=label, c=c, q=q, lower=lower, upper=upper,
                    seed=seed, size=size)
    if family == "random":
        no, tok = ln.keyword("rows")
        m = _int(tok, no, "rows")
        a = np.empty((m, n))
        b = np.empty(m)
        for i in range(m):
            vals = ln.reals(n + 1, f"row {i}")
            a[i], b[i] = vals[:n], vals[n]
        inst.rows_a, inst.rows_b = a, b
    else:
        no, tok = ln.keyword("graph")
        if len(tok) != 2 or tok[0] != family:
            raise InstanceFormatError("graph descriptor must be '<family> <param>'", no)
        try:
            model = _model_for(tok[0], int(tok[1]))
        except ValueError as exc:
            raise InstanceFormatError(str(exc), no) from None
        no, tok = ln.keyword("edges")
        ne = _int(tok, no, "edges")
        edges = np.empty((ne, 2), dtype=np.int64)
        for e in range(ne):
            no, line = ln.next(f"edge {e}")
            parts = line.split()
            if len(parts) != 2:
                raise InstanceFormatError("edge line needs two vertex indices", no)
            try:
                edges[e] = [int(parts[0]), int(parts[1])]
            except ValueError:
                raise InstanceFormatError("edge endpoints must be integers", no) from None
        if ne != model.n_edges or not np.array_equal(edges, model.edges):
            raise InstanceFormatError("edge list does not match the graph descriptor", no)
        if model.n_edges != n:
            raise InstanceFormatError(f"graph has {model.n_edges} edges but n = {n}", no)
        inst.graph = model
    ln.keyword("end")
    if ln.pos != len(ln.items):
        raise InstanceFormatError("trailing content after 'end'", ln.items[ln.pos][0])
    return inst


def read_instance(path) -> Instance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))
