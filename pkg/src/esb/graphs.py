"""Graph data model, instance readers/writers and generators.

Vertices are stored 0-based internally; the DIMACS and weighted edge-list
formats are 1-based, converted only at the parse/emit boundary.  Dense
symmetric matrices throughout the package are plain float64 numpy arrays,
exactly symmetric by construction.

The Max-Cut objective matrix is L/4 (quarter Laplacian) so that the inner
product with a cut matrix cc^T equals the weight of the cut; all reported
Max-Cut values use this convention.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rand import stream


class ParseError(ValueError):
    """Malformed graph file; the message names the offending line."""


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph; edges stored as (i, j, w) with 0 <= i < j < n."""

    n: int
    edges: tuple
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        norm = []
        seen = set()
        for i, j, w in self.edges:
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise ValueError(f"loop at vertex {i}")
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
            norm.append((i, j, w))
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def m(self):
        return len(self.edges)

    @cached_property
    def adjacency(self):
        a = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            a[i, j] = a[j, i] = w
        return a

    @cached_property
    def edge_set(self):
        return frozenset((i, j) for i, j, _ in self.edges)

    def has_edge(self, i, j):
        if i > j:
            i, j = j, i
        return (i, j) in self.edge_set


def make_graph(n, pairs, weights=None, name=""):
    """Graph from 0-based vertex pairs, unit weights unless given."""
    if weights is None:
        weights = [1.0] * len(pairs)
    edges = tuple((min(i, j), max(i, j), w) for (i, j), w in zip(pairs, weights))
    return Graph(n, edges, name)


def parse_dimacs(text, name=""):
    """Read a DIMACS .col stream: 'c' comments, one 'p edge n m' line, 'e i j' lines.

    Edge weights are 1; duplicate edge lines collapse to one edge.
    """
    n = None
    pairs = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        tok = line.split()
        if tok[0] == "p":
            if n is not None:
                raise ParseError(f"line {lineno}: second 'p' line")
            if len(tok) != 4 or tok[1] != "edge":
                raise ParseError(f"line {lineno}: expected 'p edge n m'")
            try:
                n, _m = int(tok[2]), int(tok[3])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed 'p' line") from None
        elif tok[0] == "e":
            if n is None:
                raise ParseError(f"line {lineno}: edge before 'p' line")
            if len(tok) != 3:
                raise ParseError(f"line {lineno}: expected 'e i j'")
            try:
                i, j = int(tok[1]), int(tok[2])
            except ValueError:
                raise ParseError(f"line {lineno}: malformed edge line") from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise ParseError(f"line {lineno}: vertex index out of [1,{n}]")
            if i == j:
                raise ParseError(f"line {lineno}: loop edge ({i},{i})")
            pairs.add((min(i, j) - 1, max(i, j) - 1))
        else:
            raise ParseError(f"line {lineno}: unknown line type {tok[0]!r}")
    if n is None:
        raise ParseError("missing 'p edge n m' line")
    edges = tuple((i, j, 1.0) for i, j in sorted(pairs))
    return Graph(n, edges, name)


def parse_weighted_edge_list(text, name=""):
    """Read 'n m' followed by m lines 'i j w' (1-based ids, real weights)."""
    lines = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    lineno, head = lines[0]
    tok = head.split()
    if len(tok) != 2:
        raise ParseError(f"line {lineno}: expected 'n m'")
    try:
        n, m = int(tok[0]), int(tok[1])
    except ValueError:
        raise ParseError(f"line {lineno}: malformed header") from None
    body = lines[1:]
    if len(body) != m:
        raise ParseError(f"expected {m} edge lines, found {len(body)}")
    edges = []
    seen = set()
    for lineno, ln in body:
        tok = ln.split()
        if len(tok) != 3:
            raise ParseError(f"line {lineno}: expected 'i j w'")
        try:
            i, j, w = int(tok[0]), int(tok[1]), float(tok[2])
        except ValueError:
            raise ParseError(f"line {lineno}: malformed edge line") from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(f"line {lineno}: vertex index out of [1,{n}]")
        if i == j:
            raise ParseError(f"line {lineno}: loop edge ({i},{i})")
        key = (min(i, j) - 1, max(i, j) - 1)
        if key in seen:
            raise ParseError(f"line {lineno}: duplicate edge ({i},{j})")
        seen.add(key)
        edges.append((key[0], key[1], w))
    return Graph(n, tuple(edges), name)


def write_weighted_edge_list(graph):
    """Serialize to the weighted edge-list format, bit-exactly reproducible.

    Integers are written unpadded, fields space-separated, lines end with \\n.
    """
    def fmt(w):
        return str(int(w)) if float(w).is_integer() else repr(w)

    out = [f"{graph.n} {graph.m}\n"]
    for i, j, w in graph.edges:
        out.append(f"{i + 1} {j + 1} {fmt(w)}\n")
    return "".join(out)


def gen_torus(d):
    """d x d torus grid: n = d^2 vertices, m = 2n edges, 4-regular."""
    if d < 3:
        raise ValueError("torus needs d >= 3")
    pairs = set()
    for i in range(d):
        for j in range(d):
            v = i * d + j
            for u in (((i + 1) % d) * d + j, i * d + (j + 1) % d):
                pairs.add((min(v, u), max(v, u)))
    edges = tuple((i, j, 1.0) for i, j in sorted(pairs))
    return Graph(d * d, edges, name=f"torus_d{d}")


def gen_near_regular(n, r, seed):
    """Near-r-regular graph: random perfect matching on n*r points, groups of r
    contracted to one vertex, loops and multi-edges removed."""
    if (n * r) % 2 != 0:
        raise ValueError("n*r must be even")
    rng = stream(seed, "near_regular", n, r)
    perm = rng.permutation(n * r)
    pairs = set()
    for t in range(0, n * r, 2):
        a, b = perm[t] // r, perm[t + 1] // r
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    edges = tuple((int(i), int(j), 1.0) for i, j in sorted(pairs))
    return Graph(n, edges, name=f"reg_n{n}_r{r}_s{seed}")


def gen_erdos_renyi(n, p, seed, weights="unit"):
    """G(n,p): each pair independently with probability p; 'pm1' assigns each
    kept edge weight +1 or -1 with probability 1/2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0,1]")
    if weights not in ("unit", "pm1"):
        raise ValueError("weights must be 'unit' or 'pm1'")
    rng = stream(seed, "er", n, p)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    iu, ju = iu[keep], ju[keep]
    if weights == "pm1":
        w = rng.integers(0, 2, size=iu.size) * 2.0 - 1.0
    else:
        w = np.ones(iu.size)
    edges = tuple((int(i), int(j), float(wk)) for i, j, wk in zip(iu, ju, w))
    return Graph(n, edges, name=f"er_n{n}_p{p}_s{seed}")


def laplacian(graph):
    """Weighted Laplacian L = D - A; row sums are exactly zero."""
    a = graph.adjacency
    return np.diag(a.sum(axis=1)) - a


def complement(graph):
    pairs = [(i, j) for i in range(graph.n) for j in range(i + 1, graph.n)
             if (i, j) not in graph.edge_set]
    return make_graph(graph.n, pairs, name=f"{graph.name}_complement")


def induced_subgraph(graph, vertices):
    """Relabeled subgraph on the given (distinct, 0-based) vertices, preserving order."""
    vs = list(vertices)
    if len(set(vs)) != len(vs):
        raise ValueError("duplicate vertices in selection")
    for v in vs:
        if not (0 <= v < graph.n):
            raise ValueError(f"vertex {v} out of range")
    pos = {v: a for a, v in enumerate(vs)}
    edges = []
    for i, j, w in graph.edges:
        if i in pos and j in pos:
            a, b = pos[i], pos[j]
            edges.append((min(a, b), max(a, b), w))
    return Graph(len(vs), tuple(sorted(edges)), name=f"{graph.name}[{len(vs)}]")
