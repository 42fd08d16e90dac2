"""Extreme matrices of the subgraph polytopes, extraction masks and
projection distances.

For a subgraph on k vertices the three problems use
  - Max-Cut:    all cut matrices cc^T, c in {-1,1}^k with c_1 = +1
                (2^(k-1) of them; c and -c give the same matrix),
  - stable set: all ss^T over stable sets s of the subgraph (empty set
                included),
  - coloring:   all distinct SS^T over partitions of the vertices into
                stable sets.

The extraction mask lists the matrix positions that carry constraints:
every off-diagonal pair for Max-Cut, the diagonal plus non-edge pairs for
stable set, and non-edge pairs for coloring.  The (scatter, extract) pair
below is an exact adjoint under the trace inner product: extract reads a
diagonal slot as X_dd and an off-diagonal slot as 2*X_ij, while scatter
writes a value symmetrically to both triangles.  The rows of the D matrix
of a constraint block are the extracted extreme matrices, and everything
downstream (subgradients, trial-point recovery) uses this one convention.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import simplex_qp
from .graphs import Graph, induced_subgraph

PROBLEMS = ("maxcut", "stableset", "coloring")
MAX_SUBGRAPH_ORDER = 8


def _check_order(k):
    if not 1 <= k <= MAX_SUBGRAPH_ORDER:
        raise ValueError(f"subgraph order {k} outside [1,{MAX_SUBGRAPH_ORDER}]")


def enum_cut_matrices(k):
    """All distinct cut matrices of order k as a (2^(k-1), k, k) array."""
    _check_order(k)
    t = 1 << (k - 1)
    signs = np.ones((t, k))
    if k > 1:
        bits = (np.arange(t)[:, None] >> np.arange(k - 1)[None, :]) & 1
        signs[:, 1:] = 2.0 * bits - 1.0
    return np.einsum("ti,tj->tij", signs, signs)


def _stable_subsets(graph):
    nb = [0] * graph.n
    for i, j, _ in graph.edges:
        nb[i] |= 1 << j
        nb[j] |= 1 << i
    out = []
    for s in range(1 << graph.n):
        v, ok = s, True
        while v:
            low = v & -v
            i = low.bit_length() - 1
            if nb[i] & s:
                ok = False
                break
            v ^= low
        if ok:
            out.append(s)
    return out


def enum_stable_set_matrices(graph):
    """All ss^T over stable sets of the graph, the empty set first."""
    _check_order(graph.n)
    mats = []
    for s in _stable_subsets(graph):
        vec = np.array([(s >> i) & 1 for i in range(graph.n)], dtype=float)
        mats.append(np.outer(vec, vec))
    return np.array(mats)


def _set_partitions(k):
    """Set partitions of range(k) via restricted-growth strings."""
    a = [0] * k
    b = [1] * k  # b[i] = 1 + max(a[:i]); a[i] may grow up to b[i]
    while True:
        yield a
        j = k - 1
        while j > 0 and a[j] == b[j]:
            j -= 1
        if j == 0:
            return
        a[j] += 1
        nb = max(b[j], a[j] + 1)
        for i in range(j + 1, k):
            a[i] = 0
            b[i] = nb


def enum_coloring_matrices(graph):
    """Distinct coloring matrices SS^T over stable-set partitions of the graph.

    Deduplicated by canonical byte serialization of the 0/1 matrix; order of
    first appearance in restricted-growth-string order.
    """
    _check_order(graph.n)
    k = graph.n
    seen = {}
    for rgs in _set_partitions(k):
        nblocks = max(rgs) + 1
        classes = [0] * nblocks
        for v, c in enumerate(rgs):
            classes[c] |= 1 << v
        ok = True
        for i, j, _ in graph.edges:
            if rgs[i] == rgs[j]:
                ok = False
                break
        if not ok:
            continue
        x = np.zeros((k, k))
        for c in classes:
            vec = np.array([(c >> i) & 1 for i in range(k)], dtype=float)
            x += np.outer(vec, vec)
        key = x.astype(np.uint8).tobytes()
        if key not in seen:
            seen[key] = x
    return np.array(list(seen.values()))


@dataclass(frozen=True)
class Mask:
    """Constraint slots of a k x k symmetric matrix.

    rows/cols give the slot positions (rows == cols on diagonal slots);
    factor is 1 on diagonal slots and 2 off the diagonal, making
    (scatter, extract) an adjoint pair: <scatter(y), X> == <y, extract(X)>.
    """

    k: int
    rows: tuple
    cols: tuple

    @property
    def b(self):
        return len(self.rows)

    @cached_property
    def _r(self):
        return np.asarray(self.rows, dtype=int)

    @cached_property
    def _c(self):
        return np.asarray(self.cols, dtype=int)

    @cached_property
    def factor(self):
        return np.where(self._r == self._c, 1.0, 2.0)

    def extract(self, x):
        return x[self._r, self._c] * self.factor

    def scatter(self, y):
        out = np.zeros((self.k, self.k))
        out[self._r, self._c] = y
        out[self._c, self._r] = y
        return out


def extraction_mask(problem, subgraph):
    """Mask for one subgraph: slot order is diagonal first (stable set only),
    then off-diagonal pairs row-major."""
    k = subgraph.n
    rows, cols = [], []
    if problem == "stableset":
        rows += list(range(k))
        cols += list(range(k))
    for i in range(k):
        for j in range(i + 1, k):
            if problem == "maxcut" or not subgraph.has_edge(i, j):
                rows.append(i)
                cols.append(j)
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    return Mask(k, tuple(rows), tuple(cols))


@dataclass(frozen=True, eq=False)
class EscBlock:
    """One exact subgraph constraint: vertex set, extreme matrices, mask, D."""

    problem: str
    vertices: tuple      # 0-based
    mats: np.ndarray     # (t, k, k) extreme matrices
    mask: Mask
    dmat: np.ndarray     # (t, b); row i = extract(mats[i])

    @property
    def k(self):
        return len(self.vertices)

    @property
    def t(self):
        return self.mats.shape[0]

    @property
    def b(self):
        return self.mask.b

    @cached_property
    def gram(self):
        flat = self.mats.reshape(self.t, -1)
        return flat @ flat.T


@lru_cache(maxsize=4096)
def _polytope_core(problem, k, edge_key):
    sub = Graph(k, tuple((i, j, 1.0) for i, j in edge_key))
    if problem == "maxcut":
        mats = enum_cut_matrices(k)
    elif problem == "stableset":
        mats = enum_stable_set_matrices(sub)
    elif problem == "coloring":
        mats = enum_coloring_matrices(sub)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    mask = extraction_mask(problem, sub)
    if mask.b:
        dmat = mats[:, mask._r, mask._c] * mask.factor[None, :]
    else:
        dmat = np.zeros((mats.shape[0], 0))
    return mats, mask, dmat


def build_esc(problem, graph, vertices):
    """Constraint block for the induced subgraph on the given vertices."""
    vs = tuple(int(v) for v in vertices)
    _check_order(len(vs))
    sub = induced_subgraph(graph, vs)
    edge_key = tuple((i, j) for i, j, _ in sub.edges)
    mats, mask, dmat = _polytope_core(problem, sub.n, edge_key)
    return EscBlock(problem, vs, mats, mask, dmat)


def projection_distance(x_sub, esc, tol=1e-9, max_iter=5000):
    """Frobenius distance from x_sub to the convex hull of the extreme matrices.

    Returns (delta, lam, proj) where lam are the minimizing convex weights and
    proj = sum_i lam_i C_i.  delta == 0 (up to the QP tolerance) iff x_sub is
    in the hull.
    """
    t = esc.t
    flat = esc.mats.reshape(t, -1)
    q = flat @ np.asarray(x_sub, dtype=float).ravel()
    c0 = float(np.sum(x_sub * x_sub))
    gram = esc.gram
    qp = simplex_qp.BlockedQP(
        blocks=(("simplex", t),),
        hess_op=lambda v: 2.0 * (gram @ v),
        lin=-2.0 * q,
        const=c0,
    )
    lam, val = simplex_qp.minimize(qp, start=np.full(t, 1.0 / t), tol=tol, max_iter=max_iter)
    proj = np.tensordot(lam, esc.mats, axes=1)
    delta = float(np.sqrt(max(val, 0.0)))
    return delta, lam, proj
