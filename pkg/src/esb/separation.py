"""Search for violated subgraph constraints.

A probe matrix U of order k orients the search: any valid inequality
<U', X_I> >= c on the target polytope becomes, with U = -U', a direction in
which small values of <U, X_I> signal violation.  Candidate vertex sets are
found by a steepest-descent swap heuristic over assignments of k graph
vertices to the rows of U (replace one selected vertex by an outside one,
or transpose two positions), then every candidate is scored exactly by its
projection distance onto the polytope and the largest violations win.

Probe families, mixed deterministically per seed:
  - facet normals of the order-k polytope, obtained once per (problem, k)
    by a convex hull over the extreme matrices in masked coordinates
    (edgeless subgraph for stable set / coloring); only attempted while the
    masked dimension stays small enough for qhull,
  - hypermetric / patterned {0,1,-1} matrices,
  - random symmetric +-1 matrices filling the remaining slots.

For Max-Cut a violated block can be weakened to the single inequality
<X_I - proj, X_I> <= max_i <X_I - proj, C_i>, the separating hyperplane of
the projection; the violation then exceeds the squared distance.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .bundle import LinearCut
from .graphs import Graph
from .polytopes import (build_esc, enum_coloring_matrices, enum_cut_matrices,
                        enum_stable_set_matrices, extraction_mask, projection_distance)
from .rand import stream

VIOLATION_TOL = 5e-5
MAX_PROBES = 50
_HULL_DIM_CAP = 10
_HULL_POINT_CAP = 64


@dataclass(eq=False)
class ProbeMatrix:
    U: np.ndarray
    kind: str


@dataclass(eq=False)
class Violation:
    vertices: tuple
    delta: float
    lam: np.ndarray
    esc: object
    x_sub: np.ndarray
    proj: np.ndarray


def _normalize(u):
    nrm = np.linalg.norm(u)
    return u / nrm if nrm > 0 else u


@lru_cache(maxsize=64)
def _facet_normals(problem, k):
    """Hull facets of the order-k polytope in masked coordinates, as probe
    matrices oriented so that minimization hunts violations."""
    sub = Graph(k, ())
    if problem == "maxcut":
        mats = enum_cut_matrices(k)
    elif problem == "stableset":
        mats = enum_stable_set_matrices(sub)
    else:
        mats = enum_coloring_matrices(sub)
    mask = extraction_mask(problem, sub)
    if mask.b == 0 or mask.b > _HULL_DIM_CAP or mats.shape[0] > _HULL_POINT_CAP:
        return ()
    points = np.array([mask.extract(m) for m in mats])
    try:
        hull = ConvexHull(points)
    except QhullError:
        return ()
    normals = []
    seen = set()
    for eq in hull.equations:
        a = eq[:-1]
        key = tuple(np.round(a / max(np.linalg.norm(a), 1e-15), 9))
        if key in seen:
            continue
        seen.add(key)
        normals.append(_normalize(mask.scatter(-a)))
    return tuple(normals)


def _pattern_probes(problem, k, rng, budget):
    out = []
    if problem == "maxcut":
        # hypermetric directions b b' - I for odd-sum sign vectors
        for _ in range(budget):
            b = rng.integers(0, 2, size=k) * 2.0 - 1.0
            if int(b.sum()) % 2 == 0:
                b[rng.integers(k)] *= -1.0
            out.append(_normalize(np.outer(b, b) - np.eye(k)))
    else:
        dense = -np.ones((k, k))
        diag = -np.eye(k)
        cyc = np.zeros((k, k))
        for i in range(k):
            cyc[i, (i + 1) % k] = cyc[(i + 1) % k, i] = 1.0
        base = [dense, diag, dense + (k - 1) * diag, cyc - np.eye(k), -cyc]
        out = [_normalize(u) for u in base[:budget]]
    return out


def generate_probes(problem, k, seed, count=MAX_PROBES):
    """Deterministic-per-seed probe mix, at most count matrices."""
    if not 2 <= k:
        raise ValueError("probe order must be at least 2")
    count = min(count, MAX_PROBES)
    rng = stream(seed, "probes", problem, k)
    probes = [ProbeMatrix(u, "facet") for u in _facet_normals(problem, k)]
    probes = probes[:count]
    if len(probes) < count:
        budget = min((count - len(probes) + 1) // 2, count - len(probes))
        probes += [ProbeMatrix(u, "copositive")
                   for u in _pattern_probes(problem, k, rng, budget)]
    while len(probes) < count:
        u = np.triu(rng.integers(0, 2, size=(k, k)) * 2.0 - 1.0)
        u = u + np.triu(u, 1).T
        probes.append(ProbeMatrix(_normalize(u), "random"))
    return probes[:count]


def _subset_value(x, u, idx):
    return float(np.einsum("ab,ab->", u, x[np.ix_(idx, idx)]))


def _replace_deltas(x, u, idx, s):
    """delta[v, a] of objective when position a is reassigned to vertex v."""
    du = np.diag(u)
    xi = x[:, idx]                       # X[v, I_c]
    su = s[idx, np.arange(len(idx))]     # S[I_a, a]
    xd = np.diag(x)
    xd_i = xd[idx]
    rep = 2.0 * (s - du[None, :] * xi - su[None, :] + (du * xd_i)[None, :]) \
        + du[None, :] * (xd[:, None] - xd_i[None, :])
    rep[idx, :] = np.inf
    return rep


def _swap_deltas(x, u, idx, s):
    """delta[a, b] of objective when positions a and b exchange vertices."""
    k = len(idx)
    y = x[np.ix_(idx, idx)]
    m = u @ y
    dm = np.diag(m)
    du = np.diag(u)
    dy = np.diag(y)
    t1 = m + m.T - dm[:, None] - dm[None, :]
    ca = (u - du[:, None]) * (dy[:, None] - y)
    cb = (du[None, :] - u) * (y - dy[None, :])
    last = (du[:, None] - du[None, :]) * (dy[None, :] - dy[:, None])
    delta = 2.0 * (t1 - ca - cb) + last
    np.fill_diagonal(delta, np.inf)
    return delta


def local_search_min(x, u, k, starts=20, rng=None, max_passes=300):
    """Steepest-descent local minimizers of <U, X_I> over ordered k-subsets.

    Moves: replace one selected vertex by an outside vertex (keeping its
    position), or transpose two positions.  Returns deduplicated vertex sets
    as sorted tuples.
    """
    n = x.shape[0]
    if k >= n:
        return [tuple(range(n))]
    if rng is None:
        rng = stream(0, "starts")
    found = {}
    for _ in range(starts):
        idx = rng.choice(n, size=k, replace=False)
        for _ in range(max_passes):
            s = x[:, idx] @ u            # S[v, a] = sum_c U[a, c] X[v, I_c]
            rep = _replace_deltas(x, u, idx, s)
            swp = _swap_deltas(x, u, idx, s)
            rbest = np.unravel_index(np.argmin(rep), rep.shape)
            sbest = np.unravel_index(np.argmin(swp), swp.shape)
            if rep[rbest] <= swp[sbest]:
                best, move = rep[rbest], ("rep", rbest)
            else:
                best, move = swp[sbest], ("swp", sbest)
            if best >= -1e-12:
                break
            if move[0] == "rep":
                v, a = move[1]
                idx = idx.copy()
                idx[a] = v
            else:
                a, b = move[1]
                idx = idx.copy()
                idx[a], idx[b] = idx[b], idx[a]
        found[tuple(sorted(int(v) for v in idx))] = True
    return list(found.keys())


def _num_threads():
    try:
        return max(1, int(os.environ.get("ESB_THREADS", "1")))
    except ValueError:
        return 1


def find_violations(x, graph, problem, k, limit, tol=VIOLATION_TOL, seed=0,
                    exclude=(), count=MAX_PROBES, starts=20):
    """Most violated subgraph constraints of order k for the matrix x.

    Candidates from all probes are pooled, deduplicated and scored by exact
    projection distance; those above tol are ranked by decreasing distance
    (ties by vertex set) and truncated to limit.  Vertex sets in exclude are
    skipped.  Deterministic for fixed (x, seed, parameters).
    """
    if k > graph.n:
        return []
    probes = generate_probes(problem, k, seed, count)
    excluded = {tuple(sorted(i)) for i in exclude}

    def search(item):
        pidx, probe = item
        rng = stream(seed, "starts", problem, k, pidx)
        return local_search_min(x, probe.U, k, starts=starts, rng=rng)

    threads = _num_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(search, enumerate(probes)))
    else:
        results = [search(p) for p in enumerate(probes)]

    candidates = sorted({idx for res in results for idx in res} - excluded)
    out = []
    for idx in candidates:
        esc = build_esc(problem, graph, idx)
        x_sub = x[np.ix_(idx, idx)]
        delta, lam, proj = projection_distance(x_sub, esc)
        if delta > tol:
            out.append(Violation(vertices=idx, delta=delta, lam=lam, esc=esc,
                                 x_sub=x_sub, proj=proj))
    out.sort(key=lambda v: (-v.delta, v.vertices))
    return out[:limit]


def weaken_to_cut(violation):
    """Single separating inequality for a violated Max-Cut block.

    The normal is the projection residual X_I - proj; every cut matrix
    satisfies <A, C_i> <= rhs while <A, X_I> >= rhs + delta^2.
    """
    if violation.delta <= 0:
        raise ValueError("no separating hyperplane for delta == 0")
    a = violation.x_sub - violation.proj
    esc = violation.esc
    rhs = float(np.max(esc.mats.reshape(esc.t, -1) @ a.ravel()))
    return LinearCut(vertices=violation.vertices, normal=a, rhs=rhs)
