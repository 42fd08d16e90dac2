"""Outer cycle loop producing exact subgraph bounds, with warm starts
between cycles, plus the combinatorial heuristics and report emission.

Each cycle minimizes the dual for the current constraint set with the
bundle method, prunes blocks whose multipliers went inactive, separates new
violated blocks of the current order k on the aggregated primal matrix, and
escalates k when too few violations are found.  For Max-Cut the default
mode replaces each violated block by its single separating inequality,
which keeps the master problem small while thousands of constraints
accumulate; full blocks remain available behind a flag.

Every cycle's dual value is a valid bound, so the best bound is the running
optimum over cycles: minimum for the maximization problems, maximum for
coloring (whose internal sign is flipped back at this boundary, reporting a
lower bound on the chromatic number).
"""

import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import bundle as bd
from . import sdp_oracle as so
from . import separation as sep
from .rand import stream

INACTIVE_TOL = 1e-8


@dataclass
class EsbParams:
    problem: str = "maxcut"
    max_order: int = 8
    max_cycles: int = None          # 50, or 25 for coloring
    escs_per_cycle: int = None      # 100, or 500 in cut mode
    bundle_max_iter: int = 30
    bundle_rel_tol: float = 0.005
    violation_tol: float = sep.VIOLATION_TOL
    escalation_fraction: float = 0.1
    seed: int = 0
    cut_mode: str = "auto"          # auto | esc | cut
    probes_per_cycle: int = sep.MAX_PROBES
    starts_per_probe: int = 20
    oracle_tol: float = 1e-8

    def resolved(self):
        p = EsbParams(**self.__dict__)
        if p.max_cycles is None:
            p.max_cycles = 25 if p.problem == "coloring" else 50
        if p.cut_mode == "auto":
            p.cut_mode = "cut" if p.problem == "maxcut" else "esc"
        if p.cut_mode == "cut" and p.problem != "maxcut":
            raise ValueError("cut weakening is a Max-Cut-only mode")
        if p.escs_per_cycle is None:
            p.escs_per_cycle = 500 if p.cut_mode == "cut" else 100
        if not 2 <= p.max_order <= 8:
            raise ValueError("max_order must be in [2, 8]")
        return p


@dataclass
class CycleRecord:
    cycle: int
    k: int
    num_escs: int
    num_cuts: int
    bound: float
    best_bound: float
    oracle_time_s: float
    other_time_s: float


@dataclass
class EsbReport:
    problem: str
    graph_name: str
    n: int
    m: int
    basic_value: float = None
    heuristic_value: float = None
    final_bound: float = None
    cycles: list = field(default_factory=list)
    failed: bool = False
    error: str = None
    # Max-Cut values use the quarter-Laplacian objective: <L/4, cc'> is the
    # weight of the cut, so bounds are in cut-weight units.
    value_convention: str = "maxcut objective L/4 (cut weight units)"

    def to_dict(self):
        d = dict(self.__dict__)
        d["cycles"] = [dict(c.__dict__) for c in self.cycles]
        return d

    @classmethod
    def from_dict(cls, d):
        rep = cls(**{k: v for k, v in d.items() if k != "cycles"})
        rep.cycles = [CycleRecord(**c) for c in d["cycles"]]
        return rep


def emit_report(report, fmt="json"):
    """Serialize a report: full JSON object, or CSV of the cycle progress."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("cycle,k,num_escs,num_cuts,bound,best_bound,oracle_time_s,other_time_s\n")
        for c in report.cycles:
            buf.write(f"{c.cycle},{c.k},{c.num_escs},{c.num_cuts},"
                      f"{c.bound!r},{c.best_bound!r},"
                      f"{c.oracle_time_s!r},{c.other_time_s!r}\n")
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def parse_report(text):
    return EsbReport.from_dict(json.loads(text))


def warm_start_transfer(state, removed, added, removed_cuts=(), added_cuts=()):
    """Carry the dual center and bundle to a modified constraint set.

    Multiplier blocks of removed constraints are deleted (their contribution
    is folded into the linearization errors), zero blocks are appended for
    added ones, and each bundle item's subgradient gains the exact extraction
    of its stored maximizer on the new blocks.  mu and the center value are
    retained, which is exact whenever the removed blocks were inactive.
    """
    removed = set(removed)
    removed_cuts = set(removed_cuts)
    slices = state.block_slices()
    keep = [i for i in range(len(state.escs)) if i not in removed]
    keep_cuts = [i for i in range(len(state.cuts)) if i not in removed_cuts]
    off = state.base.offset

    for it in state.bundle:
        corr = 0.0
        for i in removed:
            corr += float(it.g_y[slices[i]] @ state.ybar[slices[i]])
        for c in removed_cuts:
            corr += float(it.g_u[c] * state.ubar[c])
        it.e = max(it.e + corr, 0.0)

    def part(vec, sls, idxs):
        if not idxs:
            return np.zeros(0)
        return np.concatenate([vec[sls[i]] for i in idxs])

    added = list(added)
    added_cuts = list(added_cuts)
    ybar = np.concatenate([part(state.ybar, slices, keep),
                           np.zeros(sum(e.b for e in added))])
    ci = np.asarray(keep_cuts, dtype=int)
    ubar = np.concatenate([state.ubar[ci], np.zeros(len(added_cuts))])

    for it in state.bundle:
        xpart = it.X[off:, off:]
        g_new = [part(it.g_y, slices, keep)]
        for esc in added:
            idx = np.asarray(esc.vertices, dtype=int)
            g_new.append(-esc.mask.extract(xpart[np.ix_(idx, idx)]))
        it.g_y = np.concatenate(g_new)
        gu_add = [-float(np.sum(c.normal * xpart[np.ix_(c.vertices, c.vertices)]))
                  for c in added_cuts]
        it.g_u = np.concatenate([it.g_u[ci], np.array(gu_add)])

    state.escs = [state.escs[i] for i in keep] + added
    state.cuts = [state.cuts[i] for i in keep_cuts] + added_cuts
    state.ybar = ybar
    state.ubar = ubar
    state._warm_alpha = {}
    state._warm_betas = None
    return state


def _maxcut_value(graph, signs):
    return sum(w * (1.0 - signs[i] * signs[j]) / 2.0 for i, j, w in graph.edges)


def heuristic_lower_bound(graph, problem, seed=0):
    """Feasible combinatorial value: best rounded cut (Max-Cut), greedy
    stable set with 2-improvement, or a DSATUR coloring (upper bound)."""
    rng = stream(seed, "heuristic", problem)
    n = graph.n
    if problem == "maxcut":
        sol = so.solve_sdp(so.build_basic_relaxation("maxcut", graph), tol=1e-7)
        w, v = np.linalg.eigh(sol.X)
        factor = v * np.sqrt(np.maximum(w, 0.0))
        a = graph.adjacency
        best = -np.inf
        for _ in range(100):
            c = np.sign(factor @ rng.standard_normal(n))
            c[c == 0] = 1.0
            while True:
                gains = c * (a @ c)
                i = int(np.argmax(gains))
                if gains[i] <= 1e-12:
                    break
                c[i] = -c[i]
            best = max(best, _maxcut_value(graph, c))
        integral = all(float(w).is_integer() for _, _, w in graph.edges)
        return int(round(best)) if integral else best
    if problem == "stableset":
        nbrs = [set() for _ in range(n)]
        for i, j, _ in graph.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        best = set()
        for restart in range(20):
            order = rng.permutation(n)
            alive = set(range(n))
            s = set()
            while alive:
                deg = {v: len(nbrs[v] & alive) for v in alive}
                mind = min(deg.values())
                pick = min((v for v in alive if deg[v] == mind),
                           key=lambda v: int(np.where(order == v)[0][0]))
                s.add(pick)
                alive -= nbrs[pick] | {pick}
            improved = True
            while improved:
                improved = False
                for v in list(s):
                    rest = s - {v}
                    free = [u for u in range(n) if u not in rest and not (nbrs[u] & rest)]
                    pair = None
                    for ai in range(len(free)):
                        for bi in range(ai + 1, len(free)):
                            if free[bi] not in nbrs[free[ai]]:
                                pair = (free[ai], free[bi])
                                break
                        if pair:
                            break
                    if pair:
                        s = rest | set(pair)
                        improved = True
                        break
            if len(s) > len(best):
                best = s
        return len(best)
    if problem == "coloring":
        nbrs = [set() for _ in range(n)]
        for i, j, _ in graph.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        color = {}
        sat = [set() for _ in range(n)]
        for _ in range(n):
            uncolored = [v for v in range(n) if v not in color]
            v = max(uncolored, key=lambda u: (len(sat[u]), len(nbrs[u]), -u))
            c = 0
            while c in sat[v]:
                c += 1
            color[v] = c
            for u in nbrs[v]:
                sat[u].add(c)
        return max(color.values()) + 1 if color else 1
    raise ValueError(f"unknown problem {problem!r}")


def compute_esb(graph, params):
    """Run the cycle loop and return the report (partial on solver failure)."""
    p = params.resolved()
    problem = p.problem
    sign = -1.0 if problem == "coloring" else 1.0
    better = max if problem == "coloring" else min

    report = EsbReport(problem=problem, graph_name=graph.name, n=graph.n, m=graph.m)
    report.heuristic_value = heuristic_lower_bound(graph, problem, p.seed)

    base = so.build_basic_relaxation(problem, graph)
    state = bd.DualState(base=base)
    k = 3 if problem == "maxcut" else 2
    best = None
    try:
        for cycle in range(1, p.max_cycles + 1):
            t0 = time.perf_counter()
            res = bd.run_bundle(state, max_iter=p.bundle_max_iter,
                                rel_tol=p.bundle_rel_tol, oracle_tol=p.oracle_tol)
            bound = sign * res.bound
            if cycle == 1:
                report.basic_value = bound
            best = bound if best is None else better(best, bound)

            # prune inactive multiplier blocks
            slices = state.block_slices()
            removed = [i for i, sl in enumerate(slices)
                       if float(np.max(np.abs(state.ybar[sl]), initial=0.0)) < INACTIVE_TOL]
            removed_cuts = [i for i, u in enumerate(state.ubar) if u < INACTIVE_TOL]

            # separate new constraints on the aggregated primal
            xpart = res.X[base.offset:, base.offset:]
            sep_k = min(k, p.max_order, graph.n)
            exclude = [e.vertices for e in state.escs] if p.cut_mode == "esc" else []
            viols = sep.find_violations(
                xpart, graph, problem, sep_k, limit=p.escs_per_cycle,
                tol=p.violation_tol, seed=stream(p.seed, "cycle", cycle).integers(2 ** 31),
                exclude=exclude, count=p.probes_per_cycle, starts=p.starts_per_probe)

            if p.cut_mode == "cut":
                added, added_cuts = [], [sep.weaken_to_cut(v) for v in viols]
            else:
                added, added_cuts = [v.esc for v in viols], []

            record = CycleRecord(
                cycle=cycle, k=sep_k, num_escs=len(state.escs),
                num_cuts=len(state.cuts), bound=bound, best_bound=best,
                oracle_time_s=res.oracle_seconds,
                other_time_s=time.perf_counter() - t0 - res.oracle_seconds)
            report.cycles.append(record)

            if not viols and sep_k >= min(p.max_order, graph.n):
                break
            if len(viols) < p.escalation_fraction * p.escs_per_cycle:
                k += 1
            warm_start_transfer(state, removed, added, removed_cuts, added_cuts)
    except so.SdpError as exc:
        report.failed = True
        report.error = str(exc)
    report.final_bound = best
    return report
