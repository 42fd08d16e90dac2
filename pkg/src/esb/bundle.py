"""Proximal bundle method for the partial Lagrangian dual of a relaxation
with subgraph constraint blocks.

Dualizing the coupling equations of every block I with multipliers y_I (and
every linear cut with a multiplier u_c >= 0) leaves the dual function

    f(y, u) = h(y, u) + sum_I max_i [D_I y_I]_i + sum_c u_c rhs_c,

where h is evaluated by one basic-relaxation solve with a modified
objective and is convex with subgradient blocks -extract_I(X*).  Any (y, u)
gives a valid bound on the constrained relaxation, hence on the
combinatorial optimum, so the minimization can stop early.

Each iteration solves the proximal master problem in its dual form: a
convex quadratic over a product of simplices (alpha over bundle items, one
beta block per constraint block), from which the trial point is recovered
as y_I = ybar_I - (G_I alpha + D_I' beta_I) / mu.  Cut multipliers never
enter the master as variables; they are eliminated in closed form,
u_c = max(0, ubar_c - (G_c alpha + rhs_c) / mu), which folds into the
master objective as a smooth concave piecewise-quadratic term.

Linearization errors are maintained incrementally from stored (h_j, g_j)
under center moves, so bundle items never store their evaluation points.
Items whose master weight vanishes are dropped after every iteration,
always keeping the newest item and the item of the last serious step.
"""

from dataclasses import dataclass, field

import numpy as np

from . import sdp_oracle, simplex_qp

MU_MIN = 1e-6
MU_MAX = 1e8
SERIOUS_RATIO = 0.1       # fraction of predicted decrease required for a serious step
MU_SHRINK_RATIO = 0.7     # actual/predicted ratio above which mu is halved
PRUNE_WEIGHT = 1e-8
BUNDLE_CAP = 50
NULLS_BEFORE_GROWTH = 3


@dataclass(eq=False)
class LinearCut:
    """Single valid inequality <normal, X_I> <= rhs for one subgraph."""

    vertices: tuple
    normal: np.ndarray
    rhs: float


@dataclass(eq=False)
class BundleItem:
    """One oracle evaluation: value, subgradient blocks, maximizer and the
    linearization error relative to the current center."""

    h: float
    g_y: np.ndarray
    g_u: np.ndarray
    X: np.ndarray
    e: float


@dataclass(eq=False)
class DualState:
    """Multipliers, bundle and proximal weight for one constraint set."""

    base: sdp_oracle.SdpProblem
    escs: list = field(default_factory=list)
    cuts: list = field(default_factory=list)
    ybar: np.ndarray = None
    ubar: np.ndarray = None
    mu: float = None
    bundle: list = field(default_factory=list)
    center_h: float = None       # primal-consistent h at the center
    center_hb: float = None      # dual-side h at the center (valid bound part)
    nulls: int = 0
    last_serious: object = None

    def __post_init__(self):
        if self.ybar is None:
            self.ybar = np.zeros(sum(e.b for e in self.escs))
        if self.ubar is None:
            self.ubar = np.zeros(len(self.cuts))
        self._warm_alpha = {}
        self._warm_betas = None

    @property
    def ydim(self):
        return self.ybar.size

    def block_slices(self):
        out = []
        pos = 0
        for esc in self.escs:
            out.append(slice(pos, pos + esc.b))
            pos += esc.b
        return out

    def cut_rhs(self):
        return np.array([c.rhs for c in self.cuts])


@dataclass(eq=False)
class MasterSolution:
    alpha: np.ndarray
    betas: list
    u: np.ndarray
    ytrial: np.ndarray
    model_value: float
    items: list               # bundle items the alpha refers to


@dataclass(eq=False)
class BundleResult:
    ybar: np.ndarray
    ubar: np.ndarray
    X: np.ndarray
    lams: list
    bound: float              # best valid dual value seen (internal max form)
    iterations: int
    serious_steps: int
    stop: str
    oracle_seconds: float
    history: list


def max_terms(escs, y):
    """sum_I max_i [D_I y_I]_i."""
    total = 0.0
    pos = 0
    for esc in escs:
        total += float(np.max(esc.dmat @ y[pos:pos + esc.b])) if esc.b else 0.0
        pos += esc.b
    return total


def dual_value(state, y=None, u=None, oracle_tol=1e-8):
    """Valid bound at (y, u): one oracle call plus the explicit max terms."""
    y = state.ybar if y is None else y
    u = state.ubar if u is None else u
    ev = sdp_oracle.evaluate_h(state.base, state.escs, state.cuts, y, u, tol=oracle_tol)
    return ev.bound + max_terms(state.escs, y) + float(u @ state.cut_rhs())


def solve_master(state, tol=1e-8, max_iter=5000):
    """Dual master problem over alpha in the r-simplex and one simplex per
    constraint block; recovers the trial point and the model value there."""
    items = list(state.bundle)
    r = len(items)
    escs = state.escs
    ncuts = len(state.cuts)
    mu = state.mu
    bdim = state.ydim
    slices = state.block_slices()

    gy = (np.column_stack([it.g_y for it in items])
          if bdim else np.zeros((0, r)))
    gu = (np.column_stack([it.g_u for it in items]).T
          if ncuts else np.zeros((r, 0)))      # (r, ncuts)
    errs = np.array([it.e for it in items])
    dbars = [esc.dmat @ state.ybar[sl] for esc, sl in zip(escs, slices)]
    rhs = state.cut_rhs()
    ubar = state.ubar

    blocks = [("simplex", r)] + [("simplex", esc.t) for esc in escs]
    boff = []
    pos = r
    for esc in escs:
        boff.append(pos)
        pos += esc.t

    def split(z):
        alpha = z[:r]
        betas = [z[o:o + esc.t] for o, esc in zip(boff, escs)]
        return alpha, betas

    def svec(alpha, betas):
        s = gy @ alpha
        for sl, esc, beta in zip(slices, escs, betas):
            if esc.b:
                s[sl] += esc.dmat.T @ beta
        return s

    def hess_op(z):
        alpha, betas = split(z)
        s = svec(alpha, betas)
        out = np.zeros_like(z)
        out[:r] = gy.T @ s / mu
        for o, sl, esc in zip(boff, slices, escs):
            if esc.b:
                out[o:o + esc.t] = esc.dmat @ s[sl] / mu
        return out

    lin = np.concatenate([errs] + [-d for d in dbars]) if escs else errs.copy()

    extra = None
    extra_lip = 0.0
    if ncuts:
        def extra(z):
            alpha = z[:r]
            gua = gu.T @ alpha
            ut = np.maximum(0.0, ubar - (gua + rhs) / mu)
            du = ut - ubar
            val = -float(ut @ rhs + 0.5 * mu * (du @ du) + gua @ du)
            grad = np.zeros_like(z)
            grad[:r] = gu @ (ubar - ut)
            return val, grad

        extra_lip = float((gu ** 2).sum()) / mu

    qp = simplex_qp.BlockedQP(blocks=tuple(blocks), hess_op=hess_op, lin=lin,
                              const=-state.center_h, extra_term=extra,
                              extra_lipschitz=extra_lip)

    start = np.zeros(qp.dim)
    wa = np.array([state._warm_alpha.get(id(it), 0.0) for it in items])
    start[:r] = wa / wa.sum() if wa.sum() > 1e-12 else np.full(r, 1.0 / r)
    warm_b = state._warm_betas
    for i, (o, esc) in enumerate(zip(boff, escs)):
        if warm_b is not None and i < len(warm_b) and warm_b[i] is not None \
                and warm_b[i].size == esc.t:
            start[o:o + esc.t] = warm_b[i]
        else:
            start[o:o + esc.t] = 1.0 / esc.t

    z, _ = simplex_qp.minimize(qp, start=start, tol=tol, max_iter=max_iter)
    alpha, betas = split(z)
    s = svec(alpha, betas)
    ytrial = state.ybar - s / mu
    if ncuts:
        u = np.maximum(0.0, ubar - (gu.T @ alpha + rhs) / mu)
    else:
        u = np.zeros(0)

    planes = state.center_h - errs
    if bdim:
        planes = planes + gy.T @ (ytrial - state.ybar)
    if ncuts:
        planes = planes + gu @ (u - ubar)
    model = float(np.max(planes)) + max_terms(escs, ytrial) + float(u @ rhs)

    state._warm_alpha = {id(it): a for it, a in zip(items, alpha)}
    state._warm_betas = [b.copy() for b in betas]
    return MasterSolution(alpha=alpha, betas=betas, u=u, ytrial=ytrial,
                          model_value=model, items=items)


def step_decision(center_value, trial_value, model_value, m_ss=SERIOUS_RATIO):
    """'serious' iff the model predicts a decrease and the trial achieves at
    least the fraction m_ss of it."""
    predicted = center_value - model_value
    actual = center_value - trial_value
    if predicted > 0 and actual >= m_ss * predicted:
        return "serious"
    return "null"


def update_mu(state, decision, ratio):
    """Safeguarded proximal weight update (Kiwiel-style).

    Serious steps with a high achieved/predicted ratio halve mu; three or
    more consecutive null steps double it.  Always clipped to [MU_MIN, MU_MAX].
    """
    mu = state.mu
    if decision == "serious":
        state.nulls = 0
        if ratio >= MU_SHRINK_RATIO:
            mu = max(mu / 2.0, MU_MIN)
    else:
        state.nulls += 1
        if state.nulls >= NULLS_BEFORE_GROWTH:
            mu = min(2.0 * mu, MU_MAX)
    state.mu = mu
    return mu


def prune_bundle(state, alpha):
    """Drop items whose master weight vanished, keeping the newest item and
    the item of the last serious step; cap the bundle, oldest dropped first."""
    weight = {id(it): a for it, a in zip(state.bundle, alpha)}
    newest = state.bundle[-1] if state.bundle else None
    keep = []
    for it in state.bundle:
        protected = it is newest or it is state.last_serious
        if protected or weight.get(id(it), 1.0) >= PRUNE_WEIGHT:
            keep.append(it)
    if len(keep) > BUNDLE_CAP:
        protected = [it for it in keep if it is newest or it is state.last_serious]
        rest = [it for it in keep if it not in protected]
        keep = rest[-(BUNDLE_CAP - len(protected)):] + protected
        keep = [it for it in state.bundle if it in keep]
    state.bundle = keep
    return state


def _f_subgrad_norm(state, ev, ytrial, u):
    """Norm of a subgradient of the full dual at the trial point (projected on
    the active cut coordinates)."""
    parts = []
    pos = 0
    for esc in state.escs:
        if esc.b:
            row = int(np.argmax(esc.dmat @ ytrial[pos:pos + esc.b]))
            parts.append(ev.g_esc[pos:pos + esc.b] + esc.dmat[row])
        pos += esc.b
    g = np.concatenate(parts) if parts else np.zeros(0)
    if state.cuts:
        coord = state.cut_rhs() + ev.g_cut
        coord = np.where(u > 1e-12, coord, np.minimum(coord, 0.0))
        g = np.concatenate([g, coord])
    return float(np.linalg.norm(g))


def run_bundle(state, max_iter=30, rel_tol=0.005, gnorm_tol=1e-6,
               m_ss=SERIOUS_RATIO, oracle_tol=1e-8):
    """Minimize the dual for the fixed constraint set in state.

    Stops on the relative model gap at the center, on a small full
    subgradient at the trial point, or at max_iter.  Returns the center, the
    aggregated primal matrix X = sum_j alpha_j X_j with the last master
    weights, the beta blocks, and the best valid bound seen.
    """
    oracle_seconds = 0.0
    rhs = state.cut_rhs()

    def oracle(y, u):
        nonlocal oracle_seconds
        ev = sdp_oracle.evaluate_h(state.base, state.escs, state.cuts, y, u,
                                   tol=oracle_tol)
        oracle_seconds += ev.seconds
        return ev

    if not state.bundle:
        ev = oracle(state.ybar, state.ubar)
        state.bundle = [BundleItem(h=ev.value, g_y=ev.g_esc, g_u=ev.g_cut,
                                   X=ev.X, e=0.0)]
        state.center_h = ev.value
        state.center_hb = ev.bound
        state.last_serious = state.bundle[0]
        if state.mu is None:
            g0 = np.concatenate([ev.g_esc, ev.g_cut])
            state.mu = max(1.0, float(np.linalg.norm(g0)))
    if state.mu is None:
        state.mu = 1.0

    extras_c = max_terms(state.escs, state.ybar) + float(state.ubar @ rhs)
    center_f = state.center_h + extras_c
    best = state.center_hb + extras_c

    history = []
    serious_steps = 0
    stop = "max_iter"
    last_master = None
    iterations = 0

    if state.ydim == 0 and not state.cuts:
        return BundleResult(ybar=state.ybar, ubar=state.ubar,
                            X=state.bundle[0].X, lams=[], bound=best,
                            iterations=0, serious_steps=0, stop="no_multipliers",
                            oracle_seconds=oracle_seconds, history=history)

    for iterations in range(1, max_iter + 1):
        ms = solve_master(state)
        last_master = ms
        gap = center_f - ms.model_value
        if gap <= rel_tol * (1.0 + abs(center_f)):
            stop = "model_gap"
            break

        ev = oracle(ms.ytrial, ms.u)
        extras_t = max_terms(state.escs, ms.ytrial) + float(ms.u @ rhs)
        trial_f = ev.value + extras_t
        trial_bound = ev.bound + extras_t
        best = min(best, trial_bound)

        decision = step_decision(center_f, trial_f, ms.model_value, m_ss=m_ss)
        ratio = (center_f - trial_f) / gap if gap > 0 else 0.0

        dy = ms.ytrial - state.ybar
        du = ms.u - state.ubar
        item = BundleItem(h=ev.value, g_y=ev.g_esc, g_u=ev.g_cut, X=ev.X, e=0.0)
        if decision == "serious":
            shift = ev.value - state.center_h
            for it in state.bundle:
                lin_move = float(it.g_y @ dy) + float(it.g_u @ du)
                it.e = max(it.e + shift - lin_move, 0.0)
            state.ybar = ms.ytrial
            state.ubar = ms.u
            state.center_h = ev.value
            state.center_hb = ev.bound
            center_f = trial_f
            state.last_serious = item
            serious_steps += 1
        else:
            e_new = state.center_h - ev.value - (float(ev.g_esc @ (state.ybar - ms.ytrial))
                                                 + float(ev.g_cut @ (state.ubar - ms.u)))
            item.e = max(e_new, 0.0)
        state.bundle.append(item)

        update_mu(state, decision, ratio)
        prune_bundle(state, ms.alpha)
        history.append({"iter": iterations, "decision": decision,
                        "center": center_f, "trial": trial_f,
                        "model": ms.model_value, "mu": state.mu,
                        "bundle": len(state.bundle)})

        if _f_subgrad_norm(state, ev, ms.ytrial, ms.u) <= gnorm_tol:
            stop = "subgradient_norm"
            break

    if last_master is not None:
        xagg = sum(a * it.X for a, it in zip(last_master.alpha, last_master.items))
        lams = last_master.betas
    else:
        xagg = state.bundle[-1].X
        lams = []
    return BundleResult(ybar=state.ybar, ubar=state.ubar, X=xagg, lams=lams,
                        bound=best, iterations=iterations,
                        serious_steps=serious_steps, stop=stop,
                        oracle_seconds=oracle_seconds, history=history)
