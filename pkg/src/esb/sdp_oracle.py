"""Dense primal-dual interior-point solver for the basic relaxations, the
dual-function oracle built on it, and a monolithic mode that solves a
relaxation together with its subgraph constraint blocks directly.

The solver handles problems of the form

    max  <C, X> + c_lin' lam
    s.t. <A_i, X> + B[i,:] lam = b_i   (i = 1..m)
         X psd,  lam >= 0,

with dense symmetric X.  Minimization problems (the coloring relaxation)
are negated internally so that every solve is a maximization; reported
values carry the original sense.  The method is infeasible path-following
with the HKM search direction (linearize XZ = nu*I, symmetrize dX) and a
Mehrotra predictor-corrector; the Schur complement M[i,j] =
tr(A_i X A_j Z^-1) (+ B diag(lam/z) B') is formed densely from constraint
triplets and factored by Cholesky, with a small diagonal jitter retry
before declaring breakdown.  Step length is 0.98 of the distance to the
cone boundary.

Basic relaxations:
  - Max-Cut:    diag(X) = 1 on an order-n matrix, objective L/4, maximize.
  - stable set: order n+1 with row/column 0 appended; Y00 = 1,
                Y0i = Yii, Yij = 0 on edges; maximize the trace of the
                X part (n+m+1 equations).  The optimum is the theta number.
  - coloring:   order n+1; Yii = 1, Y0i = 1 for i >= 1, Yij = 0 on edges;
                minimize Y00 (2n+m equations).
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .graphs import laplacian

_STEP_FRACTION = 0.98


class SdpError(RuntimeError):
    """Interior-point failure; carries iterate diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SdpProblem:
    """Data and preprocessed constraint structure for one solve.

    constraints: one triplet list per constraint, [(p, q, v), ...], with both
    (p, q) and (q, p) listed for off-diagonal entries so that each A_i is
    symmetric and <A_i, X> = sum(v * X[p, q]).
    """

    def __init__(self, order, constraints, rhs, objective, sense="max",
                 lin_coeffs=None, lin_objective=None, problem=None, offset=0):
        if sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        self.order = order
        self.constraints = constraints
        self.b = np.asarray(rhs, dtype=float)
        self.objective = np.asarray(objective, dtype=float)
        self.sense = sense
        self.problem = problem
        self.offset = offset
        self.m = len(constraints)
        if lin_coeffs is not None:
            self.lin_coeffs = np.asarray(lin_coeffs, dtype=float)
            self.lin_objective = (np.zeros(self.lin_coeffs.shape[1])
                                  if lin_objective is None
                                  else np.asarray(lin_objective, dtype=float))
            self.lin_dim = self.lin_coeffs.shape[1]
        else:
            self.lin_coeffs = None
            self.lin_objective = None
            self.lin_dim = 0

        ps, qs, vs, owner = [], [], [], []
        for i, tri in enumerate(constraints):
            for p, q, v in tri:
                ps.append(p)
                qs.append(q)
                vs.append(v)
                owner.append(i)
        self._p = np.asarray(ps, dtype=int)
        self._q = np.asarray(qs, dtype=int)
        self._v = np.asarray(vs, dtype=float)
        self._o = np.asarray(owner, dtype=int)
        nnz = self._p.size
        self._sel = sp.csr_matrix(
            (np.ones(nnz), (self._o, np.arange(nnz))), shape=(self.m, nnz))
        self._anorm = np.sqrt(np.bincount(self._o, weights=self._v ** 2, minlength=self.m))
        if self.lin_dim:
            self._anorm = np.sqrt(self._anorm ** 2 + (self.lin_coeffs ** 2).sum(axis=1))

    def with_objective(self, objective):
        new = object.__new__(SdpProblem)
        new.__dict__.update(self.__dict__)
        new.objective = np.asarray(objective, dtype=float)
        return new

    def apply_a(self, x):
        """Vector of <A_i, X> (SDP part only)."""
        return np.bincount(self._o, weights=self._v * x[self._p, self._q], minlength=self.m)

    def mat(self, y):
        """sum_i y_i A_i as a dense matrix."""
        out = np.zeros((self.order, self.order))
        np.add.at(out, (self._p, self._q), self._v * y[self._o])
        return out

    def schur(self, x, w):
        """M[i,j] = tr(A_i X A_j W) assembled from the constraint triplets."""
        k = (np.outer(self._v, self._v)
             * x[np.ix_(self._q, self._p)]
             * w[np.ix_(self._q, self._p)].T)
        tmp = self._sel @ k
        return (self._sel @ tmp.T).T


@dataclass
class SdpSolution:
    X: np.ndarray
    value: float          # primal objective in the problem's sense
    dual_y: np.ndarray
    gap: float
    iterations: int
    lam: np.ndarray = None
    internal_value: float = 0.0   # primal objective of the internal max form
    internal_bound: float = 0.0   # dual objective of the internal max form


def build_basic_relaxation(problem, graph):
    n = graph.n
    if problem == "maxcut":
        cons = [[(i, i, 1.0)] for i in range(n)]
        rhs = np.ones(n)
        return SdpProblem(n, cons, rhs, laplacian(graph) / 4.0,
                          sense="max", problem=problem, offset=0)
    if problem == "stableset":
        cons = [[(0, 0, 1.0)]]
        rhs = [1.0]
        for i in range(n):
            cons.append([(0, i + 1, 0.5), (i + 1, 0, 0.5), (i + 1, i + 1, -1.0)])
            rhs.append(0.0)
        for i, j, _ in graph.edges:
            cons.append([(i + 1, j + 1, 0.5), (j + 1, i + 1, 0.5)])
            rhs.append(0.0)
        c = np.eye(n + 1)
        c[0, 0] = 0.0
        return SdpProblem(n + 1, cons, rhs, c, sense="max", problem=problem, offset=1)
    if problem == "coloring":
        cons = []
        rhs = []
        for i in range(n):
            cons.append([(i + 1, i + 1, 1.0)])
            rhs.append(1.0)
        for i in range(n):
            cons.append([(0, i + 1, 0.5), (i + 1, 0, 0.5)])
            rhs.append(1.0)
        for i, j, _ in graph.edges:
            cons.append([(i + 1, j + 1, 0.5), (j + 1, i + 1, 0.5)])
            rhs.append(0.0)
        c = np.zeros((n + 1, n + 1))
        c[0, 0] = 1.0
        return SdpProblem(n + 1, cons, rhs, c, sense="min", problem=problem, offset=1)
    raise ValueError(f"unknown problem {problem!r}")


def _sym(a):
    return 0.5 * (a + a.T)


def _max_step_psd(mat, step):
    """Largest alpha with mat + alpha*step psd (mat is pd)."""
    ell = np.linalg.cholesky(mat)
    s1 = solve_triangular(ell, step, lower=True)
    t = solve_triangular(ell, s1.T, lower=True)
    emin = float(np.linalg.eigvalsh(_sym(t))[0])
    if emin >= -1e-13:
        return np.inf
    return -1.0 / emin


def _max_step_pos(vec, step):
    neg = step < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-vec[neg] / step[neg]))


def _chol_with_jitter(m):
    jitter = 0.0
    scale = max(np.mean(np.diag(m)), 1e-30)
    for _ in range(5):
        try:
            return cho_factor(m + jitter * np.eye(m.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter = scale * 1e-12 if jitter == 0.0 else jitter * 100.0
    raise np.linalg.LinAlgError("schur complement not positive definite")


def solve_sdp(problem, tol=1e-8, max_iter=200):
    """Solve to relative gap and feasibility <= tol or raise SdpError."""
    n = problem.order
    m = problem.m
    sgn = 1.0 if problem.sense == "max" else -1.0
    cmat = sgn * _sym(problem.objective)
    b = problem.b
    has_lp = problem.lin_dim > 0
    bmat = problem.lin_coeffs
    clin = sgn * problem.lin_objective if has_lp else None
    ell = problem.lin_dim

    with np.errstate(divide="ignore"):
        scale_p = np.max((1.0 + np.abs(b)) / (1.0 + problem._anorm))
    xi_p = max(10.0, np.sqrt(n), n * scale_p)
    xi_d = max(10.0, np.sqrt(n), float(np.max(problem._anorm, initial=0.0)),
               float(np.linalg.norm(cmat)))
    x = xi_p * np.eye(n)
    z = xi_d * np.eye(n)
    y = np.zeros(m)
    lam = xi_p * np.ones(ell) if has_lp else None
    zl = xi_d * np.ones(ell) if has_lp else None
    nu_dim = n + ell
    eye = np.eye(n)

    def diagnostics(it, mu, pinf, dinf, relgap):
        return {"iterations": it, "mu": mu, "primal_infeas": pinf,
                "dual_infeas": dinf, "relative_gap": relgap}

    mu = pinf = dinf = relgap = np.nan
    for it in range(max_iter):
        ax = problem.apply_a(x)
        if has_lp:
            ax = ax + bmat @ lam
        rp = b - ax
        rd = cmat - problem.mat(y) + z
        rdl = clin - bmat.T @ y + zl if has_lp else None

        pobj = float(np.sum(cmat * x)) + (float(clin @ lam) if has_lp else 0.0)
        dobj = float(b @ y)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / (1.0 + np.linalg.norm(b))
        dinf = np.linalg.norm(rd) / (1.0 + np.linalg.norm(cmat))
        if has_lp:
            dinf = max(dinf, np.linalg.norm(rdl) / (1.0 + np.linalg.norm(clin)))
        mu = (float(np.sum(x * z)) + (float(lam @ zl) if has_lp else 0.0)) / nu_dim
        if relgap <= tol and pinf <= tol and dinf <= tol:
            return SdpSolution(
                X=x, value=sgn * pobj, dual_y=y.copy(), gap=relgap, iterations=it,
                lam=(lam.copy() if has_lp else None),
                internal_value=pobj, internal_bound=dobj)

        try:
            chol_z = cho_factor(z, lower=True)
            w = _sym(cho_solve(chol_z, eye))
            schur = _sym(problem.schur(x, w))
            if has_lp:
                schur = schur + (bmat * (lam / zl)) @ bmat.T
            mfac = _chol_with_jitter(schur)
        except np.linalg.LinAlgError as exc:
            raise SdpError(f"factorization breakdown at iteration {it}: {exc}",
                           diagnostics(it, mu, pinf, dinf, relgap)) from exc

        xrw = x @ rd @ w
        base_rhs = -b + problem.apply_a(xrw)
        if has_lp:
            base_rhs = base_rhs + bmat @ ((lam / zl) * rdl)

        # predictor (affine direction)
        dy_a = cho_solve(mfac, base_rhs)
        dz_a = problem.mat(dy_a) - rd
        dx_a = _sym(-x - x @ dz_a @ w + xrw)
        if has_lp:
            dzl_a = bmat.T @ dy_a - rdl
            dlam_a = -lam - (lam / zl) * dzl_a
        ap = min(_max_step_psd(x, dx_a),
                 _max_step_pos(lam, dlam_a) if has_lp else np.inf)
        ad = min(_max_step_psd(z, dz_a),
                 _max_step_pos(zl, dzl_a) if has_lp else np.inf)
        ap = min(1.0, _STEP_FRACTION * ap)
        ad = min(1.0, _STEP_FRACTION * ad)
        mu_aff = (float(np.sum((x + ap * dx_a) * (z + ad * dz_a)))
                  + (float((lam + ap * dlam_a) @ (zl + ad * dzl_a)) if has_lp else 0.0)) / nu_dim
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-10, 1.0))
        nu = sigma * mu

        # corrector
        corr = dx_a @ dz_a @ w
        rhs = nu * problem.apply_a(w) + base_rhs - problem.apply_a(corr)
        if has_lp:
            corr_l = dlam_a * dzl_a
            rhs = rhs + nu * (bmat @ (1.0 / zl)) - bmat @ (corr_l / zl)
        dy = cho_solve(mfac, rhs)
        dz = problem.mat(dy) - rd
        dx = _sym(nu * w - x - corr - x @ dz @ w)
        if has_lp:
            dzl = bmat.T @ dy - rdl
            dlam = nu / zl - lam - corr_l / zl - (lam / zl) * dzl
        ap = min(_max_step_psd(x, dx),
                 _max_step_pos(lam, dlam) if has_lp else np.inf)
        ad = min(_max_step_psd(z, dz),
                 _max_step_pos(zl, dzl) if has_lp else np.inf)
        ap = min(1.0, _STEP_FRACTION * ap)
        ad = min(1.0, _STEP_FRACTION * ad)
        if ap < 1e-10 and ad < 1e-10:
            raise SdpError(f"step length collapse at iteration {it}",
                           diagnostics(it, mu, pinf, dinf, relgap))

        x = _sym(x + ap * dx)
        y = y + ad * dy
        z = _sym(z + ad * dz)
        if has_lp:
            lam = lam + ap * dlam
            zl = zl + ad * dzl

    raise SdpError(f"iteration cap {max_iter} reached",
                   diagnostics(max_iter, mu, pinf, dinf, relgap))


@dataclass
class OracleEval:
    """One dual-function evaluation: value and subgradient data.

    value is the primal objective of the modified solve (consistent with the
    maximizer X, so linearizations built from (value, g) are exact); bound is
    the dual objective, which is the side that certifies an upper bound for
    the internal max form.
    """

    value: float
    bound: float
    X: np.ndarray
    g_esc: np.ndarray     # concatenated -extract_I(X*) blocks
    g_cut: np.ndarray     # -<A_c, X*_I> per cut
    seconds: float


def _internal_objective(base):
    sgn = 1.0 if base.sense == "max" else -1.0
    return sgn * base.objective


def modified_objective(base, escs, cuts, y, u):
    """C - sum_I scatter_I(y_I) - sum_c u_c A_c, embedded at the subgraph rows."""
    c = _internal_objective(base).copy()
    off = base.offset
    pos = 0
    for esc in escs:
        yi = y[pos:pos + esc.b]
        pos += esc.b
        idx = np.asarray(esc.vertices, dtype=int) + off
        c[np.ix_(idx, idx)] -= esc.mask.scatter(yi)
    for uc, cut in zip(u, cuts):
        idx = np.asarray(cut.vertices, dtype=int) + off
        c[np.ix_(idx, idx)] -= uc * cut.normal
    return c


def evaluate_h(base, escs, cuts, y, u, tol=1e-8):
    """Oracle: solve the basic relaxation with the multiplier-modified
    objective; return the value, maximizer and subgradient blocks."""
    t0 = time.perf_counter()
    cmod = modified_objective(base, escs, cuts, y, u)
    prob = base.with_objective(cmod)
    prob.sense = "max"
    sol = solve_sdp(prob, tol=tol)
    off = base.offset
    xpart = sol.X[off:, off:]
    gs = []
    for esc in escs:
        idx = np.asarray(esc.vertices, dtype=int)
        gs.append(-esc.mask.extract(xpart[np.ix_(idx, idx)]))
    g_esc = np.concatenate(gs) if gs else np.zeros(0)
    g_cut = np.array([-float(np.sum(cut.normal * xpart[np.ix_(cut.vertices, cut.vertices)]))
                      for cut in cuts])
    return OracleEval(value=sol.internal_value, bound=sol.internal_bound,
                      X=sol.X, g_esc=g_esc, g_cut=g_cut,
                      seconds=time.perf_counter() - t0)


MONOLITHIC_LAMBDA_CAP = 2000


def solve_monolithic(base, escs, tol=None, max_iter=200):
    """Solve the relaxation with explicit convex-combination variables for
    every constraint block: lam_I in the simplex, extract_I(X) = D_I' lam_I.

    Intended as a small-scale cross-check; guarded by a cap on the total
    number of lam variables.
    """
    total_t = sum(esc.t for esc in escs)
    if total_t > MONOLITHIC_LAMBDA_CAP:
        raise ValueError(f"monolithic mode limited to {MONOLITHIC_LAMBDA_CAP} "
                         f"lambda variables, got {total_t}")
    if len({esc.vertices for esc in escs}) != len(escs):
        raise ValueError("duplicate constraint blocks")
    if tol is None:
        tol = 1e-7 if total_t <= 500 else 1e-6
    if not escs:
        return solve_sdp(base, tol=max(tol, 1e-8))

    off = base.offset
    cons = [list(tri) for tri in base.constraints]
    rhs = list(base.b)
    nrow_base = len(cons)
    lin_rows = []

    col = 0
    ranges = []
    for esc in escs:
        ranges.append((col, col + esc.t))
        col += esc.t
    lam_dim = col

    for esc, (c0, c1) in zip(escs, ranges):
        idx = np.asarray(esc.vertices, dtype=int) + off
        for s in range(esc.b):
            p, q = idx[esc.mask.rows[s]], idx[esc.mask.cols[s]]
            if p == q:
                cons.append([(p, p, 1.0)])
            else:
                cons.append([(p, q, 1.0), (q, p, 1.0)])
            rhs.append(0.0)
            row = np.zeros(lam_dim)
            row[c0:c1] = -esc.dmat[:, s]
            lin_rows.append(row)
        cons.append([])
        rhs.append(1.0)
        row = np.zeros(lam_dim)
        row[c0:c1] = 1.0
        lin_rows.append(row)

    lin = np.vstack([np.zeros((nrow_base, lam_dim))] + [np.array(lin_rows)])
    prob = SdpProblem(base.order, cons, rhs, base.objective, sense=base.sense,
                      lin_coeffs=lin, lin_objective=np.zeros(lam_dim),
                      problem=base.problem, offset=base.offset)
    return solve_sdp(prob, tol=tol, max_iter=max_iter)
