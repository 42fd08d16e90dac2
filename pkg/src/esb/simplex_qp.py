"""Convex quadratic minimization over products of unit simplices and
nonnegative scalars.

Minimizes 0.5 x'Hx + c'x + c0 (+ an optional smooth convex extra term) where
H is a PSD operator, by FISTA with restart on non-monotonicity and exact
per-block Euclidean projection.  H is never formed when supplied as a
closure; the Lipschitz constant comes from 30 power-iteration steps with a
1.1 safety factor.  This is the engine behind both the polytope projection
distances and the bundle master problem.
"""

from dataclasses import dataclass, field

import numpy as np

_POWER_ITERS = 30
_SAFETY = 1.1


def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort-and-threshold).

    Ties are resolved by the descending sort, which is index-stable; the
    returned point is the unique minimizer regardless.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


@dataclass
class BlockedQP:
    """Objective 0.5 x'Hx + lin'x + const (+ extra term) over the block product.

    blocks: sequence of ("simplex", dim) or ("nonneg", dim) specs.
    hess_op: v -> Hv for the PSD quadratic part.
    extra_term: optional x -> (value, gradient) for an additional smooth
        convex term (used for eliminated cut multipliers); its gradient
        Lipschitz bound goes into extra_lipschitz.
    """

    blocks: tuple
    hess_op: object
    lin: np.ndarray
    const: float = 0.0
    extra_term: object = None
    extra_lipschitz: float = 0.0

    def __post_init__(self):
        self.lin = np.asarray(self.lin, dtype=float)
        self._slices = []
        off = 0
        for kind, dim in self.blocks:
            if kind not in ("simplex", "nonneg"):
                raise ValueError(f"unknown block kind {kind!r}")
            if dim < 1:
                raise ValueError("block dims must be >= 1")
            self._slices.append((kind, slice(off, off + dim)))
            off += dim
        if off != self.lin.size:
            raise ValueError("block dims do not match linear term")
        self.dim = off

    def project(self, x):
        out = np.empty_like(x)
        for kind, sl in self._slices:
            if kind == "simplex":
                out[sl] = project_simplex(x[sl])
            else:
                out[sl] = np.maximum(x[sl], 0.0)
        return out

    def gap_certificate(self, x, grad):
        """Upper bound on f(x) - min f from one linear minimization per block.

        Simplex blocks contribute the Frank-Wolfe gap g'x - min_i g_i;
        nonnegative blocks contribute the KKT violation |g'x| + ||min(g,0)||.
        """
        total = 0.0
        for kind, sl in self._slices:
            g = grad[sl]
            if kind == "simplex":
                total += float(g @ x[sl]) - float(np.min(g))
            else:
                total += abs(float(g @ x[sl])) + float(np.linalg.norm(np.minimum(g, 0.0)))
        return total

    def value_grad(self, x):
        hx = self.hess_op(x)
        val = 0.5 * float(x @ hx) + float(self.lin @ x) + self.const
        grad = hx + self.lin
        if self.extra_term is not None:
            ev, eg = self.extra_term(x)
            val += ev
            grad = grad + eg
        return val, grad


def _lipschitz(qp, rng):
    v = rng.standard_normal(qp.dim)
    nv = np.linalg.norm(v)
    if nv == 0:
        return qp.extra_lipschitz
    v /= nv
    lam = 0.0
    for _ in range(_POWER_ITERS):
        hv = qp.hess_op(v)
        lam = float(np.linalg.norm(hv))
        if lam <= 1e-300:
            break
        v = hv / lam
    return lam * _SAFETY + qp.extra_lipschitz


def minimize(qp, start=None, tol=1e-8, max_iter=5000):
    """Accelerated projected gradient over the blocks of qp.

    Stops when the blockwise projected-gradient norm or the per-block linear
    minimization certificate (which bounds the objective suboptimality
    directly) drops below tol * (1 + |objective|), or after max_iter
    iterations.  Returns (solution, objective value); the solution is the
    best feasible point seen, so the objective never exceeds the objective
    at the start.
    """
    if start is None:
        start = np.zeros(qp.dim)
    x = qp.project(np.asarray(start, dtype=float))
    L = max(_lipschitz(qp, np.random.Generator(np.random.PCG64(0x5eed))), 1e-12)

    fx, gx = qp.value_grad(x)
    if not np.isfinite(fx):
        raise FloatingPointError("non-finite objective at the starting point")
    best_x, best_f = x.copy(), fx
    y = x.copy()
    t = 1.0
    window_f = best_f
    for it in range(max_iter):
        thresh = tol * (1.0 + abs(fx))
        pg = x - qp.project(x - gx)
        if np.linalg.norm(pg) <= thresh or qp.gap_certificate(x, gx) <= thresh:
            break
        if it % 100 == 99:
            # numerical floor: no measurable descent over the last window
            if window_f - best_f <= 1e-13 * (1.0 + abs(best_f)):
                break
            window_f = best_f
        _, gy = qp.value_grad(y)
        x_new = qp.project(y - gy / L)
        f_new, g_new = qp.value_grad(x_new)
        if not np.isfinite(f_new):
            raise FloatingPointError("non-finite objective encountered")
        if f_new > fx:
            # restart acceleration from the last good iterate
            y = x.copy()
            t = 1.0
            x_new = qp.project(x - gx / L)
            f_new, g_new = qp.value_grad(x_new)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, fx, gx, t = x_new, f_new, g_new, t_new
        if fx < best_f:
            best_x, best_f = x.copy(), fx
    return best_x, best_f
