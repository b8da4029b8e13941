"""Damped Newton minimisation on a coordinate subspace with box clipping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARMIJO_C = 1e-4
MAX_SHIFTS = 80


@dataclass
class NewtonResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    converged: bool
    message: str = ""


def newton_minimize(fun, grad, hess, x0, free=None, lower=None, upper=None,
                    tol: float = 1e-8, max_iter: int = 100) -> NewtonResult:
    """Minimise ``fun`` over the coordinates flagged in ``free``.

    Fixed coordinates keep their value from ``x0``. Each step solves
    ``(H + lam I) d = -g`` on the free block; ``lam`` starts at 0 and is
    doubled until the step is an Armijo descent step (non-finite objective
    values count as failures). Stops when the free-block gradient norm drops
    below ``tol``.
    """
    x = np.array(x0, dtype=float)
    p = x.size
    free = np.ones(p, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    lo = np.full(p, -np.inf) if lower is None else np.broadcast_to(lower, (p,))
    hi = np.full(p, np.inf) if upper is None else np.broadcast_to(upper, (p,))
    x = np.minimum(np.maximum(x, lo), hi)
    if not free.any():
        return NewtonResult(x, float(fun(x)), 0.0, 0, True, "no free coordinates")

    f = float(fun(x))
    if not np.isfinite(f):
        return NewtonResult(x, f, np.inf, 0, False, "objective not finite at start")
    g = grad(x)[free]
    gnorm = float(np.linalg.norm(g))
    for it in range(max_iter):
        if gnorm < tol:
            return NewtonResult(x, f, gnorm, it, True)
        h = hess(x)[np.ix_(free, free)]
        eye = np.eye(h.shape[0])
        lam = 0.0
        lam0 = 1e-8 * max(1.0, float(np.abs(np.diag(h)).max()))
        accepted = False
        for _ in range(MAX_SHIFTS):
            try:
                c = np.linalg.cholesky(h + lam * eye)
            except np.linalg.LinAlgError:
                lam = lam0 if lam == 0.0 else 2.0 * lam
                continue
            d = -np.linalg.solve(c.T, np.linalg.solve(c, g))
            x_new = x.copy()
            x_new[free] += d
            x_new = np.minimum(np.maximum(x_new, lo), hi)
            step = (x_new - x)[free]
            f_new = float(fun(x_new))
            slope = float(g @ step)
            if np.isfinite(f_new) and f_new <= f + ARMIJO_C * slope:
                accepted = True
                break
            # at the precision floor of f, accept steps that shrink the gradient
            if np.isfinite(f_new) and -slope <= 1e-13 * (1.0 + abs(f)):
                g_new = grad(x_new)[free]
                if np.linalg.norm(g_new) < gnorm:
                    accepted = True
                    break
            lam = lam0 if lam == 0.0 else 2.0 * lam
        if not accepted:
            return NewtonResult(x, f, gnorm, it, False, "line search failed")
        x, f = x_new, f_new
        g = grad(x)[free]
        gnorm = float(np.linalg.norm(g))
    converged = gnorm < tol
    return NewtonResult(x, f, gnorm, max_iter, converged,
                        "" if converged else "iteration limit reached")
