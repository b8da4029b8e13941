"""Penalized least-squares-approximation objective and its minimisers.

The objective is

    Q(theta) = (theta - theta_tilde)' G (theta - theta_tilde)
               + sum_j kappa_j |theta_j|^q

for a positive-definite ``G``. With ``G = I`` the problem separates into
scalar proximal problems; otherwise cyclic coordinate descent is used, each
coordinate update being an exact scalar solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError
from .penalty import WeightVector, prox_lq_box

CD_TOL = 1e-10
CD_MAX_SWEEPS = 500


@dataclass
class LsaProblem:
    theta_tilde: np.ndarray
    g_hat: np.ndarray
    weights: WeightVector
    q: float
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.theta_tilde = np.asarray(self.theta_tilde, dtype=float)
        p = self.theta_tilde.size
        if self.theta_tilde.ndim != 1 or not np.all(np.isfinite(self.theta_tilde)):
            raise InvalidInputError("theta_tilde must be a finite vector")
        g = np.asarray(self.g_hat, dtype=float)
        if g.shape != (p, p):
            raise InvalidInputError(f"g_hat must be {p}x{p}, got {g.shape}")
        scale = max(np.abs(g).max(), 1e-300)
        if np.abs(g - g.T).max() > 1e-12 * scale:
            raise InvalidInputError("g_hat is not symmetric")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise InvalidInputError("g_hat is not positive definite") from None
        self.g_hat = g
        if not isinstance(self.weights, WeightVector):
            self.weights = WeightVector(self.weights)
        if len(self.weights) != p:
            raise InvalidInputError("weights length does not match theta_tilde")
        if not (0.0 < self.q <= 1.0):
            raise InvalidInputError(f"q must lie in (0, 1], got {self.q}")
        lo = np.full(p, -np.inf) if self.lower is None else np.broadcast_to(
            np.asarray(self.lower, dtype=float), (p,)).copy()
        hi = np.full(p, np.inf) if self.upper is None else np.broadcast_to(
            np.asarray(self.upper, dtype=float), (p,)).copy()
        if np.any(lo >= hi):
            raise InvalidInputError("box requires lower < upper componentwise")
        self.lower, self.upper = lo, hi

    @property
    def p(self) -> int:
        return self.theta_tilde.size

    @property
    def kappa(self) -> np.ndarray:
        return self.weights.kappa

    def clip(self, theta):
        return np.minimum(np.maximum(theta, self.lower), self.upper)


@dataclass
class LsaSolution:
    theta_hat: np.ndarray
    active: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


def eval_objective(prob: LsaProblem, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (prob.p,):
        raise InvalidInputError(f"theta must have length {prob.p}")
    d = theta - prob.theta_tilde
    return float(d @ prob.g_hat @ d + np.sum(prob.kappa * np.abs(theta) ** prob.q))


def _solution(prob, theta, iterations, converged, history=None):
    theta = np.where(theta == 0.0, 0.0, theta)  # normalise -0.0
    return LsaSolution(theta, theta != 0.0, eval_objective(prob, theta),
                       iterations, converged, history or [])


def _is_identity(g, tol=1e-12):
    return np.abs(g - np.eye(g.shape[0])).max() <= tol


def solve_separable(prob: LsaProblem) -> LsaSolution:
    """Exact minimiser when ``G`` is the identity."""
    if not _is_identity(prob.g_hat):
        raise InvalidInputError("solve_separable requires g_hat = I")
    theta = np.array([
        prox_lq_box(1.0, prob.theta_tilde[j], prob.kappa[j], prob.q,
                    prob.lower[j], prob.upper[j])
        for j in range(prob.p)])
    return _solution(prob, theta, 1, True)


def _diag_start(prob):
    d = np.diag(prob.g_hat)
    return np.array([
        prox_lq_box(d[j], prob.theta_tilde[j], prob.kappa[j], prob.q,
                    prob.lower[j], prob.upper[j])
        for j in range(prob.p)])


def _axis_starts(prob):
    """For each ``j``, the exact minimiser along the ``j``-th axis with all
    other coordinates at zero. Cyclic sweeps visit coordinates in a fixed
    order and can lock onto a support that excludes a later coordinate; these
    starts put every single-coordinate support on the table."""
    g, tt = prob.g_hat, prob.theta_tilde
    base = prob.clip(np.zeros(prob.p))
    starts = []
    for j in range(prob.p):
        d = base - tt
        z = tt[j] - (g[j] @ d - g[j, j] * d[j]) / g[j, j]
        t = prox_lq_box(g[j, j], z, prob.kappa[j], prob.q, prob.lower[j], prob.upper[j])
        if t != base[j]:
            start = base.copy()
            start[j] = t
            starts.append(start)
    return starts


def _cd_run(prob, theta, tol, max_sweeps):
    g, tt, kap, q = prob.g_hat, prob.theta_tilde, prob.kappa, prob.q
    theta = theta.astype(float).copy()
    diag = np.diag(g)
    history = [eval_objective(prob, theta)]
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(prob.p):
            d = theta - tt
            cross = g[j] @ d - diag[j] * d[j]
            z = tt[j] - cross / diag[j]
            new = prox_lq_box(diag[j], z, kap[j], q, prob.lower[j], prob.upper[j])
            max_change = max(max_change, abs(new - theta[j]))
            theta[j] = new
        history.append(eval_objective(prob, theta))
        if max_change < tol:
            return theta, sweep, True, history
    return theta, max_sweeps, False, history


def solve_cd(prob: LsaProblem, tol: float = CD_TOL,
             max_sweeps: int = CD_MAX_SWEEPS) -> LsaSolution:
    """Cyclic coordinate descent from several starts; the best result wins.

    Starts: ``theta_tilde`` clipped to the box, the separable solution built
    from ``diag(G)``, the zero vector (clipped), and one single-coordinate
    axis minimiser per coordinate.
    """
    starts = [prob.clip(prob.theta_tilde), _diag_start(prob),
              prob.clip(np.zeros(prob.p))] + _axis_starts(prob)
    best = None
    for start in starts:
        theta, sweeps, ok, hist = _cd_run(prob, start, tol, max_sweeps)
        val = eval_objective(prob, theta)
        if not math.isfinite(val):
            raise NumericalError("objective is not finite")
        if best is None or val < best[0]:
            best = (val, theta, sweeps, ok, hist)
    _, theta, sweeps, ok, hist = best
    return _solution(prob, theta, sweeps, ok, hist)


def solve(prob: LsaProblem) -> LsaSolution:
    """Dispatch: exact separable solve for ``G = I``, coordinate descent otherwise."""
    if _is_identity(prob.g_hat):
        return solve_separable(prob)
    return solve_cd(prob)


def debias_transform(g, active) -> np.ndarray:
    """The ``p0 x p`` matrix ``[I | G11^{-1} G10]`` in the original column order.

    Columns of active coordinates form the identity; columns of inactive
    coordinates hold ``G11^{-1} G10``.
    """
    g = np.asarray(g, dtype=float)
    active = np.asarray(active, dtype=bool)
    if not active.any():
        raise InvalidInputError("active set is empty")
    g11 = g[np.ix_(active, active)]
    g10 = g[np.ix_(active, ~active)]
    out = np.zeros((active.sum(), g.shape[0]))
    out[:, active] = np.eye(active.sum())
    if (~active).any():
        try:
            out[:, ~active] = np.linalg.solve(g11, g10)
        except np.linalg.LinAlgError:
            raise NumericalError("active block of G is singular") from None
    return out


def consistency_bound(g_hat, theta_tilde, theta_star, kappa, q, rate) -> float:
    """Right-hand side of the finite-sample bound

        |(theta_hat - theta*)/rate| <= ||G^-1|| (2 ||G|| |(theta_tilde - theta*)/rate|
                                                  + p0 K* a_T / rate)

    with ``K* = max_{active} |theta*_j|^(q-1)``; it holds for any
    ``theta_hat`` with ``Q(theta_hat) <= Q(theta*)``.
    """
    g_hat = np.asarray(g_hat, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    act = theta_star != 0.0
    p0 = int(act.sum())
    ev = np.linalg.eigvalsh(g_hat)
    u_tilde = np.linalg.norm((np.asarray(theta_tilde) - theta_star) / rate)
    if p0:
        k_star = float(np.max(np.abs(theta_star[act]) ** (q - 1.0)))
        a_t = float(np.max(np.asarray(kappa)[act]))
    else:
        k_star = a_t = 0.0
    return (1.0 / ev[0]) * (2.0 * ev[-1] * u_tilde + p0 * k_star * a_t / rate)
