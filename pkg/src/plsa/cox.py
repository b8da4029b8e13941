"""Cox-type point process driven by Ornstein-Uhlenbeck covariates.

Mark ``alpha`` has intensity ``exp(theta_alpha' X_t)``. Covariates live on a
regular grid of step ``grid_step``; the intensity on the cell
``(t_k, t_k+1]`` is frozen at ``X_{t_k}`` both when simulating and when
evaluating the quasi-log-likelihood, so the estimator sees a correctly
specified model at the discrete level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidInputError, NumericalError
from .optim import newton_minimize
from .seeding import SeedDerivation, as_rng

ETA_CLAMP = 50.0
MAX_CELL_MEAN = 1e6

PRESET_SPEEDS = (0.15, 0.2, 0.25, 0.3, 0.35) * 4
PRESET_THETA = (2.0, -1.0, 1.0, -0.5, -1.5, 1.5, 0.5, 0.75) + (0.0,) * 12


@dataclass
class CoxModel:
    ou_speeds: np.ndarray
    theta_true: np.ndarray  # shape (n_marks, J)
    horizon: float
    ou_vol: float = 0.4
    grid_step: float = 0.01
    x0: str = "zero"  # "zero" or "stationary"

    def __post_init__(self):
        self.ou_speeds = np.atleast_1d(np.asarray(self.ou_speeds, dtype=float))
        self.theta_true = np.atleast_2d(np.asarray(self.theta_true, dtype=float))
        if np.any(self.ou_speeds <= 0):
            raise InvalidInputError("OU speeds must be positive")
        if self.theta_true.shape[1] != self.ou_speeds.size:
            raise InvalidInputError("theta_true columns must match number of covariates")
        if not (self.horizon > 0 and self.grid_step > 0 and self.ou_vol > 0):
            raise InvalidInputError("horizon, grid_step and ou_vol must be positive")
        cells = self.horizon / self.grid_step
        if abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
            raise InvalidInputError("grid_step must divide horizon")
        if self.x0 not in ("zero", "stationary"):
            raise InvalidInputError("x0 must be 'zero' or 'stationary'")

    @property
    def n_covariates(self) -> int:
        return self.ou_speeds.size

    @property
    def n_marks(self) -> int:
        return self.theta_true.shape[0]

    @property
    def p(self) -> int:
        return self.theta_true.size

    @property
    def n_cells(self) -> int:
        return int(round(self.horizon / self.grid_step))

    def grid(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.grid_step

    def stationary_vars(self) -> np.ndarray:
        return self.ou_vol ** 2 / (2.0 * self.ou_speeds)

    def rate(self) -> float:
        return self.horizon ** -0.5

    def with_horizon(self, horizon: float) -> "CoxModel":
        return CoxModel(self.ou_speeds, self.theta_true, horizon, self.ou_vol,
                        self.grid_step, self.x0)


def preset_cox_model(horizon: float, grid_step: float = 0.01) -> CoxModel:
    """The 20-covariate, single-mark configuration used for Tables 1-2."""
    return CoxModel(np.array(PRESET_SPEEDS), np.array([PRESET_THETA]), horizon,
                    ou_vol=0.4, grid_step=grid_step)


@dataclass
class CoxSample:
    covariate_path: np.ndarray  # (n_cells + 1, J), value at each grid point
    event_times: list  # one sorted array per mark
    grid_step: float
    _cell_counts: np.ndarray = field(default=None, repr=False)

    @property
    def n_cells(self) -> int:
        return self.covariate_path.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.n_cells * self.grid_step

    def cell_counts(self) -> np.ndarray:
        """Event counts per (mark, cell); an event at ``t`` in ``(t_k, t_k+1]``
        belongs to cell ``k``."""
        if self._cell_counts is None:
            grid = np.arange(self.n_cells + 1) * self.grid_step
            counts = np.zeros((len(self.event_times), self.n_cells))
            for a, times in enumerate(self.event_times):
                idx = np.searchsorted(grid, times, side="left") - 1
                idx = np.clip(idx, 0, self.n_cells - 1)
                counts[a] = np.bincount(idx, minlength=self.n_cells)
            self._cell_counts = counts
        return self._cell_counts

    def n_events(self) -> int:
        return int(sum(len(t) for t in self.event_times))


def simulate_covariates(model: CoxModel, seed=None) -> np.ndarray:
    """OU paths on the model grid using the exact Gaussian transition."""
    rng = as_rng(seed)
    a, dt = model.ou_speeds, model.grid_step
    phi = np.exp(-a * dt)
    sd = model.ou_vol * np.sqrt(-np.expm1(-2.0 * a * dt) / (2.0 * a))
    noise = rng.standard_normal((model.n_cells, model.n_covariates)) * sd
    if model.x0 == "stationary":
        x0 = rng.standard_normal(model.n_covariates) * np.sqrt(model.stationary_vars())
    else:
        x0 = np.zeros(model.n_covariates)
    path = np.empty((model.n_cells + 1, model.n_covariates))
    path[0] = x0
    for j in range(model.n_covariates):
        path[1:, j], _ = lfilter([1.0], [1.0, -phi[j]], noise[:, j], zi=[phi[j] * x0[j]])
    return path


def simulate_events(model: CoxModel, path: np.ndarray, seed=None) -> list:
    """Piecewise-constant thinning-free simulation: Poisson counts per cell,
    uniform times within the cell."""
    rng = as_rng(seed)
    path = np.asarray(path, dtype=float)
    if path.shape != (model.n_cells + 1, model.n_covariates):
        raise InvalidInputError("path does not match the model grid")
    dt = model.grid_step
    grid = model.grid()
    out = []
    for theta in model.theta_true:
        mean = np.exp(path[:-1] @ theta) * dt
        if not np.all(np.isfinite(mean)) or mean.max() > MAX_CELL_MEAN:
            raise NumericalError("cell intensity overflow; grid or parameters unusable")
        counts = rng.poisson(mean)
        cells = np.repeat(np.arange(model.n_cells), counts)
        u = rng.random(cells.size)
        t = grid[cells] + dt * (1.0 - u)
        t = np.minimum(np.maximum(t, np.nextafter(grid[cells], np.inf)), grid[cells + 1])
        out.append(np.sort(t))
    return out


def simulate(model: CoxModel, seed=0, index: int = 0, extra: tuple = ()) -> CoxSample:
    """Covariates and events from independent streams of ``seed``.

    ``seed`` is a base seed (int) or a ``SeedDerivation``; ``index`` and
    ``extra`` select the stream.
    """
    sd = seed if isinstance(seed, SeedDerivation) else SeedDerivation(int(seed))
    path = simulate_covariates(model, sd.rng(index, "covariates", *extra))
    events = simulate_events(model, path, sd.rng(index, "events", *extra))
    return CoxSample(path, events, model.grid_step)


class CoxQuasiLikelihood:
    """``l_T(theta) = sum_a [ sum_events theta_a'X - int exp(theta_a'X) dt ]``.

    ``theta`` is flattened mark-major: ``theta[a * J + j]``.
    """

    def __init__(self, sample: CoxSample):
        self.sample = sample
        self.x = sample.covariate_path[:-1]
        self.dt = sample.grid_step
        counts = sample.cell_counts()
        self.event_sums = counts @ self.x  # (n_marks, J)
        self.n_marks, self.J = self.event_sums.shape
        self.dim = self.n_marks * self.J
        self.horizon = sample.horizon

    def _split(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise InvalidInputError(f"theta must have length {self.dim}")
        return theta.reshape(self.n_marks, self.J)

    def loglik(self, theta) -> float:
        th = self._split(theta)
        total = 0.0
        for a in range(self.n_marks):
            total += th[a] @ self.event_sums[a] - self.dt * np.exp(self.x @ th[a]).sum()
        return float(total)

    def gradient_loglik(self, theta) -> np.ndarray:
        th = self._split(theta)
        g = np.empty_like(th)
        for a in range(self.n_marks):
            w = np.exp(self.x @ th[a]) * self.dt
            g[a] = self.event_sums[a] - w @ self.x
        return g.ravel()

    def hessian_loglik(self, theta) -> np.ndarray:
        th = self._split(theta)
        h = np.zeros((self.dim, self.dim))
        for a in range(self.n_marks):
            w = np.exp(self.x @ th[a]) * self.dt
            s = slice(a * self.J, (a + 1) * self.J)
            h[s, s] = -(self.x * w[:, None]).T @ self.x
        return h

    # loss interface (negative quasi-log-likelihood), used by Newton and P-O
    def value(self, theta) -> float:
        th = self._split(theta)
        if np.max(self.x @ th.T) > ETA_CLAMP:
            return math.inf
        return -self.loglik(theta)

    def gradient(self, theta) -> np.ndarray:
        return -self.gradient_loglik(theta)

    def hessian(self, theta) -> np.ndarray:
        return -self.hessian_loglik(theta)


def quasi_loglik(sample: CoxSample, theta) -> float:
    return CoxQuasiLikelihood(sample).loglik(theta)


def quasi_loglik_gradient(sample: CoxSample, theta) -> np.ndarray:
    return CoxQuasiLikelihood(sample).gradient_loglik(theta)


def quasi_loglik_hessian(sample: CoxSample, theta) -> np.ndarray:
    return CoxQuasiLikelihood(sample).hessian_loglik(theta)


def qmle(sample: CoxSample, start=None, box=(-10.0, 10.0),
         lik: CoxQuasiLikelihood | None = None) -> np.ndarray:
    """Quasi maximum likelihood estimate by Newton's method on the concave
    ``l_T``. Raises ``NumericalError`` on empty marks, non-convergence, or an
    optimum on the box boundary (diverging likelihood)."""
    lik = lik or CoxQuasiLikelihood(sample)
    for a, times in enumerate(sample.event_times):
        if len(times) == 0:
            raise NumericalError(f"mark {a + 1} has no events; QMLE is not identifiable")
    x0 = np.zeros(lik.dim) if start is None else np.asarray(start, dtype=float)
    res = newton_minimize(lik.value, lik.gradient, lik.hessian, x0,
                          lower=box[0], upper=box[1], tol=1e-8, max_iter=100)
    if not res.converged:
        raise NumericalError(
            f"Cox QMLE did not converge: {res.message} after {res.iterations} "
            f"iterations, gradient norm {res.grad_norm:.3g}")
    if np.any(res.x <= box[0]) or np.any(res.x >= box[1]):
        raise NumericalError("Cox QMLE reached the parameter box boundary")
    return res.x


def _pd(m) -> bool:
    try:
        np.linalg.cholesky(m)
        return True
    except np.linalg.LinAlgError:
        return False


def g_hat_hessian(sample: CoxSample, theta_tilde) -> np.ndarray:
    """``-T^-1 d^2 l_T(theta_tilde) 1{positive definite} + T^-1 I``."""
    lik = CoxQuasiLikelihood(sample)
    t = lik.horizon
    m = -lik.hessian_loglik(theta_tilde) / t
    out = np.eye(lik.dim) / t
    if _pd(m):
        out += m
    return out


def g_hat_moment(sample: CoxSample, theta_tilde) -> np.ndarray:
    """Block diagonal of ``T^-1 int X X' exp(theta_tilde_a'X) dt + T^-1 I``."""
    lik = CoxQuasiLikelihood(sample)
    th = lik._split(theta_tilde)
    t = lik.horizon
    out = np.zeros((lik.dim, lik.dim))
    for a in range(lik.n_marks):
        w = np.exp(lik.x @ th[a]) * lik.dt
        s = slice(a * lik.J, (a + 1) * lik.J)
        out[s, s] = (lik.x * w[:, None]).T @ lik.x / t + np.eye(lik.J) / t
    return out


def gamma_analytic(theta, stationary_vars) -> np.ndarray:
    """``E[X X' exp(theta'X)]`` for independent ``X_j ~ N(0, v_j)``:
    ``(S theta theta' S + S) exp(theta'S theta / 2)`` with ``S = diag(v)``."""
    theta = np.asarray(theta, dtype=float)
    v = np.asarray(stationary_vars, dtype=float)
    st = v * theta
    return (np.outer(st, st) + np.diag(v)) * np.exp(0.5 * theta @ st)


def y_diagnostic(sample: CoxSample, theta, theta_star) -> float:
    """Normalised quasi-log-likelihood ratio ``(l_T(theta) - l_T(theta*)) / T``."""
    lik = CoxQuasiLikelihood(sample)
    return (lik.loglik(theta) - lik.loglik(theta_star)) / lik.horizon
