"""Volatility regression on a fixed horizon.

``Y_t = int_0^t sigma(X_s, theta) dW_s`` with ``sigma(x, theta) =
min(exp(theta'x), M0)`` and an OU covariate ``X`` observed at ``t_i = i T / n``.
The quasi-log-likelihood is the locally Gaussian one,

    H_n(theta) = -1/2 sum_i [ log S_{i-1} + (dY_i)^2 / (h S_{i-1}) ],
    S = sigma^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidInputError, NumericalError
from .optim import newton_minimize
from .seeding import SeedDerivation, as_rng

ETA_CLAMP = 50.0
PRESET_THETA = (1.0, 1.0, -1.0, -1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass
class DiffusionModel:
    theta_true: np.ndarray
    n_steps: int
    horizon: float = 1.0
    ou_speed: float = 0.2
    ou_vol: float = 0.5
    sigma_cap: float = 1e5

    def __post_init__(self):
        self.theta_true = np.asarray(self.theta_true, dtype=float)
        if self.theta_true.ndim != 1:
            raise InvalidInputError("theta_true must be a vector")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise InvalidInputError("n_steps must be an integer >= 2")
        self.n_steps = int(self.n_steps)
        if not (self.horizon > 0 and self.sigma_cap > 0 and self.ou_vol > 0):
            raise InvalidInputError("horizon, sigma_cap and ou_vol must be positive")

    @property
    def p(self) -> int:
        return self.theta_true.size

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    def rate(self) -> float:
        return self.n_steps ** -0.5

    def with_steps(self, n_steps: int) -> "DiffusionModel":
        return DiffusionModel(self.theta_true, n_steps, self.horizon, self.ou_speed,
                              self.ou_vol, self.sigma_cap)


def preset_diffusion_model(n_steps: int) -> DiffusionModel:
    """The 10-covariate configuration used for Tables 3-4."""
    return DiffusionModel(np.array(PRESET_THETA), n_steps)


@dataclass
class DiffusionSample:
    x: np.ndarray  # (n + 1, p)
    y: np.ndarray  # (n + 1,)
    horizon: float = 1.0

    @property
    def n_steps(self) -> int:
        return self.y.size - 1

    @property
    def h(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.h

    def increments(self) -> np.ndarray:
        return np.diff(self.y)


def sigma(model: DiffusionModel, x, theta) -> np.ndarray:
    return np.minimum(np.exp(np.asarray(x) @ theta), model.sigma_cap)


def simulate(model: DiffusionModel, seed=0, index: int = 0,
             extra: tuple = ()) -> DiffusionSample:
    """Exact OU transitions for ``X``; ``Y`` advances with the volatility
    frozen at the left grid point, driven by noise independent of ``X``."""
    sd = seed if isinstance(seed, SeedDerivation) else SeedDerivation(int(seed))
    rng_x = sd.rng(index, "covariates", *extra)
    rng_y = sd.rng(index, "response", *extra)
    n, p, h = model.n_steps, model.p, model.h
    phi = math.exp(-model.ou_speed * h)
    sdev = model.ou_vol * math.sqrt(-math.expm1(-2.0 * model.ou_speed * h)
                                    / (2.0 * model.ou_speed))
    x = np.zeros((n + 1, p))
    x[1:] = lfilter([1.0], [1.0, -phi], rng_x.standard_normal((n, p)) * sdev, axis=0)
    vol = sigma(model, x[:-1], model.theta_true)
    y = np.zeros(n + 1)
    y[1:] = np.cumsum(vol * math.sqrt(h) * rng_y.standard_normal(n))
    return DiffusionSample(x, y, model.horizon)


class DiffusionQuasiLikelihood:
    """``H_n`` with gradient and Hessian; cells where the cap binds contribute
    a constant."""

    def __init__(self, sample: DiffusionSample, sigma_cap: float = 1e5):
        self.x = sample.x[:-1]
        self.dy2 = sample.increments() ** 2
        self.h = sample.h
        self.n = sample.n_steps
        self.dim = sample.x.shape[1]
        self.log_cap = math.log(sigma_cap)

    def _eta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise InvalidInputError(f"theta must have length {self.dim}")
        return self.x @ theta

    def capped(self, theta) -> np.ndarray:
        return self._eta(theta) >= self.log_cap

    def loglik(self, theta) -> float:
        eta = np.minimum(self._eta(theta), self.log_cap)
        return float(-0.5 * np.sum(2.0 * eta + self.dy2 * np.exp(-2.0 * eta) / self.h))

    def gradient_loglik(self, theta) -> np.ndarray:
        eta = self._eta(theta)
        free = eta < self.log_cap
        r = np.where(free, 1.0 - self.dy2 * np.exp(-2.0 * np.minimum(eta, self.log_cap)) / self.h, 0.0)
        return -(r @ self.x)

    def hessian_loglik(self, theta) -> np.ndarray:
        eta = self._eta(theta)
        free = eta < self.log_cap
        w = np.where(free, self.dy2 * np.exp(-2.0 * np.minimum(eta, self.log_cap)) / self.h, 0.0)
        return -2.0 * (self.x * w[:, None]).T @ self.x

    def value(self, theta) -> float:
        if np.min(self._eta(theta)) < -ETA_CLAMP:
            return math.inf
        return -self.loglik(theta)

    def gradient(self, theta) -> np.ndarray:
        return -self.gradient_loglik(theta)

    def hessian(self, theta) -> np.ndarray:
        return -self.hessian_loglik(theta)


def quasi_loglik(model: DiffusionModel, sample: DiffusionSample, theta) -> float:
    return DiffusionQuasiLikelihood(sample, model.sigma_cap).loglik(theta)


def quasi_loglik_gradient(model, sample, theta) -> np.ndarray:
    return DiffusionQuasiLikelihood(sample, model.sigma_cap).gradient_loglik(theta)


def quasi_loglik_hessian(model, sample, theta) -> np.ndarray:
    return DiffusionQuasiLikelihood(sample, model.sigma_cap).hessian_loglik(theta)


def qmle(model: DiffusionModel, sample: DiffusionSample, box=(-10.0, 10.0),
         start=None, lik: DiffusionQuasiLikelihood | None = None) -> np.ndarray:
    lik = lik or DiffusionQuasiLikelihood(sample, model.sigma_cap)
    x0 = np.zeros(lik.dim) if start is None else np.asarray(start, dtype=float)
    res = newton_minimize(lik.value, lik.gradient, lik.hessian, x0,
                          lower=box[0], upper=box[1], tol=1e-8, max_iter=100)
    if not res.converged:
        raise NumericalError(
            f"diffusion QMLE did not converge: {res.message} after {res.iterations} "
            f"iterations, gradient norm {res.grad_norm:.3g}")
    if np.any(res.x <= box[0]) or np.any(res.x >= box[1]):
        raise NumericalError("diffusion QMLE reached the parameter box boundary")
    n_cap = int(lik.capped(res.x).sum())
    if n_cap:
        raise NumericalError(f"volatility cap active on {n_cap} cells at the QMLE")
    return res.x


def g_hat_n(model: DiffusionModel, sample: DiffusionSample, theta_tilde) -> np.ndarray:
    """``-n^-1 d^2 H_n(theta_tilde) 1{positive definite} + n^-1 I``."""
    lik = DiffusionQuasiLikelihood(sample, model.sigma_cap)
    m = -lik.hessian_loglik(theta_tilde) / lik.n
    out = np.eye(lik.dim) / lik.n
    try:
        np.linalg.cholesky(m)
        out += m
    except np.linalg.LinAlgError:
        pass
    return out


def path_fisher_information(sample: DiffusionSample) -> np.ndarray:
    """``(1/2T) int tr((dS) S^-1 (dS) S^-1) dt`` for scalar ``S = exp(2 theta'x)``,
    i.e. ``(2/T) sum_i x_i x_i' h`` on the observation grid."""
    x = sample.x[:-1]
    return 2.0 * x.T @ x * sample.h / sample.horizon
