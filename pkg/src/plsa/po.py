"""Two-stage P-O estimator: identity-weighted L^q selection, then an
unpenalised refit of a loss on the selected sub-model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import InvalidInputError
from .optim import newton_minimize
from .penalty import TuningConfig, compute_weights
from .solver import LsaProblem, LsaSolution, solve_separable

REFIT_TOL = 1e-8
REFIT_MAX_ITER = 100


class LossInterface(Protocol):
    """A smooth loss on the parameter box (to be minimised)."""

    dim: int

    def value(self, theta: np.ndarray) -> float: ...

    def gradient(self, theta: np.ndarray) -> np.ndarray: ...

    def hessian(self, theta: np.ndarray) -> np.ndarray: ...


@dataclass
class PoResult:
    selected_zero_set: np.ndarray  # indices set to zero in stage one
    theta_check: np.ndarray
    refit_converged: bool
    refit_gradient_norm: float
    stage_one: LsaSolution


def po_estimate(theta_tilde, cfg: TuningConfig, loss: LossInterface,
                box=(-np.inf, np.inf)) -> PoResult:
    theta_tilde = np.asarray(theta_tilde, dtype=float)
    p = theta_tilde.size
    if loss.dim != p:
        raise InvalidInputError(f"loss dimension {loss.dim} != {p}")
    weights = compute_weights(theta_tilde, cfg)
    prob = LsaProblem(theta_tilde, np.eye(p), weights, cfg.q, box[0], box[1])
    sel = solve_separable(prob)
    free = sel.active
    zero_set = np.flatnonzero(~free)
    if not free.any():
        return PoResult(zero_set, np.zeros(p), True, 0.0, sel)
    res = newton_minimize(loss.value, loss.gradient, loss.hessian, sel.theta_hat,
                          free=free, lower=prob.lower, upper=prob.upper,
                          tol=REFIT_TOL, max_iter=REFIT_MAX_ITER)
    theta = res.x.copy()
    theta[~free] = 0.0
    return PoResult(zero_set, theta, res.converged, res.grad_norm, sel)
