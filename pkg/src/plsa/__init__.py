"""Penalized least-squares approximation with adaptive L^q penalties."""
from .errors import DataError, InvalidInputError, NumericalError
from .penalty import TuningConfig, WeightVector, compute_weights, prox_lq, prox_lq_box
from .po import PoResult, po_estimate
from .solver import (LsaProblem, LsaSolution, consistency_bound, debias_transform,
                     eval_objective, solve, solve_cd, solve_separable)

__all__ = [
    "DataError", "InvalidInputError", "NumericalError",
    "TuningConfig", "WeightVector", "compute_weights", "prox_lq", "prox_lq_box",
    "PoResult", "po_estimate",
    "LsaProblem", "LsaSolution", "consistency_bound", "debias_transform",
    "eval_objective", "solve", "solve_cd", "solve_separable",
]
