"""Adaptive L^q weights and the scalar L^q proximal operator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError

WEIGHT_FLOOR = 1e-10
ROOT_TOL = 1e-13
ROOT_MAXITER = 200


@dataclass(frozen=True)
class TuningConfig:
    """Tuning triplet ``(gamma, r, q)`` together with the rate ``r_T``.

    The penalty level is ``alpha = rate ** r`` and coordinate ``j`` receives
    weight ``alpha * |theta_tilde_j| ** (-gamma)``.
    """

    gamma: float
    r: float
    q: float
    rate: float
    min_weight_floor: float = WEIGHT_FLOOR

    def __post_init__(self):
        if not (0.0 < self.q <= 1.0):
            raise InvalidInputError(f"q must lie in (0, 1], got {self.q}")
        if not self.gamma > -(1.0 - self.q):
            raise InvalidInputError(
                f"gamma must exceed -(1 - q) = {-(1.0 - self.q)}, got {self.gamma}")
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise InvalidInputError(f"rate must be positive, got {self.rate}")
        if not math.isfinite(self.r):
            raise InvalidInputError("r must be finite")
        if not self.min_weight_floor >= 0.0:
            raise InvalidInputError("min_weight_floor must be >= 0")

    def alpha(self) -> float:
        return self.rate ** self.r

    def with_rate(self, rate: float) -> "TuningConfig":
        return TuningConfig(self.gamma, self.r, self.q, rate, self.min_weight_floor)

    def in_selection_window(self) -> bool:
        """True when ``1 < r < 2 - q + gamma``.

        Under ``alpha = rate ** r`` this makes ``alpha / rate -> 0`` while
        ``alpha * rate ** -(2 - q + gamma) -> infinity``.
        """
        return 1.0 < self.r < 2.0 - self.q + self.gamma


@dataclass(frozen=True)
class WeightVector:
    kappa: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=float)
        if k.ndim != 1 or not np.all(np.isfinite(k)) or np.any(k < 0):
            raise InvalidInputError("weights must be a finite nonnegative vector")
        object.__setattr__(self, "kappa", k)

    def __len__(self):
        return self.kappa.size

    def extremes(self, true_active) -> tuple[float, float]:
        """Return ``(a_T, b_T)``: the largest weight on the truly active block
        and the smallest on the truly zero block (``0``/``inf`` if empty)."""
        act = np.asarray(true_active, dtype=bool)
        a = float(self.kappa[act].max()) if act.any() else 0.0
        b = float(self.kappa[~act].min()) if (~act).any() else math.inf
        return a, b


def compute_weights(theta_tilde, cfg: TuningConfig) -> WeightVector:
    theta_tilde = np.asarray(theta_tilde, dtype=float)
    if not np.all(np.isfinite(theta_tilde)):
        raise InvalidInputError("initial estimate contains non-finite entries")
    mag = np.maximum(np.abs(theta_tilde), cfg.min_weight_floor)
    if cfg.gamma == 0.0:
        kappa = np.full(theta_tilde.shape, cfg.alpha())
    else:
        with np.errstate(divide="ignore", over="ignore"):
            kappa = cfg.alpha() * mag ** (-cfg.gamma)
    if not np.all(np.isfinite(kappa)):
        raise NumericalError("weights overflow; raise min_weight_floor")
    return WeightVector(kappa)


def lq_objective(t, g, z, kappa, q):
    """``g (t - z)^2 + kappa |t|^q``; vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    return g * (t - z) ** 2 + kappa * np.abs(t) ** q


def _positive_root(a: float, lam: float, q: float) -> float | None:
    """Largest root on ``(0, a]`` of ``2 (t - a) + lam q t^(q-1)``, or None.

    The stationarity function is convex on ``t > 0`` with its minimum at
    ``t_inflect``; it is positive at ``t = a``, so a root exists iff it is
    nonpositive at ``t_inflect``.
    """
    # floor guards underflow for subnormal lam; h is increasing above t_lo
    t_lo = max((lam * q * (1.0 - q) / 2.0) ** (1.0 / (2.0 - q)), 1e-300)
    if t_lo >= a:
        return None

    def h(t):
        return 2.0 * (t - a) + lam * q * t ** (q - 1.0)

    h_lo = h(t_lo)
    if h_lo > 0.0:
        return None
    if h_lo == 0.0:
        return t_lo
    lo, hi = t_lo, a
    t = a
    for _ in range(ROOT_MAXITER):
        ht = h(t)
        if ht > 0.0:
            hi = t
        elif ht < 0.0:
            lo = t
        else:
            return t
        dh = 2.0 - lam * q * (1.0 - q) * t ** (q - 2.0)
        t_new = t - ht / dh if dh > 0.0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= ROOT_TOL or hi - lo <= ROOT_TOL:
            return t_new
        t = t_new
    raise NumericalError(
        f"L^q prox root finder did not converge (a={a}, lam={lam}, q={q})")


def prox_lq(g: float, z: float, kappa: float, q: float) -> float:
    """Global minimiser of ``g (t - z)^2 + kappa |t|^q`` over the real line.

    ``q = 1`` is plain soft thresholding. For ``q < 1`` the only candidates
    are ``0`` and the larger stationary point on the side of ``z``; ties go
    to ``0``.
    """
    if not (g > 0.0 and math.isfinite(g)):
        raise InvalidInputError(f"curvature g must be positive, got {g}")
    if not (0.0 < q <= 1.0):
        raise InvalidInputError(f"q must lie in (0, 1], got {q}")
    if not (kappa >= 0.0 and math.isfinite(kappa)):
        raise InvalidInputError(f"kappa must be finite and >= 0, got {kappa}")
    if not math.isfinite(z):
        raise InvalidInputError("z must be finite")
    z = float(z)
    if kappa == 0.0:
        return z
    a = abs(z)
    if a == 0.0:
        return 0.0
    s = math.copysign(1.0, z)
    lam = kappa / g
    if q == 1.0:
        return s * max(a - lam / 2.0, 0.0)
    t = _positive_root(a, lam, q)
    if t is None:
        return 0.0
    f_root = (t - a) ** 2 + lam * t ** q
    if f_root < a * a:
        return s * t
    return 0.0


def prox_lq_box(g: float, z: float, kappa: float, q: float,
                lower: float = -math.inf, upper: float = math.inf) -> float:
    """Minimiser of the same scalar objective restricted to ``[lower, upper]``.

    Each side of zero has at most one interior local minimum (the prox root),
    so comparing it with the interval endpoints and ``0`` is exact.
    """
    if not lower <= upper:
        raise InvalidInputError("empty interval")
    t = prox_lq(g, z, kappa, q)
    if lower <= t <= upper:
        return t
    cands = [min(max(t, lower), upper)]
    if q < 1.0 and kappa > 0.0:
        cands.extend(c for c in (lower, upper) if math.isfinite(c))
        if lower <= 0.0 <= upper:
            cands.append(0.0)
        if z != 0.0:
            root = _positive_root(abs(z), kappa / g, q)
            if root is not None and lower <= math.copysign(root, z) <= upper:
                cands.append(math.copysign(root, z))
    vals = [float(lq_objective(c, g, z, kappa, q)) for c in cands]
    best = min(range(len(cands)), key=lambda i: (vals[i], abs(cands[i])))
    return float(cands[best])
