"""Penalty / KKT monitors and convergence-rate fitting for recorded runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from cul.errors import DegenerateSeries, InvalidArgument


@dataclass(frozen=True)
class PenaltyConfig:
    xi: float
    epsilon: float

    def __post_init__(self):
        if not self.xi >= 0:
            raise InvalidArgument("xi must be nonnegative")


@dataclass(frozen=True)
class KktConfig:
    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgument("tau must be positive")


def hinge(x):
    return np.maximum(x, 0.0)


def penalty(f1, f2, pc: PenaltyConfig):
    """L1 penalty ``f2 + xi * [f1 - eps]_+`` (vectorized over arrays)."""
    return f2 + pc.xi * hinge(np.asarray(f1, dtype=np.float64) - pc.epsilon)


def _residual_sq(grad_f1, grad_f2, eta: float) -> float:
    r = np.asarray(grad_f2, dtype=np.float64) + eta * np.asarray(grad_f1, dtype=np.float64)
    return float(r @ r)


def kkt_first_order(grad_f1, grad_f2, eta: float, psi: float, kc: KktConfig = KktConfig()) -> float:
    """First-order KKT residual; zero exactly at a KKT pair (theta, eta)."""
    if eta < 0:
        raise InvalidArgument("eta must be nonnegative")
    return _residual_sq(grad_f1, grad_f2, eta) + kc.tau * max(psi, 0.0) + eta * max(-psi, 0.0)


def kkt_phase1(grad_f1, grad_f2, eta: float, psi: float, kc: KktConfig = KktConfig()) -> float:
    """Residual for the boundary problem, where psi >= 0 by construction."""
    if psi < 0:
        raise InvalidArgument(f"Phase I control value must be nonnegative, got {psi}")
    return _residual_sq(grad_f1, grad_f2, eta) + kc.tau * psi


def running_min(values) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(values, dtype=np.float64))


def rate_exponent(series, window_fraction: float = 0.5) -> float:
    """Log-log slope of the running minimum over the trailing window.

    ``series`` is a sequence of ``(t, value)`` pairs with ``t > 0``. The fit
    uses ordinary least squares on ``log(t)`` versus ``log(min_{s<=t} value)``.
    """
    if not 0 < window_fraction <= 1:
        raise InvalidArgument("window_fraction must lie in (0, 1]")
    data = np.asarray(series, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidArgument("series must be (t, value) pairs")
    if data.shape[0] < 10:
        raise InvalidArgument("rate_exponent needs at least 10 points")
    t, v = data[:, 0], running_min(data[:, 1])
    if np.any(t <= 0):
        raise InvalidArgument("times must be positive")
    n = max(int(np.ceil(window_fraction * len(t))), 2)
    t, v = t[-n:], v[-n:]
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DegenerateSeries("running minimum reaches zero or is nonfinite in the fit window")
    slope, _ = np.polyfit(np.log(t), np.log(v), 1)
    return float(slope)


def max_increase(values) -> float:
    """Largest one-step increase of a sequence (0 for a nonincreasing one)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return float(max(np.max(np.diff(v)), 0.0))


def is_nonincreasing(values, tol: float = 1e-8) -> bool:
    return max_increase(values) <= tol


def rank_correlation(x, y) -> float:
    """Spearman rank correlation (1.0 for constant-free monotone pairs)."""
    rho = spearmanr(x, y).statistic
    return float(rho)
