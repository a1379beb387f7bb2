"""Analytic risk of linear estimators and the optimal-similarity formulas."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DimensionError, InvalidInputError

#: Returned where an optimal similarity or threshold is unbounded.
INFINITE = math.inf


@dataclass(frozen=True)
class RiskBreakdown:
    total: float
    variance_term: float
    bias_term: float


def analytic_risk(W, sigma, mu):
    """Risk ``E||W ybar - mu||^2`` for ``ybar ~ (mu, diag(sigma))``.

    Equals ``tr(W Sigma W^T) + mu^T (I - W)^T (I - W) mu``.
    """
    W = np.asarray(W, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mu = np.asarray(mu, dtype=float)
    T = mu.shape[0]
    if W.shape != (T, T) or sigma.shape != (T,):
        raise DimensionError(f"W {W.shape}, sigma {sigma.shape}, mu {mu.shape} do not agree")
    variance = float(np.sum(W * W * sigma[None, :]))
    resid = mu - W @ mu
    bias = float(resid @ resid)
    return RiskBreakdown(variance + bias, variance, bias)


def two_task_coefficients(a, s1, s2, T=2):
    """Weights of ``ybar_1`` and ``ybar_2`` in the first two-task MTA estimate (gamma = 1).

    ``s1``, ``s2`` are the sample-mean variances ``sigma_t^2 / N_t``.
    """
    den = T + s1 * a + s2 * a
    return (T + s2 * a) / den, s1 * a / den


def two_task_mse(a, s1, s2, delta):
    """MSE of the first two-task MTA estimate with similarity ``a`` and gamma = 1.

    ``delta = mu_2 - mu_1``.  At ``a = 0`` this is the single-task MSE ``s1``.
    """
    if a < 0 or s1 <= 0 or s2 <= 0:
        raise InvalidInputError("need a >= 0 and positive sample-mean variances")
    T = 2.0
    den = (T + s1 * a + s2 * a) ** 2
    var = s1 * (T * T + 2 * T * s2 * a + s1 * s2 * a * a + s2 * s2 * a * a) / den
    bias = delta * delta * s1 * s1 * a * a / den
    return var + bias


def two_task_threshold(a, s1, s2):
    """Squared mean separation below which two-task MTA beats the sample mean on task 1.

    Returns ``INFINITE`` for ``a == 0``.
    """
    if a < 0:
        raise InvalidInputError("a must be non-negative")
    if a == 0:
        return INFINITE
    return 4.0 / a + s1 + s2


def optimal_a_two_task(delta):
    """Risk-minimizing two-task similarity ``2 / delta^2`` (``INFINITE`` when delta = 0)."""
    if delta == 0:
        return INFINITE
    return 2.0 / (delta * delta)


def optimal_a_constant(mu):
    """Risk-minimizing constant similarity for T tasks with true means ``mu``.

    ``2 / [(1/(T(T-1))) sum_{r,s} (mu_r - mu_s)^2]``; ``INFINITE`` if all means
    coincide.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    T = mu.size
    if T < 2:
        raise InvalidInputError("optimal constant similarity needs at least two tasks")
    dev = mu - mu.mean()
    ss = float(dev @ dev)
    if ss == 0.0:
        return INFINITE
    # sum over ordered pairs = 2 T ss, so a* = (T - 1) / ss
    return (T - 1) / ss
