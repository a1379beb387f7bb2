"""Mean estimators: single-task, pooled, James-Stein and the MTA family.

Every estimator takes a :class:`TaskSummary` (sample means, per-sample
variances and counts) and returns an :class:`EstimateVector`.  The MTA
estimators are convex combinations of the sample means.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InternalError, InvalidInputError
from .graph_core import (
    build_laplacian,
    laplacian_unsymmetrized,
    mean_covariance,
    mta_apply_fast,
    mta_weights_dense,
)

VARIANCE_FLOOR = 1e-12
#: Cap on oracle similarities when two true means coincide.
ORACLE_A_MAX = 1e12
VARIANCE_MODES = ("per-task", "pooled")


@dataclass(frozen=True)
class TaskSamples:
    task_id: object
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size == 0:
            raise InvalidInputError(f"task {self.task_id!r} has no samples")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError(f"task {self.task_id!r} has non-finite samples")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class TaskSummary:
    """Sufficient statistics of T tasks.

    ``variances`` are per-sample variances (after flooring); the covariance of
    the sample means is ``variances / counts``.  ``floored`` marks tasks whose
    variance was replaced by the pooled value or the absolute floor.
    """

    means: np.ndarray
    variances: np.ndarray
    counts: np.ndarray
    variance_mode: str = "per-task"
    floored: np.ndarray = None

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).ravel()
        variances = np.asarray(self.variances, dtype=float).ravel()
        counts = np.asarray(self.counts).ravel()
        if not (means.shape == variances.shape == counts.shape) or means.size == 0:
            raise DimensionError("means, variances and counts must be equal-length and non-empty")
        if not np.all(np.isfinite(means)):
            raise InvalidInputError("means must be finite")
        if not np.all(np.isfinite(variances)) or np.any(variances <= 0):
            raise InvalidInputError("variances must be positive and finite")
        if np.any(counts < 1):
            raise InvalidInputError("counts must be >= 1")
        if self.variance_mode not in VARIANCE_MODES:
            raise InvalidInputError(f"unknown variance mode {self.variance_mode!r}")
        floored = self.floored
        floored = np.zeros(means.size, bool) if floored is None else np.asarray(floored, bool)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "counts", counts.astype(np.int64))
        object.__setattr__(self, "floored", floored)

    @property
    def T(self):
        return self.means.size

    @property
    def sigma(self):
        """Diagonal of the sample-mean covariance."""
        return mean_covariance(self.variances, self.counts)


@dataclass(frozen=True)
class EstimateVector:
    values: np.ndarray
    estimator_id: str
    params: dict = field(default_factory=dict)


def _task_values(task):
    vals = task.values if isinstance(task, TaskSamples) else task
    vals = np.asarray(vals, dtype=float).ravel()
    if vals.size == 0:
        raise InvalidInputError("every task needs at least one sample")
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("samples must be finite")
    return vals


def floor_variances(ss, counts, variance_mode="per-task"):
    """Per-task or pooled unbiased variances from within-task sums of squares.

    Works on arrays whose last axis indexes tasks.  A per-task variance below
    the floor (including ``N_t = 1``) is replaced by the pooled variance, and
    that by ``VARIANCE_FLOOR`` if it is degenerate too.

    Returns:
        ``(variances, floored_mask)``
    """
    ss = np.asarray(ss, dtype=float)
    counts = np.asarray(counts, dtype=float)
    df = counts - 1.0
    total_df = np.sum(np.broadcast_to(df, ss.shape), axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pooled = np.where(total_df > 0, np.sum(ss, axis=-1, keepdims=True) / total_df, 0.0)
    pooled = np.where(pooled < VARIANCE_FLOOR, VARIANCE_FLOOR, pooled)
    if variance_mode == "pooled":
        var = np.broadcast_to(pooled, ss.shape).copy()
        return var, np.zeros(ss.shape, bool)
    if variance_mode != "per-task":
        raise InvalidInputError(f"unknown variance mode {variance_mode!r}")
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(df > 0, ss / np.where(df > 0, df, 1.0), 0.0)
    bad = var < VARIANCE_FLOOR
    var = np.where(bad, pooled, var)
    return var, bad


def summarize(tasks, variance_mode="per-task"):
    """Compute the :class:`TaskSummary` of a sequence of tasks.

    ``tasks`` holds :class:`TaskSamples` or plain sequences of floats.

    >>> s = summarize([[0, 2], [10, 14]])
    >>> s.means, s.variances
    (array([ 1., 12.]), array([2., 8.]))
    """
    tasks = list(tasks)
    if not tasks:
        raise InvalidInputError("need at least one task")
    values = [_task_values(t) for t in tasks]
    means = np.array([v.mean() for v in values])
    counts = np.array([v.size for v in values])
    ss = np.array([np.sum((v - m) ** 2) for v, m in zip(values, means)])
    variances, floored = floor_variances(ss, counts, variance_mode)
    return TaskSummary(means, variances, counts, variance_mode, floored)


def single_task(s):
    return EstimateVector(s.means.copy(), "single-task", {})


def one_task_pooled(tasks):
    """Every task gets the grand pooled mean ``sum_ti y_ti / sum_t N_t``."""
    values = [_task_values(t) for t in tasks]
    if not values:
        raise InvalidInputError("need at least one task")
    total = sum(float(v.sum()) for v in values)
    n = sum(v.size for v in values)
    return EstimateVector(np.full(len(values), total / n), "one-task", {})


def mta_general(s, A, gamma=1.0):
    """MTA estimate ``W ybar`` for an arbitrary non-negative similarity ``A``."""
    A = np.asarray(A, dtype=float)
    if A.shape != (s.T, s.T):
        raise DimensionError(f"similarity is {A.shape}, summary has T={s.T}")
    if gamma == 0:
        return EstimateVector(s.means.copy(), "mta", {"gamma": gamma})
    W = mta_weights_dense(s.sigma, build_laplacian(A), gamma)
    return EstimateVector(W @ s.means, "mta", {"gamma": gamma})


def _degenerate(spread, ybar):
    scale = np.maximum(1.0, np.sum(ybar * ybar, axis=-1))
    return spread < 1e-12 * scale


def constant_similarity(ybar):
    """Estimated optimal constant similarity ``a* = 2 / mean_{r != s}(ybar_r - ybar_s)^2``.

    Leading axes are a batch.  Returns ``inf`` where the means coincide (and
    for T = 1, where there are no pairs).
    """
    ybar = np.asarray(ybar, dtype=float)
    T = ybar.shape[-1]
    if T < 2:
        return np.full(ybar.shape[:-1], np.inf)
    dev = ybar - ybar.mean(axis=-1, keepdims=True)
    # sum over ordered pairs of squared differences is 2 T sum (ybar - mean)^2
    msd = 2.0 * T * np.sum(dev * dev, axis=-1) / (T * (T - 1))
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(_degenerate(msd, ybar), np.inf, 2.0 / msd)


def _fast_family(ybar, sigma, gamma, kind):
    """Constant or minimax MTA on arrays; last axis indexes tasks."""
    ybar = np.asarray(ybar, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    T = ybar.shape[-1]
    if gamma == 0 or T == 1:
        return ybar.copy(), np.full(ybar.shape[:-1], 0.0 if gamma == 0 else np.inf)
    if kind == "constant":
        a = constant_similarity(ybar)
        degen = ~np.isfinite(a)
        c = gamma * np.where(degen, 0.0, a) / T
        scale = a
    elif kind == "minimax":
        width = ybar.max(axis=-1) - ybar.min(axis=-1)
        degen = _degenerate(width * width, ybar)
        with np.errstate(divide="ignore"):
            c = np.where(degen, 0.0, 2.0 * gamma / (T * np.where(degen, 1.0, width) ** 2))
        scale = np.where(degen, np.inf, c * T / gamma)
    else:
        raise InvalidInputError(f"unknown fast family {kind!r}")
    out = mta_apply_fast(sigma, c, ybar)
    if np.any(degen):
        grand = np.broadcast_to(ybar.mean(axis=-1, keepdims=True), ybar.shape)
        out = np.where(degen[..., None], grand, out)
    return out, scale


def constant_mta(s, gamma=1.0):
    """Constant MTA: ``A = a* 1 1^T`` with ``a*`` estimated from the sample means.

    All-equal means return their grand mean (the ``a -> inf`` limit).
    """
    values, a = _fast_family(s.means, s.sigma, gamma, "constant")
    return EstimateVector(values, "constant-mta", {"gamma": gamma, "a": float(a)})


def minimax_mta(s, gamma=1.0):
    """Minimax MTA with similarity ``2 / (max ybar - min ybar)^2``."""
    values, a = _fast_family(s.means, s.sigma, gamma, "minimax")
    return EstimateVector(values, "minimax-mta", {"gamma": gamma, "a": float(a)})


def oracle_similarity(true_means, a_max=ORACLE_A_MAX):
    """Pairwise oracle similarity ``2 / (mu_r - mu_s)^2``, capped at ``a_max``."""
    mu = np.asarray(true_means, dtype=float)
    diff2 = (mu[:, None] - mu[None, :]) ** 2
    with np.errstate(divide="ignore"):
        A = np.where(diff2 > 0, 2.0 / np.where(diff2 > 0, diff2, 1.0), np.inf)
    A = np.minimum(A, a_max)
    np.fill_diagonal(A, 0.0)
    return A


def oracle_mta(s, true_means, gamma=1.0):
    mu = np.asarray(true_means, dtype=float).ravel()
    if mu.shape[0] != s.T:
        raise DimensionError(f"got {mu.shape[0]} true means for {s.T} tasks")
    est = mta_general(s, oracle_similarity(mu), gamma)
    return EstimateVector(est.values, "oracle-mta", {"gamma": gamma})


def james_stein(s):
    """Positive-part James-Stein (Bock form, effective dimension T).

    Shrinks toward the average of the sample means, weighting deviations by
    the inverse sample-mean covariance.  For T <= 3 it is the single-task
    estimate.
    """
    ybar = s.means
    T = s.T
    if T <= 3:
        return EstimateVector(ybar.copy(), "js", {"shrink": 1.0})
    xi = ybar.mean()
    dev = ybar - xi
    q = float(np.sum(dev * dev / s.sigma))
    if q == 0.0:
        return EstimateVector(np.full(T, xi), "js", {"shrink": 0.0})
    shrink = max(0.0, 1.0 - (T - 3) / q)
    return EstimateVector(xi + shrink * dev, "js", {"shrink": shrink})


def _check_lambda(lam):
    if not (0.0 < lam <= 1.0):
        raise InvalidInputError(f"lambda must lie in (0, 1], got {lam!r}")


def js_convex(s, lam):
    """``lam * ybar_t + (1 - lam) * mean(ybar)``."""
    _check_lambda(lam)
    ybar = s.means
    return EstimateVector(lam * ybar + (1.0 - lam) * ybar.mean(), "js-convex", {"lambda": lam})


def pooled_mean_weight_matrix(counts, lam):
    """MTA-form matrix ``(I + (1-lam)/(lam N^T 1) L(1 N^T))^-1``.

    ``L(1 N^T)`` is built without symmetrizing.
    """
    _check_lambda(lam)
    counts = np.asarray(counts, dtype=float)
    T = counts.size
    L = laplacian_unsymmetrized(np.outer(np.ones(T), counts))
    return np.linalg.solve(np.eye(T) + (1.0 - lam) / (lam * counts.sum()) * L, np.eye(T))


def average_of_means_weight_matrix(T, lam):
    """MTA-form matrix ``(I + (1-lam)/(lam T) L(1 1^T))^-1``."""
    _check_lambda(lam)
    L = laplacian_unsymmetrized(np.ones((T, T)))
    return np.linalg.solve(np.eye(T) + (1.0 - lam) / (lam * T) * L, np.eye(T))


def _agree(a, b, tol, what):
    scale = max(1.0, float(np.max(np.abs(a))))
    err = float(np.max(np.abs(a - b)))
    if err > tol * scale:
        raise InternalError(f"{what}: matrix and explicit forms differ by {err:.3e}")


def pooled_mean_mta_form(s, lam):
    """Shrink each mean toward the count-weighted pooled mean.

    The result is cross-checked against its MTA-form matrix.
    """
    _check_lambda(lam)
    ybar = s.means
    pooled = float(np.sum(s.counts * ybar) / np.sum(s.counts))
    direct = lam * ybar + (1.0 - lam) * pooled
    _agree(direct, pooled_mean_weight_matrix(s.counts, lam) @ ybar, 1e-12, "pooled-mean form")
    return EstimateVector(direct, "pooled-mean-mta-form", {"lambda": lam})


def average_of_means_mta_form(s, lam):
    """Shrink each mean toward the unweighted average of means, checked against its MTA form."""
    _check_lambda(lam)
    direct = js_convex(s, lam).values
    _agree(direct, average_of_means_weight_matrix(s.T, lam) @ s.means, 1e-12, "average-of-means form")
    return EstimateVector(direct, "average-of-means-mta-form", {"lambda": lam})


def mta_form_from_alpha(gamma, alpha, ybar):
    """Evaluate ``(I + gamma L(1 alpha^T))^-1 ybar`` with an asymmetric similarity.

    Equivalent to ``ybar_t / gamma + sum_r alpha_r ybar_r`` when
    ``0 < 1/gamma <= 1``, ``alpha >= 0`` and ``sum(alpha) = 1 - 1/gamma``;
    both forms are computed and must agree.
    """
    alpha = np.asarray(alpha, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    if alpha.shape != ybar.shape:
        raise DimensionError(f"alpha has shape {alpha.shape}, ybar has shape {ybar.shape}")
    if not np.isfinite(gamma) or gamma < 1.0:
        raise InvalidInputError(f"constraint 0 < 1/gamma <= 1 violated: gamma={gamma!r}")
    if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
        raise InvalidInputError("constraint alpha_r >= 0 violated")
    target = 1.0 - 1.0 / gamma
    if abs(alpha.sum() - target) > 1e-12 * max(1.0, gamma):
        raise InvalidInputError(
            f"constraint sum(alpha) = 1 - 1/gamma violated: {alpha.sum()!r} != {target!r}"
        )
    T = ybar.size
    explicit = ybar / gamma + float(alpha @ ybar)
    L = laplacian_unsymmetrized(np.outer(np.ones(T), alpha))
    matrix = np.linalg.solve(np.eye(T) + gamma * L, ybar)
    _agree(matrix, explicit, 1e-10, "alpha form")
    return matrix
