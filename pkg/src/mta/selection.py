"""Randomized subsample cross-validation of gamma (MTA) or lambda (convex James-Stein)."""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .estimators import (
    EstimateVector,
    _task_values,
    constant_mta,
    js_convex,
    minimax_mta,
    mta_general,
    summarize,
)

DEFAULT_GAMMA_GRID = tuple(2.0 ** k for k in range(-5, 6))
FAMILIES = ("constant-mta", "minimax-mta", "js-convex", "expert-mta")


@dataclass(frozen=True)
class CvConfig:
    folds: int = 5
    split_fraction: float = 0.5
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    seed: int = 0

    def __post_init__(self):
        grid = tuple(float(g) for g in self.gamma_grid)
        if not grid:
            raise InvalidInputError("gamma grid is empty")
        if any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("gamma grid must be positive and strictly increasing")
        if self.folds < 1:
            raise InvalidInputError("folds must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise InvalidInputError("split_fraction must lie in (0, 1)")
        object.__setattr__(self, "gamma_grid", grid)


@dataclass(frozen=True)
class CvResult:
    parameter: float
    estimate: EstimateVector
    grid: tuple
    scores: np.ndarray = field(repr=False)


def parameter_grid(family, cfg):
    """Candidate values: the gamma grid, or ``gamma / (gamma + 1)`` for js-convex."""
    if family == "js-convex":
        return tuple(g / (g + 1.0) for g in cfg.gamma_grid)
    return cfg.gamma_grid


def _fitter(family, similarity):
    if family == "constant-mta":
        return constant_mta
    if family == "minimax-mta":
        return minimax_mta
    if family == "js-convex":
        return js_convex
    if family == "expert-mta":
        if similarity is None:
            raise InvalidInputError("expert-mta needs a similarity matrix")
        return lambda s, g: mta_general(s, similarity, g)
    raise InvalidInputError(f"unknown estimator family {family!r}")


def round_rng(seed, index):
    """Independent generator for CV round ``index``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def half_sample(values, fraction, rng):
    """Random subsample of ``floor(N * fraction)`` values (at least one) without replacement."""
    k = max(1, int(np.floor(values.size * fraction)))
    return values[rng.choice(values.size, size=k, replace=False)]


def cv_select(tasks, family, cfg=None, variance_mode="per-task", similarity=None):
    """Pick the grid value with the lowest subsample-CV error and refit on all data.

    Each round draws an independent random subsample per task, fits every
    candidate on it and scores the squared error against the full-sample
    means.  Ties go to the smallest parameter.
    """
    cfg = cfg or CvConfig()
    fit = _fitter(family, similarity)
    values = [_task_values(t) for t in tasks]
    if not values:
        raise InvalidInputError("need at least one task")
    grid = parameter_grid(family, cfg)
    full = summarize(values, variance_mode)
    target = full.means
    scores = np.zeros(len(grid))
    for r in range(cfg.folds):
        rng = round_rng(cfg.seed, r)
        sub = summarize([half_sample(v, cfg.split_fraction, rng) for v in values], variance_mode)
        for j, p in enumerate(grid):
            err = fit(sub, p).values - target
            scores[j] += np.mean(err * err)
    scores /= cfg.folds
    best = int(np.argmin(scores))
    est = fit(full, grid[best])
    est = replace(est, estimator_id=est.estimator_id + "-cv")
    return CvResult(grid[best], est, grid, scores)
