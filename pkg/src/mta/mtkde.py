"""Kernel density estimation with MTA across tasks (MT-KDE).

At each query point the kernel evaluations of a task's samples are treated
as that task's iid samples; their average is the ordinary (un-normalized)
KDE, and MT-KDE replaces the T per-task averages by an MTA estimate.
Regularization happens across tasks only, independently per query.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidInputError
from .estimators import _fast_family, floor_variances
from .graph_core import build_laplacian, mta_weights_dense, validate_similarity

MODES = ("single", "constant", "minimax", "expert")


@dataclass(frozen=True)
class DensityTask:
    task_id: object
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidInputError(f"task {self.task_id!r} needs a non-empty (N, d) point array")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError(f"task {self.task_id!r} has non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float = 1.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise InvalidInputError("bandwidth must be positive")


def kernel_matrix(points, queries, kernel=KernelSpec()):
    """``exp(-||x - z||^2 / (2 h^2))`` for every (point, query) pair, shape (N, G)."""
    points = np.asarray(points, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if points.shape[1] != queries.shape[1]:
        raise DimensionError(f"points are {points.shape[1]}-d, queries are {queries.shape[1]}-d")
    d2 = np.sum((points[:, None, :] - queries[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * kernel.bandwidth ** 2))


def kde_at(task, query, kernel=KernelSpec()):
    """Un-normalized single-task KDE at ``query`` (so one point at the query gives 1)."""
    q = np.asarray(query, dtype=float).reshape(1, -1)
    return float(_stats(kernel_matrix(task.points, q, kernel))[0][0])


def _check_tasks(tasks, dim=None):
    tasks = list(tasks)
    if not tasks:
        raise InvalidInputError("need at least one density task")
    d = tasks[0].dim if dim is None else dim
    for t in tasks:
        if t.dim != d:
            raise DimensionError(f"task {t.task_id!r} is {t.dim}-d, expected {d}-d")
    return tasks, d


def _check_mode(mode, similarity, T):
    if mode not in MODES:
        raise InvalidInputError(f"unknown similarity mode {mode!r}; choose from {MODES}")
    if mode == "expert":
        if similarity is None:
            raise InvalidInputError("expert mode needs a similarity matrix")
        A = validate_similarity(similarity)
        if A.shape != (T, T):
            raise DimensionError(f"similarity is {A.shape}, there are {T} tasks")
        return build_laplacian(A)
    return None


def _combine(means, ss, counts, mode, gamma, lap):
    """MTA across tasks at each query.  ``means``/``ss`` are (G, T)."""
    if mode == "single":
        return means
    var, _ = floor_variances(ss, counts)
    sigma = var / counts
    if mode in ("constant", "minimax"):
        out, _ = _fast_family(means, sigma, gamma, mode)
    elif gamma == 0:
        out = means.copy()
    else:
        out = np.stack([mta_weights_dense(sigma[g], lap, gamma) @ means[g] for g in range(means.shape[0])])
    return np.maximum(out, 0.0)


def _stats(K):
    # one contiguous row per query keeps the summation order independent of G
    Kt = np.ascontiguousarray(K.T)
    m = Kt.sum(axis=1) / Kt.shape[1]
    r = Kt - m[:, None]
    return m, np.sum(r * r, axis=1)


def mtkde_grid(tasks, grid, kernel=KernelSpec(), mode="constant", gamma=1.0, similarity=None):
    """Densities of every task at every grid point, shape (T, G)."""
    tasks, d = _check_tasks(tasks)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != d:
        raise DimensionError(f"grid is {grid.shape[1]}-d, tasks are {d}-d")
    lap = _check_mode(mode, similarity, len(tasks))
    stats = [_stats(kernel_matrix(t.points, grid, kernel)) for t in tasks]
    means = np.stack([s[0] for s in stats], axis=1)
    ss = np.stack([s[1] for s in stats], axis=1)
    counts = np.array([t.points.shape[0] for t in tasks], dtype=float)
    return _combine(means, ss, counts, mode, gamma, lap).T


def mtkde_at(tasks, query, kernel=KernelSpec(), mode="constant", gamma=1.0, similarity=None):
    """Per-task MT-KDE densities at a single query point."""
    q = np.asarray(query, dtype=float).reshape(1, -1)
    return mtkde_grid(tasks, q, kernel, mode, gamma, similarity)[:, 0]


@dataclass(frozen=True)
class LooResult:
    mrr: float
    per_task: dict
    reciprocal_ranks: dict


def grid_index(grid, x, tol=1e-12):
    hit = np.all(np.abs(grid - x) <= tol * np.maximum(1.0, np.abs(x)), axis=1)
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        raise InvalidInputError(f"held-out point {x.tolist()} is not on the grid")
    return int(idx[0])


def rank_of(density, index):
    """1-based rank of ``index`` under descending density, ties broken by grid index."""
    v = density[index]
    return 1 + int(np.sum(density > v)) + int(np.sum(density[:index] == v))


def loo_mrr(tasks, grid, kernel=KernelSpec(), mode="constant", gamma=1.0, similarity=None):
    """Leave-one-out mean reciprocal rank of every task's events on ``grid``.

    Each event is removed from its task, all densities are recomputed (the
    full MTA solve included), grid points are ranked by that task's density
    and the event's own grid point contributes ``1 / rank``.
    """
    tasks, d = _check_tasks(tasks)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != d:
        raise DimensionError(f"grid is {grid.shape[1]}-d, tasks are {d}-d")
    for t in tasks:
        if t.points.shape[0] < 2:
            raise InvalidInputError(f"task {t.task_id!r} needs at least 2 points for leave-one-out")
    lap = _check_mode(mode, similarity, len(tasks))
    Ks = [kernel_matrix(t.points, grid, kernel) for t in tasks]
    stats = [_stats(K) for K in Ks]
    means = np.stack([s[0] for s in stats], axis=1)
    ss = np.stack([s[1] for s in stats], axis=1)
    counts = np.array([t.points.shape[0] for t in tasks], dtype=float)
    rr = {}
    for ti, task in enumerate(tasks):
        ranks = []
        for i, x in enumerate(task.points):
            pos = grid_index(grid, x)
            m, s = _stats(np.delete(Ks[ti], i, axis=0))
            mi, si, ci = means.copy(), ss.copy(), counts.copy()
            mi[:, ti], si[:, ti], ci[ti] = m, s, counts[ti] - 1
            dens = _combine(mi, si, ci, mode, gamma, lap)[:, ti]
            ranks.append(1.0 / rank_of(dens, pos))
        rr[task.task_id] = ranks
    per_task = {k: float(np.mean(v)) for k, v in rr.items()}
    allr = [r for v in rr.values() for r in v]
    return LooResult(float(np.mean(allr)), per_task, rr)
