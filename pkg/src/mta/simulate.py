"""Monte-Carlo risk studies and holdout evaluation.

Worlds are drawn from Gaussian or uniform hierarchies (or a fixed design),
every requested estimator is run on the same draws, and risks are reported
as percent change against the single-task sample means.  Each
(replicate, task) pair owns a random stream derived from the seed, so the
output does not depend on how replicates are spread over threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import io
import json
import math
import os

import numpy as np

from .errors import InvalidInputError
from .estimators import _task_values, summarize
from .registry import check_names, run_estimator
from .selection import CvConfig, half_sample

FAMILIES = ("gaussian", "uniform")
CSV_COLUMNS = ("sigma_mu_sq", "estimator", "risk", "pct_change", "stderr", "replicates")
_CV_KEY = 2 ** 32


def fmt(x):
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class FixedDesign:
    """Fixed true means, per-sample variances and sample counts (no hierarchy)."""

    mu: tuple
    sigma_sq: tuple
    n: tuple
    a: float = 1.0

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        sig = tuple(float(s) for s in self.sigma_sq)
        n = tuple(int(k) for k in self.n)
        if len(n) == 1:
            n = n * len(mu)
        if not (len(mu) == len(sig) == len(n)) or not mu:
            raise InvalidInputError("fixed design mu, sigma and n must have the same length")
        if any(s <= 0 for s in sig) or any(k < 1 for k in n) or self.a < 0:
            raise InvalidInputError("fixed design needs sigma > 0, n >= 1 and a >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_sq", sig)
        object.__setattr__(self, "n", n)


@dataclass(frozen=True)
class WorldConfig:
    T: int
    sigma_mu_sq: float = 1.0
    family: str = "gaussian"
    n_range: tuple = (2, 100)
    replicates: int = 1000
    seed: int = 0
    fixed: FixedDesign = None

    def __post_init__(self):
        if self.fixed is not None:
            object.__setattr__(self, "T", len(self.fixed.mu))
        if self.T < 1:
            raise InvalidInputError("T must be >= 1")
        if self.family not in FAMILIES:
            raise InvalidInputError(f"family must be one of {FAMILIES}")
        if self.fixed is None and not self.sigma_mu_sq > 0:
            raise InvalidInputError("sigma_mu_sq must be positive")
        lo, hi = self.n_range
        if lo < 1 or hi < lo:
            raise InvalidInputError(f"invalid n_range {self.n_range}")
        if self.replicates < 1:
            raise InvalidInputError("replicates must be >= 1")


@dataclass(frozen=True)
class World:
    mu: np.ndarray
    sigma_sq: np.ndarray
    counts: np.ndarray
    samples: list


def task_rng(seed, replicate, task):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, task)))


def draw_world(cfg, replicate_index):
    """Draw true means, variances, counts and samples for one replicate."""
    T = cfg.T
    mu = np.empty(T)
    sig = np.empty(T)
    counts = np.empty(T, dtype=np.int64)
    samples = []
    lo, hi = cfg.n_range
    for t in range(T):
        rng = task_rng(cfg.seed, replicate_index, t)
        if cfg.fixed is not None:
            m, s2, n = cfg.fixed.mu[t], cfg.fixed.sigma_sq[t], cfg.fixed.n[t]
            y = rng.normal(m, math.sqrt(s2), n)
        elif cfg.family == "gaussian":
            m = rng.normal(0.0, math.sqrt(cfg.sigma_mu_sq))
            # shape 0.9, scale 1.0; scale 1 makes shape-rate identical
            s2 = rng.gamma(0.9, 1.0) + 0.1
            n = int(rng.integers(lo, hi + 1))
            y = rng.normal(m, math.sqrt(s2), n)
        else:
            half = math.sqrt(3.0 * cfg.sigma_mu_sq)
            m = rng.uniform(-half, half)
            s2 = rng.uniform(0.1, 2.0)
            n = int(rng.integers(lo, hi + 1))
            w = math.sqrt(3.0 * s2)
            y = rng.uniform(m - w, m + w, n)
        mu[t], sig[t], counts[t] = m, s2, n
        samples.append(y)
    return World(mu, sig, counts, samples)


@dataclass
class RiskReport:
    """Paired risk comparison of several estimators against single-task.

    ``stderr`` is the Monte-Carlo standard error of each mean risk and
    ``pct_stderr`` the delta-method standard error of each percent change.
    ``per_replicate`` holds the risk of every estimator on every replicate
    (rows) in ``estimators`` order.
    """

    estimators: tuple
    risk: dict
    pct_change: dict
    stderr: dict
    pct_stderr: dict
    replicates: int
    sigma_mu_sq: float = math.nan
    per_replicate: np.ndarray = field(default=None, repr=False)

    def rows(self):
        return [
            (self.sigma_mu_sq, e, self.risk[e], self.pct_change[e], self.stderr[e], self.replicates)
            for e in self.estimators
        ]

    def to_dict(self):
        return {
            "sigma_mu_sq": self.sigma_mu_sq,
            "replicates": self.replicates,
            "estimators": {
                e: {
                    "risk": self.risk[e],
                    "pct_change": self.pct_change[e],
                    "stderr": self.stderr[e],
                    "pct_stderr": self.pct_stderr[e],
                }
                for e in self.estimators
            },
        }


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        for sm, e, risk, pct, se, n in rep.rows():
            w.writerow([fmt(sm), e, fmt(risk), fmt(pct), fmt(se), n])
    return buf.getvalue()


def reports_to_json(reports):
    return json.dumps([r.to_dict() for r in reports], indent=2, allow_nan=True)


def _mean(col):
    return math.fsum(col) / len(col)


def _sd(col, mean):
    if len(col) < 2:
        return 0.0
    return math.sqrt(math.fsum((x - mean) ** 2 for x in col) / (len(col) - 1))


def aggregate(names, risks, sigma_mu_sq=math.nan):
    """Build a :class:`RiskReport` from an (R, E) array of per-replicate risks."""
    risks = np.asarray(risks, dtype=float)
    R = risks.shape[0]
    base = risks[:, names.index("single-task")].tolist()
    base_mean = _mean(base)
    risk, pct, se, pse = {}, {}, {}, {}
    for j, e in enumerate(names):
        col = risks[:, j].tolist()
        m = _mean(col)
        risk[e] = m
        se[e] = _sd(col, m) / math.sqrt(R)
        if e == "single-task":
            pct[e], pse[e] = 0.0, 0.0
        elif base_mean > 0:
            ratio = m / base_mean
            pct[e] = 100.0 * (ratio - 1.0)
            resid = [x - ratio * b for x, b in zip(col, base)]
            pse[e] = 100.0 * _sd(resid, _mean(resid)) / math.sqrt(R) / base_mean
        else:
            pct[e] = 0.0 if m == 0 else math.inf
            pse[e] = math.nan
    return RiskReport(tuple(names), risk, pct, se, pse, R, sigma_mu_sq, risks)


def _names(estimators):
    names = list(dict.fromkeys(estimators))
    check_names(names)
    if "single-task" not in names:
        names.insert(0, "single-task")
    return names


def _threads(threads):
    if threads is None:
        env = os.environ.get("MTA_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InvalidInputError(f"MTA_THREADS must be a positive integer, got {env!r}")
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise InvalidInputError("thread count must be >= 1")
    return threads


def _derived_seed(seed, index):
    ss = np.random.SeedSequence(seed, spawn_key=(index, _CV_KEY))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _parallel_rows(n, fn, threads):
    threads = min(_threads(threads), n)
    if threads == 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves index order, so aggregation is independent of scheduling
        return list(pool.map(fn, range(n)))


def run_study(cfg, estimators, cv_cfg=None, gamma=1.0, threads=None):
    """Average risk of each estimator over ``cfg.replicates`` drawn worlds.

    Per-replicate risk is ``sum_t (est_t - mu_t)^2 / T``.  Single-task is
    always included as the baseline.
    """
    names = _names(estimators)
    if cfg.fixed is None and "fixed-a-mta" in names:
        raise InvalidInputError("fixed-a-mta is only defined for a fixed design")
    cv_cfg = cv_cfg or CvConfig()
    fixed_a = cfg.fixed.a if cfg.fixed is not None else None

    def one(rep):
        world = draw_world(cfg, rep)
        s = summarize(world.samples)
        cv = replace(cv_cfg, seed=_derived_seed(cfg.seed, rep))
        row = np.empty(len(names))
        for j, name in enumerate(names):
            est, _ = run_estimator(
                name,
                world.samples,
                s,
                gamma=gamma,
                true_means=world.mu,
                true_variances=world.sigma_sq,
                fixed_a=fixed_a,
                cv_cfg=cv,
            )
            err = est.values - world.mu
            row[j] = float(err @ err) / cfg.T
        return row

    rows = _parallel_rows(cfg.replicates, one, threads)
    sm = cfg.sigma_mu_sq if cfg.fixed is None else float(np.var(cfg.fixed.mu))
    return aggregate(names, np.vstack(rows), sm)


def holdout_eval(
    tasks,
    estimators,
    draws,
    seed,
    cv_cfg=None,
    variance_mode="per-task",
    gamma=1.0,
    similarity=None,
    threads=None,
):
    """Compare estimators fit on random halves of each task against full-data means.

    The full-sample means act as ground truth.  ``per_replicate`` on the
    returned report carries the paired per-draw risks for downstream
    rank-based testing.
    """
    values = [_task_values(t) for t in tasks]
    if not values:
        raise InvalidInputError("need at least one task")
    short = [i for i, v in enumerate(values) if v.size < 2]
    if short:
        raise InvalidInputError(f"holdout needs N_t >= 2; task(s) {short} have fewer")
    if draws < 1:
        raise InvalidInputError("draws must be >= 1")
    names = _names(estimators)
    if "oracle-mta" in names or "fixed-a-mta" in names:
        raise InvalidInputError("oracle-mta and fixed-a-mta are simulation-only")
    truth = np.array([v.mean() for v in values])
    cv_cfg = cv_cfg or CvConfig()

    def one(d):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(d,)))
        half = [half_sample(v, 0.5, rng) for v in values]
        s = summarize(half, variance_mode)
        cv = replace(cv_cfg, seed=_derived_seed(seed, d))
        row = np.empty(len(names))
        for j, name in enumerate(names):
            est, _ = run_estimator(
                name, half, s, gamma=gamma, variance_mode=variance_mode,
                similarity=similarity, cv_cfg=cv,
            )
            err = est.values - truth
            row[j] = float(err @ err) / truth.size
        return row

    rows = _parallel_rows(draws, one, threads)
    return aggregate(names, np.vstack(rows))
