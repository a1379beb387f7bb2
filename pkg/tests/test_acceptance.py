"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``.
"""

import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import EXPERT_MATRIX, synthetic_density_tasks  # noqa: E402
from mta.cli import main  # noqa: E402
from mta.estimators import (  # noqa: E402
    TaskSummary,
    average_of_means_weight_matrix,
    constant_mta,
    james_stein,
    minimax_mta,
    mta_form_from_alpha,
    pooled_mean_weight_matrix,
    single_task,
)
from mta.graph_core import build_laplacian, mta_apply_fast, mta_weights_dense  # noqa: E402
from mta.mtkde import DensityTask, loo_mrr, mtkde_grid  # noqa: E402
from mta.risk import (  # noqa: E402
    analytic_risk,
    optimal_a_constant,
    optimal_a_two_task,
    two_task_coefficients,
    two_task_mse,
)
from mta.simulate import FixedDesign, WorldConfig, run_study  # noqa: E402


def _rng(k):
    return np.random.default_rng(1000 + k)


def stochasticity_suite():
    r = _rng(1)
    t0 = time.perf_counter()
    worst_sum, worst_min = 0.0, 0.0
    for _ in range(500):
        T = int(r.integers(1, 51))
        A = r.uniform(0, r.choice([0.1, 1.0, 10.0]), (T, T)) * (r.random((T, T)) < r.uniform(0.2, 1))
        sigma = np.exp(r.uniform(np.log(1e-3), np.log(10.0), T))
        gamma = r.uniform(0, 32)
        W = mta_weights_dense(sigma, build_laplacian(A), gamma)
        worst_sum = max(worst_sum, float(np.abs(W.sum(axis=1) - 1).max()))
        worst_min = min(worst_min, float(W.min()))
    elapsed = time.perf_counter() - t0
    ok = worst_sum <= 1e-10 and worst_min >= -1e-12 and elapsed < 10
    return ok, f"max |row sum - 1| = {worst_sum:.2e}, min entry = {worst_min:.2e}, {elapsed:.2f}s"


def fast_path_oracle():
    r = _rng(2)
    worst = 0.0
    for T in (2, 10, 100, 1000):
        J = np.ones((T, T))
        for _ in range(50):
            sigma = r.uniform(0.01, 3, T)
            c = r.uniform(0, 5)
            y = r.normal(0, 2, T)
            dense = np.linalg.solve(np.eye(T) + c * sigma[:, None] * (T * np.eye(T) - J), y)
            fast = mta_apply_fast(sigma, c, y)
            worst = max(worst, float(np.max(np.abs(fast - dense)) / np.max(np.abs(dense))))

    def timed(T):
        sigma = r.uniform(0.1, 1, T)
        y = r.normal(size=T)
        mta_apply_fast(sigma, 0.7, y)
        runs = []
        for _ in range(9):
            t0 = time.perf_counter()
            mta_apply_fast(sigma, 0.7, y)
            runs.append(time.perf_counter() - t0)
        return float(np.median(runs))

    small, big = timed(10 ** 5), timed(10 ** 6)
    ratio = big / small
    ok = worst <= 1e-10 and big < 1.0 and ratio <= 20
    return ok, f"max rel err = {worst:.2e}, T=1e6 in {big * 1e3:.1f} ms, 1e5->1e6 ratio {ratio:.1f}x"


def two_task_closed_form():
    r = _rng(3)
    worst = 0.0
    for _ in range(200):
        var = r.uniform(0.05, 5, 2)
        n = r.integers(1, 100, 2)
        a = r.uniform(0, 20)
        s1, s2 = var / n
        W = mta_weights_dense(np.array([s1, s2]), build_laplacian([[0, a], [a, 0]]), 1.0)
        first = np.array(two_task_coefficients(a, s1, s2))
        second = np.array(two_task_coefficients(a, s2, s1))[::-1]
        worst = max(worst, float(np.abs(first - W[0]).max()), float(np.abs(second - W[1]).max()))
    return worst <= 1e-12, f"max abs diff = {worst:.2e} over 200 draws"


def optimal_a_oracles():
    r = _rng(4)
    grid = np.logspace(-2, 2, 401)
    step = grid[1] / grid[0]
    misses = 0
    for _ in range(50):
        s1, s2 = r.uniform(0.1, 3, 2)
        delta = r.uniform(0.15, 10)
        total = [two_task_mse(a, s1, s2, delta) + two_task_mse(a, s2, s1, delta) for a in grid]
        best = grid[int(np.argmin(total))]
        a_star = optimal_a_two_task(delta)
        misses += not (a_star / step * (1 - 1e-12) <= best <= a_star * step * (1 + 1e-12))

    worst = 0.0
    T = 5
    J = np.ones((T, T))
    for _ in range(20):
        mu = r.normal(0, r.uniform(0.3, 3), T)
        sigma = r.uniform(0.05, 2, T)
        s_bar = sigma.sum() / T

        def risk(a):
            W = np.linalg.inv(np.eye(T) + (s_bar / T) * a * (T * np.eye(T) - J))
            return analytic_risk(W, sigma, mu).total

        a_star = optimal_a_constant(mu)
        # fine log grid spanning 4 decades, not aligned with a*
        agrid = 1.0037 * a_star * np.logspace(-2, 2, 8001)
        best = agrid[int(np.argmin([risk(a) for a in agrid]))]
        worst = max(worst, abs(best / a_star - 1))
    ok = misses == 0 and worst <= 0.01
    return ok, f"two-task grid misses = {misses}/50, constant a* max rel gap = {worst:.2e}"


def risk_formula():
    r = _rng(5)
    worst = 0.0
    T = 4
    for _ in range(20):
        sigma = r.uniform(0.2, 2, T)
        mu = r.normal(0, 1.5, T)
        W = mta_weights_dense(sigma, build_laplacian(r.uniform(0, 2, (T, T))), r.uniform(0.5, 10))
        y = mu + r.standard_normal((100_000, T)) * np.sqrt(sigma)
        err = y @ W.T - mu
        mc = float(np.mean(np.sum(err * err, axis=1)))
        exact = analytic_risk(W, sigma, mu).total
        worst = max(worst, abs(mc / exact - 1))
    return worst <= 0.015, f"max relative gap = {100 * worst:.2f}% over 20 cases"


def fixed_design_percent_change():
    t0 = time.perf_counter()
    out = {}
    for n in (2, 20):
        fixed = FixedDesign((0.0, 0.0), (1.0, 1.0), (n,), a=1.0)
        rep = run_study(WorldConfig(T=2, replicates=10_000, seed=2024, fixed=fixed), ["fixed-a-mta"])
        out[n] = rep.pct_change["fixed-a-mta"]
    elapsed = time.perf_counter() - t0
    ok = abs(out[2] + 20) <= 3 and abs(out[20] + 5) <= 2 and elapsed < 30
    return ok, f"N=2: {out[2]:+.2f}%, N=20: {out[20]:+.2f}%, {elapsed:.1f}s"


def threshold_boundary():
    r = _rng(7)
    W = mta_weights_dense(np.ones(2), build_laplacian([[0, 1], [1, 0]]), 1.0)
    z = []
    for d2 in (3.0, 12.0):
        y = np.array([0.0, math.sqrt(d2)]) + r.standard_normal((100_000, 2))
        diff = (y @ W[0]) ** 2 - y[:, 0] ** 2
        z.append(diff.mean() / (diff.std(ddof=1) / math.sqrt(diff.size)))
    ok = z[0] < -2 and z[1] > 2
    return ok, f"z(delta^2=3) = {z[0]:.1f}, z(delta^2=12) = {z[1]:.1f}"


def two_task_identities():
    r = _rng(8)
    worst_cm, worst_js = 0.0, 0.0
    for _ in range(100):
        s = TaskSummary(r.normal(0, r.uniform(0.1, 5), 2), r.uniform(0.05, 4, 2), r.integers(1, 100, 2))
        gamma = r.uniform(0.1, 4)
        c, m = constant_mta(s, gamma), minimax_mta(s, gamma)
        worst_cm = max(worst_cm, float(np.max(np.abs(c.values - m.values) / np.maximum(1, np.abs(c.values)))))
        worst_js = max(worst_js, float(np.max(np.abs(james_stein(s).values - single_task(s).values))))
    ok = worst_cm <= 1e-10 and worst_js == 0.0
    return ok, f"constant vs minimax max diff = {worst_cm:.2e}, js vs single-task max diff = {worst_js:.1e}"


def mta_form_suite():
    r = _rng(9)
    w_pm = w_am = w_alpha = 0.0
    for _ in range(100):
        T = int(r.integers(1, 15))
        y = r.normal(0, 3, T)
        n = r.integers(1, 200, T).astype(float)
        lam = r.uniform(0.01, 1.0)
        pooled = np.sum(n * y) / n.sum()
        w_pm = max(w_pm, float(np.abs(pooled_mean_weight_matrix(n, lam) @ y - (lam * y + (1 - lam) * pooled)).max()))
        w_am = max(w_am, float(np.abs(average_of_means_weight_matrix(T, lam) @ y - (lam * y + (1 - lam) * y.mean())).max()))

        gamma = 1.0 / r.uniform(0.02, 1.0)
        alpha = r.dirichlet(np.ones(T)) * (1 - 1 / gamma)
        explicit = y / gamma + alpha @ y
        # independent matrix form: L(1 alpha^T) = sum(alpha) I - 1 alpha^T
        L = alpha.sum() * np.eye(T) - np.outer(np.ones(T), alpha)
        matrix = np.linalg.solve(np.eye(T) + gamma * L, y)
        lib = mta_form_from_alpha(gamma, alpha, y)
        w_alpha = max(w_alpha, float(np.abs(matrix - explicit).max()), float(np.abs(lib - explicit).max()))
    ok = w_pm <= 1e-12 and w_am <= 1e-12 and w_alpha <= 1e-10
    return ok, f"pooled-mean {w_pm:.1e}, average-of-means {w_am:.1e}, alpha form {w_alpha:.1e}"


def large_sample_limit():
    L = build_laplacian(np.ones((5, 5)) - np.eye(5))
    norms = [
        float(np.abs(mta_weights_dense(np.full(5, 1.0 / 10 ** k), L, 1.0) - np.eye(5)).sum(axis=1).max())
        for k in range(1, 9)
    ]
    mono = all(b <= a for a, b in zip(norms, norms[1:]))
    ok = mono and norms[-1] < 1e-6
    return ok, f"monotone = {mono}, ||W - I||_inf at N=1e8: {norms[-1]:.2e}"


def simulation_trends():
    t0 = time.perf_counter()
    names = ["constant-mta", "minimax-mta", "js"]
    failures = []
    worst_minimax = -math.inf
    for sm in (0.01, 0.1, 1.0, 10.0):
        rep = run_study(WorldConfig(T=25, sigma_mu_sq=sm, replicates=2000, seed=77), names)
        if sm <= 0.1:
            for e in names:
                if not rep.pct_change[e] < -2 * rep.pct_stderr[e]:
                    failures.append(f"{e}@{sm}")
        z = rep.pct_change["minimax-mta"] - 2 * rep.pct_stderr["minimax-mta"]
        worst_minimax = max(worst_minimax, z)
        if z > 0:
            failures.append(f"minimax>0@{sm}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 300
    detail = f"failures = {failures or 'none'}, worst minimax pct - 2se = {worst_minimax:+.2f}, {elapsed:.1f}s"
    return ok, detail


def mtkde_properties():
    tasks = synthetic_density_tasks(12, snap=0.5, n=(4, 10))
    pts = np.unique(np.vstack([t.points for t in tasks]), axis=0)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        tdir = tmp / "tasks"
        tdir.mkdir()
        for t in tasks:
            np.savetxt(tdir / f"{t.task_id}.csv", t.points, delimiter=",", fmt="%.17g")
        grid = tmp / "grid.csv"
        np.savetxt(grid, pts, delimiter=",", fmt="%.17g")
        a, b = tmp / "single.csv", tmp / "zero.csv"
        main(["kde", "--tasks", str(tdir), "--grid", str(grid), "--mode", "single", "--out", str(a)])
        main(["kde", "--tasks", str(tdir), "--grid", str(grid), "--mode", "constant", "--gamma", "0", "--out", str(b)])
        bitwise = a.read_bytes() == b.read_bytes()
    single = mtkde_grid(tasks, pts, mode="single")
    lo, hi = single.min(axis=0), single.max(axis=0)
    inside = True
    for mode, sim in (("constant", None), ("minimax", None), ("expert", EXPERT_MATRIX)):
        for gamma in (0.5, 1.0, 4.0, 32.0):
            mt = mtkde_grid(tasks, pts, mode=mode, gamma=gamma, similarity=sim)
            inside &= bool(np.all(mt >= lo - 1e-15) and np.all(mt <= hi + 1e-15))
    one = loo_mrr([DensityTask("a", [[0.0, 0.0]] * 3), DensityTask("b", [[0.0, 0.0]] * 2)], [[0.0, 0.0]])
    ok = bitwise and inside and one.mrr == 1.0
    return ok, f"bitwise gamma=0 = {bitwise}, envelope = {inside}, single-point MRR = {one.mrr}"


def simulate_determinism():
    args = ["simulate", "--T", "8", "--sigma-mu-grid", "0.1,1", "--replicates", "60", "--seed", "31337",
            "--estimators", "single-task,js,constant-mta,minimax-mta,oracle-mta", "--cv"]
    saved = os.environ.get("MTA_THREADS")
    outputs = []
    try:
        with tempfile.TemporaryDirectory() as tmp:
            for threads in ("1", "8"):
                os.environ["MTA_THREADS"] = threads
                out = Path(tmp) / f"t{threads}"
                if main(args + ["--out", str(out)]) != 0:
                    return False, f"cmd_simulate failed at {threads} threads"
                outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    finally:
        if saved is None:
            os.environ.pop("MTA_THREADS", None)
        else:
            os.environ["MTA_THREADS"] = saved
    same = outputs[0] == outputs[1]
    return same, f"{len(outputs[0])} files byte-identical at 1 and 8 threads: {same}"


CRITERIA = {
    1: ("weight matrices are right-stochastic", stochasticity_suite),
    2: ("O(T) path matches dense solve and scales linearly", fast_path_oracle),
    3: ("two-task closed-form coefficients", two_task_closed_form),
    4: ("optimal similarity oracles", optimal_a_oracles),
    5: ("analytic risk vs Monte-Carlo", risk_formula),
    6: ("fixed two-task design percent change", fixed_design_percent_change),
    7: ("two-task dominance boundary", threshold_boundary),
    8: ("T = 2 identities", two_task_identities),
    9: ("matrix forms equal explicit forms", mta_form_suite),
    10: ("simulation trends", simulation_trends),
    11: ("W -> I as N grows", large_sample_limit),
    12: ("MT-KDE properties", mtkde_properties),
    13: ("simulation output independent of threads", simulate_determinism),
}


def run_criterion(number):
    title, fn = CRITERIA[number]
    ok, detail = fn()
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} -- {detail}"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, line = run_criterion(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
