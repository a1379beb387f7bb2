"""Command-line interface: ``mta estimate``, ``mta simulate`` and ``mta kde``.

Exit codes: 0 success, 2 malformed input or invalid flags, 1 internal
invariant violation.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import align_similarity, read_density_tasks, read_points, read_similarity, read_task_data
from .errors import InternalError, InvalidInputError
from .estimators import VARIANCE_MODES, summarize
from .mtkde import MODES, KernelSpec, loo_mrr, mtkde_grid
from .registry import CV_VARIANT, ESTIMATORS, check_names, run_estimator
from .selection import CvConfig
from .simulate import (
    FAMILIES,
    FixedDesign,
    WorldConfig,
    fmt,
    reports_to_csv,
    reports_to_json,
    run_study,
)

log = logging.getLogger("mta")


class UsageError(InvalidInputError):
    pass


def _floats(text, flag):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text, flag):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected a comma-separated list of integers, got {text!r}") from None


def _write_csv(path, header, rows):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_estimate(args):
    tasks = read_task_data(args.data)
    name = args.estimator
    if args.cv and name in CV_VARIANT:
        name = CV_VARIANT[name]
    elif args.cv and not name.endswith("-cv"):
        raise UsageError(f"--cv is not available for estimator {args.estimator!r}")
    if name in ("oracle-mta", "fixed-a-mta"):
        raise UsageError(f"{name} is only available in simulations")
    similarity = None
    if name.startswith("expert-mta"):
        if not args.similarity:
            raise UsageError("expert-mta needs --similarity")
        labels, A = read_similarity(args.similarity)
        similarity = align_similarity(labels, A, [t.task_id for t in tasks])
    elif args.similarity:
        raise UsageError("--similarity is only used by expert-mta")
    values = [t.values for t in tasks]
    s = summarize(values, args.variance_mode)
    cv_cfg = CvConfig(folds=args.folds, seed=args.seed)
    est, selected = run_estimator(
        name, values, s, gamma=args.gamma, variance_mode=args.variance_mode,
        similarity=similarity, cv_cfg=cv_cfg,
    )
    rows = [
        (t.task_id, int(n), fmt(m), fmt(e))
        for t, n, m, e in zip(tasks, s.counts, s.means, est.values)
    ]
    _write_csv(args.out, ("task_id", "n", "sample_mean", "estimate"), rows)
    meta = {
        "estimator": name,
        "gamma": args.gamma,
        "variance_mode": args.variance_mode,
        "variance_fallback": [t.task_id for t, f in zip(tasks, s.floored) if f],
        "params": {k: float(v) for k, v in est.params.items()},
    }
    if selected is not None:
        meta["selected_parameter"] = selected
        meta["selected_parameter_name"] = "lambda" if name == "js-cv" else "gamma"
        meta["seed"] = args.seed
        meta["folds"] = args.folds
    _write_json(str(args.out) + ".json", meta)
    return 0


def _fixed_design(args):
    given = [args.fixed_mu, args.fixed_sigma, args.fixed_n]
    if all(g is None for g in given):
        if args.a is not None:
            raise UsageError("--a requires --fixed-mu, --fixed-sigma and --fixed-n")
        return None
    if any(g is None for g in given):
        raise UsageError("--fixed-mu, --fixed-sigma and --fixed-n must be given together")
    mu = _floats(args.fixed_mu, "--fixed-mu")
    sig = _floats(args.fixed_sigma, "--fixed-sigma")
    n = _ints(args.fixed_n, "--fixed-n")
    if len(sig) != len(mu) or len(n) not in (1, len(mu)):
        raise UsageError("--fixed-mu, --fixed-sigma and --fixed-n lengths disagree")
    if args.T is not None and args.T != len(mu):
        raise UsageError(f"--T {args.T} disagrees with {len(mu)} fixed means")
    return FixedDesign(mu, sig, n, 1.0 if args.a is None else args.a)


def cmd_simulate(args):
    fixed = _fixed_design(args)
    names = [e.strip() for e in args.estimators.split(",") if e.strip()]
    check_names(names)
    if args.cv:
        names += [CV_VARIANT[n] for n in names if n in CV_VARIANT]
    if "expert-mta" in names or "expert-mta-cv" in names:
        raise UsageError("expert-mta needs a similarity matrix and cannot be simulated")
    if fixed is not None:
        if "fixed-a-mta" not in names:
            names.append("fixed-a-mta")
        grid = [float(np.var(fixed.mu))]
        T = len(fixed.mu)
    else:
        if "fixed-a-mta" in names:
            raise UsageError("fixed-a-mta needs a fixed design (--fixed-mu ...)")
        if args.T is None or args.sigma_mu_grid is None:
            raise UsageError("--T and --sigma-mu-grid are required without a fixed design")
        grid = _floats(args.sigma_mu_grid, "--sigma-mu-grid")
        if not grid or any(g <= 0 for g in grid):
            raise UsageError("--sigma-mu-grid needs positive values")
        T = args.T
    n_range = tuple(_ints(args.n_range, "--n-range"))
    if len(n_range) != 2:
        raise UsageError("--n-range takes two integers 'lo,hi'")
    cv_cfg = CvConfig(folds=args.folds)
    reports = []
    for sm in grid:
        cfg = WorldConfig(
            T=T, sigma_mu_sq=sm, family=args.family, n_range=n_range,
            replicates=args.replicates, seed=args.seed, fixed=fixed,
        )
        log.info("simulating %s T=%d sigma_mu^2=%g", args.family, T, sm)
        reports.append(run_study(cfg, names, cv_cfg=cv_cfg, gamma=args.gamma))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.family}_T{T}" + ("_fixed" if fixed else "")
    (out / f"{stem}.csv").write_text(reports_to_csv(reports), encoding="utf-8")
    (out / f"{stem}.json").write_text(reports_to_json(reports) + "\n", encoding="utf-8")
    manifest = {
        "version": __version__,
        "family": args.family,
        "T": T,
        "sigma_mu_grid": grid,
        "replicates": args.replicates,
        "estimators": reports[0].estimators if reports else names,
        "gamma": args.gamma,
        "n_range": list(n_range),
        "cv": {"folds": args.folds, "split_fraction": 0.5, "gamma_grid": list(cv_cfg.gamma_grid)},
        "seed": args.seed,
        "fixed_design": None if fixed is None else {
            "mu": list(fixed.mu), "sigma_sq": list(fixed.sigma_sq), "n": list(fixed.n), "a": fixed.a,
        },
        "outputs": [f"{stem}.csv", f"{stem}.json"],
    }
    manifest["estimators"] = list(manifest["estimators"])
    _write_json(out / f"{stem}.manifest.json", manifest)
    return 0


def cmd_kde(args):
    tasks = read_density_tasks(args.tasks)
    grid = read_points(args.grid)
    similarity = None
    if args.mode == "expert":
        if not args.similarity:
            raise UsageError("--mode expert needs --similarity")
        labels, A = read_similarity(args.similarity)
        similarity = align_similarity(labels, A, [t.task_id for t in tasks])
    elif args.similarity:
        raise UsageError("--similarity is only used with --mode expert")
    kernel = KernelSpec(args.bandwidth)
    if args.loo_mrr:
        res = loo_mrr(tasks, grid, kernel, args.mode, args.gamma, similarity)
        rows = [(t, len(res.reciprocal_ranks[t]), fmt(res.per_task[t])) for t in res.per_task]
        rows.append(("ALL", sum(len(v) for v in res.reciprocal_ranks.values()), fmt(res.mrr)))
        _write_csv(args.out, ("task_id", "events", "mrr"), rows)
        return 0
    dens = mtkde_grid(tasks, grid, kernel, args.mode, args.gamma, similarity)
    rows = [
        (t.task_id, g, fmt(dens[i, g]))
        for i, t in enumerate(tasks)
        for g in range(grid.shape[0])
    ]
    _write_csv(args.out, ("task_id", "grid_index", "density"), rows)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mta", description="Multi-task averaging estimators")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate task means from a task_id,value CSV")
    e.add_argument("--data", required=True)
    e.add_argument("--estimator", required=True, choices=ESTIMATORS)
    e.add_argument("--gamma", type=float, default=1.0)
    e.add_argument("--variance-mode", choices=VARIANCE_MODES, default="per-task")
    e.add_argument("--similarity")
    e.add_argument("--cv", action="store_true", help="cross-validate gamma (or lambda for js)")
    e.add_argument("--folds", type=int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="Monte-Carlo risk study")
    s.add_argument("--family", choices=FAMILIES, default="gaussian")
    s.add_argument("--T", type=int)
    s.add_argument("--sigma-mu-grid")
    s.add_argument("--replicates", type=int, default=1000)
    s.add_argument("--estimators", default="single-task,js,constant-mta,minimax-mta")
    s.add_argument("--cv", action="store_true", help="also run the cross-validated variants")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--n-range", default="2,100")
    s.add_argument("--fixed-mu")
    s.add_argument("--fixed-sigma", help="per-sample variances of the fixed design")
    s.add_argument("--fixed-n")
    s.add_argument("--a", type=float, help="fixed pairwise similarity for fixed-a-mta")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    k = sub.add_parser("kde", help="single-task KDE and MT-KDE on a grid")
    k.add_argument("--tasks", required=True, help="directory with one points CSV per task")
    k.add_argument("--grid", required=True)
    k.add_argument("--mode", choices=MODES, default="constant")
    k.add_argument("--similarity")
    k.add_argument("--gamma", type=float, default=1.0)
    k.add_argument("--bandwidth", type=float, default=1.0)
    k.add_argument("--loo-mrr", action="store_true")
    k.add_argument("--out", required=True)
    k.set_defaults(func=cmd_kde)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InternalError as exc:
        print(f"mta: internal error: {exc}", file=sys.stderr)
        return 1
    except InvalidInputError as exc:
        print(f"mta: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
