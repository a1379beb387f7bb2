"""Name-based dispatch over every estimator, shared by the simulator and the CLI."""

from dataclasses import replace

import numpy as np

from .errors import InvalidInputError
from .estimators import (
    TaskSummary,
    constant_mta,
    james_stein,
    minimax_mta,
    mta_general,
    one_task_pooled,
    oracle_mta,
    single_task,
    summarize,
)
from .selection import CvConfig, cv_select

ESTIMATORS = (
    "single-task",
    "one-task",
    "js",
    "js-cv",
    "constant-mta",
    "constant-mta-cv",
    "minimax-mta",
    "minimax-mta-cv",
    "oracle-mta",
    "expert-mta",
    "expert-mta-cv",
    "fixed-a-mta",
)

_CV_FAMILY = {
    "js-cv": "js-convex",
    "constant-mta-cv": "constant-mta",
    "minimax-mta-cv": "minimax-mta",
    "expert-mta-cv": "expert-mta",
}

CV_VARIANT = {
    "js": "js-cv",
    "constant-mta": "constant-mta-cv",
    "minimax-mta": "minimax-mta-cv",
    "expert-mta": "expert-mta-cv",
}


def check_names(names):
    unknown = [n for n in names if n not in ESTIMATORS]
    if unknown:
        raise InvalidInputError(
            f"unknown estimator(s) {', '.join(unknown)}; choose from {', '.join(ESTIMATORS)}"
        )


def run_estimator(
    name,
    values,
    summary=None,
    *,
    gamma=1.0,
    variance_mode="per-task",
    similarity=None,
    true_means=None,
    true_variances=None,
    fixed_a=None,
    cv_cfg=None,
):
    """Run estimator ``name`` on per-task sample arrays ``values``.

    Returns ``(estimate, selected)`` where ``selected`` is the CV-chosen
    parameter or ``None``.  ``oracle-mta`` needs ``true_means`` (and uses
    ``true_variances`` when given); ``expert-mta`` needs ``similarity``;
    ``fixed-a-mta`` needs ``fixed_a``.
    """
    if summary is None:
        summary = summarize(values, variance_mode)
    if name == "single-task":
        return single_task(summary), None
    if name == "one-task":
        return one_task_pooled(values), None
    if name == "js":
        return james_stein(summary), None
    if name == "constant-mta":
        return constant_mta(summary, gamma), None
    if name == "minimax-mta":
        return minimax_mta(summary, gamma), None
    if name == "expert-mta":
        if similarity is None:
            raise InvalidInputError("expert-mta needs a similarity matrix")
        return replace(mta_general(summary, similarity, gamma), estimator_id=name), None
    if name == "fixed-a-mta":
        if fixed_a is None:
            raise InvalidInputError("fixed-a-mta needs a fixed similarity value")
        T = summary.T
        A = fixed_a * (np.ones((T, T)) - np.eye(T))
        return replace(mta_general(summary, A, gamma), estimator_id=name), None
    if name == "oracle-mta":
        if true_means is None:
            raise InvalidInputError("oracle-mta needs the true means")
        s = summary
        if true_variances is not None:
            s = TaskSummary(summary.means, true_variances, summary.counts, summary.variance_mode)
        return oracle_mta(s, true_means, gamma), None
    if name in _CV_FAMILY:
        res = cv_select(values, _CV_FAMILY[name], cv_cfg or CvConfig(), variance_mode, similarity)
        return replace(res.estimate, estimator_id=name), res.parameter
    raise InvalidInputError(f"unknown estimator {name!r}")
