"""Multi-task averaging: jointly regularized estimates of many means."""

__version__ = "0.1.0"

from .errors import DimensionError, InternalError, InvalidInputError, InvalidSimilarityError, MTAError
from .graph_core import (
    build_laplacian,
    graph_energy,
    mean_covariance,
    mta_apply_fast,
    mta_weights_dense,
)
from .estimators import (
    EstimateVector,
    TaskSamples,
    TaskSummary,
    average_of_means_mta_form,
    constant_mta,
    james_stein,
    js_convex,
    minimax_mta,
    mta_form_from_alpha,
    mta_general,
    one_task_pooled,
    oracle_mta,
    pooled_mean_mta_form,
    single_task,
    summarize,
)
from .risk import (
    INFINITE,
    RiskBreakdown,
    analytic_risk,
    optimal_a_constant,
    optimal_a_two_task,
    two_task_mse,
    two_task_threshold,
)
from .selection import CvConfig, cv_select
from .simulate import FixedDesign, RiskReport, WorldConfig, draw_world, holdout_eval, run_study
from .mtkde import DensityTask, KernelSpec, kde_at, loo_mrr, mtkde_at, mtkde_grid
