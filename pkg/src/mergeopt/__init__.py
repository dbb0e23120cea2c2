"""Multi-objective optimization by iterative expert training and
parameter merging, with tooling to verify its convergence behavior on a
synthetic strongly-convex quadratic testbed."""

from .analysis import (
    BoundInputs,
    bound_decomposition,
    convergence_bound,
    estimate_gradient_bound,
    front_mean_rewards,
    gap_series,
    icv_score,
    pareto_front,
)
from .core import (
    ConfigError,
    DivergenceError,
    RunConfig,
    StepRecord,
    SubsetSelection,
    convex_combine,
    normalize_subset_weights,
    validate_run_config,
)
from .objectives import (
    ObjectiveSet,
    QuadraticObjective,
    delta_star,
    eval_grad,
    eval_loss,
    finite_diff_grad,
    load_objective_set,
    make_quadratic_set,
    multiobjective_optimum,
    save_objective_set,
    scale_losses,
    weighted_loss,
)
from .optimizers import (
    IterativeRS,
    MORLHF,
    RewardedSoups,
    ScheduleParams,
    Trajectory,
    lr_schedule,
    run_iterative_rs,
    run_morlhf,
    run_rewarded_soups,
    sample_subset,
    select_merge_weights,
    sync_and_merge,
)

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "ConfigError",
    "DivergenceError",
    "IterativeRS",
    "MORLHF",
    "ObjectiveSet",
    "QuadraticObjective",
    "RewardedSoups",
    "RunConfig",
    "ScheduleParams",
    "StepRecord",
    "SubsetSelection",
    "Trajectory",
    "bound_decomposition",
    "convergence_bound",
    "convex_combine",
    "delta_star",
    "estimate_gradient_bound",
    "eval_grad",
    "eval_loss",
    "finite_diff_grad",
    "front_mean_rewards",
    "gap_series",
    "icv_score",
    "load_objective_set",
    "lr_schedule",
    "make_quadratic_set",
    "multiobjective_optimum",
    "normalize_subset_weights",
    "pareto_front",
    "run_iterative_rs",
    "run_morlhf",
    "run_rewarded_soups",
    "sample_subset",
    "save_objective_set",
    "scale_losses",
    "select_merge_weights",
    "sync_and_merge",
    "validate_run_config",
    "weighted_loss",
]
