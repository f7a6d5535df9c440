"""Lock-free asynchronous SGD: real-thread engine, adversarial-schedule
simulator, and closed-form convergence bounds."""

try:
    from ._asgd import *  # installed layout: extension lives in the package
    from ._asgd import __doc__ as _core_doc
except ImportError:  # build-tree layout: extension sits on sys.path
    from _asgd import *  # type: ignore[no-redef]
    from _asgd import __doc__ as _core_doc

__all__ = [
    "Rng",
    "Dataset",
    "ProblemSpec",
    "quadratic_problem",
    "regression_problem",
    "regression_problem_from_csv",
    "load_dataset_csv",
    "GradientSample",
    "sample_gradient",
    "mean_gradient",
    "EpochConfig",
    "ContentionStats",
    "RunResult",
    "epoch_sgd",
    "FullRunResult",
    "full_sgd",
    "StrategyDesc",
    "parse_strategy",
    "ScheduleTrace",
    "SimResult",
    "simulate",
    "InvariantReport",
    "check_trace_invariants",
    "BoundParams",
    "bound_params_for",
    "plog",
    "martingale_value",
    "martingale_lipschitz",
    "tuned_learning_rate",
    "sequential_learning_rate",
    "linear_delay_learning_rate",
    "BoundValue",
    "failure_prob_bound",
    "Feasibility",
    "feasibility_check",
    "slowdown_factor",
    "minimal_slowdown_delay",
    "stale_noise_variance",
    "TrialRecord",
    "ExperimentReport",
    "wilson_upper95",
    "run_failure_prob_experiment",
    "run_slowdown_experiment",
    "run_invariant_sweep",
    "run_fullsgd_experiment",
]
