from .config import ConfigError, ExperimentConfig
from .runner import (
    build_env,
    build_pipeline,
    compare_runs,
    evaluate_checkpoint,
    intervention_prediction_study,
    run_experiment,
    run_seed,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_env",
    "build_pipeline",
    "compare_runs",
    "evaluate_checkpoint",
    "intervention_prediction_study",
    "run_experiment",
    "run_seed",
]
