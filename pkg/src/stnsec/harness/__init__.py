from .config import ExperimentConfig, load_config_file, load_profile
from .scenarios import (
    PipelineArtifacts,
    adversarial_power_ratio,
    closed_form_summary,
    method_plan_source,
    plan_reward,
    run_evaluate,
    run_fig3,
    run_trend,
    train_pipeline,
)

__all__ = [
    "ExperimentConfig",
    "load_config_file",
    "load_profile",
    "PipelineArtifacts",
    "adversarial_power_ratio",
    "closed_form_summary",
    "method_plan_source",
    "plan_reward",
    "run_evaluate",
    "run_fig3",
    "run_trend",
    "train_pipeline",
]
