"""Desk-scale preference-optimization lab.

Implements the dpo, dpop and minordpo objectives with exact analytical
gradients, trains a tiny from-scratch autoregressive policy on synthetic
close-preference pairs, and ships the diagnostics (coefficient curves,
sweeps, degeneration and KL reports) to study how the three objectives
move the implicit rewards.
"""

__version__ = "0.1.0"

from .losses import (
    LogProbQuad,
    LossGrad,
    LossSpec,
    Method,
    RewardTriple,
    dpo_coefficient,
    dpo_loss,
    dpop_loss,
    log_sigmoid,
    loss_grad,
    minor_dpo_loss,
    reward_triple,
)
from .policy import (
    ModelConfig,
    ReferenceSnapshot,
    SequenceModel,
    TabularConfig,
    TabularModel,
    backward,
    init_model,
    init_tabular,
    load_model,
    param_count,
    sample,
    save_model,
    sequence_log_prob,
    snapshot_reference,
    step_log_probs,
)
from .datagen import DatasetSpec, PreferenceExample, generate, load_jsonl, save_jsonl
from .gradcheck import GradCheckReport, check_all_methods, finite_diff_loss_grad
from .trainer import MetricsRow, TrainConfig, evaluate_rewards, train, train_supervised
from .analysis import (
    CoefficientCurve,
    DegenerationReport,
    SweepCell,
    SweepSpec,
    coefficient_curve,
    degeneration_report,
    kl_diagnostic,
    run_sweep,
    toy_accuracy,
)

__all__ = [
    "__version__",
    "LogProbQuad", "LossGrad", "LossSpec", "Method", "RewardTriple",
    "dpo_coefficient", "dpo_loss", "dpop_loss", "log_sigmoid", "loss_grad",
    "minor_dpo_loss", "reward_triple",
    "ModelConfig", "ReferenceSnapshot", "SequenceModel", "TabularConfig",
    "TabularModel", "backward", "init_model", "init_tabular", "load_model",
    "param_count", "sample", "save_model", "sequence_log_prob",
    "snapshot_reference", "step_log_probs",
    "DatasetSpec", "PreferenceExample", "generate", "load_jsonl", "save_jsonl",
    "GradCheckReport", "check_all_methods", "finite_diff_loss_grad",
    "MetricsRow", "TrainConfig", "evaluate_rewards", "train", "train_supervised",
    "CoefficientCurve", "DegenerationReport", "SweepCell", "SweepSpec",
    "coefficient_curve", "degeneration_report", "kl_diagnostic", "run_sweep",
    "toy_accuracy",
]
