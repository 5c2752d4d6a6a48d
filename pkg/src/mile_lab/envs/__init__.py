from .base import FrameStack, StepResult
from .gridnav import (
    ACTIONS,
    DEFAULT_MAP,
    GridNavEnv,
    GridNavSpec,
    N_ACTIONS,
    QTable,
    value_iteration,
)
from .initial_policy import (
    InitialPolicyConfig,
    SuccessBandError,
    init_policy_params,
    make_initial_policy,
    policy_spec_for,
)
from .reachgap import ReachGap2DEnv, ReachGap2DSpec, expert_action_mean, scripted_expert

__all__ = [
    "FrameStack",
    "StepResult",
    "ACTIONS",
    "DEFAULT_MAP",
    "GridNavEnv",
    "GridNavSpec",
    "N_ACTIONS",
    "QTable",
    "value_iteration",
    "ReachGap2DEnv",
    "ReachGap2DSpec",
    "expert_action_mean",
    "scripted_expert",
    "InitialPolicyConfig",
    "SuccessBandError",
    "init_policy_params",
    "make_initial_policy",
    "policy_spec_for",
]
