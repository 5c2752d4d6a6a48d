from .tensor import Tensor
from .nets import (
    CategoricalHead,
    DistOutput,
    GaussianHead,
    NetSpec,
    Policy,
    forward,
    forward_graph,
    init_params,
    load_params,
    save_params,
)
from .optim import AdamState, NonFiniteGradError, adam_step
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "Tensor",
    "CategoricalHead",
    "GaussianHead",
    "NetSpec",
    "DistOutput",
    "Policy",
    "forward",
    "forward_graph",
    "init_params",
    "save_params",
    "load_params",
    "AdamState",
    "NonFiniteGradError",
    "adam_step",
    "GradCheckReport",
    "grad_check",
]
