"""Small reverse-mode autodiff engine, dense networks and Adam."""
from .nn import (
    DenseNetSpec,
    Parameters,
    check_shapes,
    forward,
    forward_logits,
    init_params,
    input_gradient_norm,
    layer_widths,
)
from .optim import AdamState, adam_step, sample_standard_normal
from .tensor import GraphError, Tensor, grad, no_grad, set_grad_enabled

__all__ = [
    "AdamState",
    "DenseNetSpec",
    "GraphError",
    "Parameters",
    "Tensor",
    "adam_step",
    "check_shapes",
    "forward",
    "forward_logits",
    "grad",
    "init_params",
    "input_gradient_norm",
    "layer_widths",
    "no_grad",
    "sample_standard_normal",
    "set_grad_enabled",
]
