from . import ops
from .module import LayerNorm, Linear, Module, uniform_init, zeros_param
from .optim import AdamState, adam_step, clip_grad_norm
from .ops import (concat, dropout, layer_norm, log_softmax, masked_max, matmul, nll,
                  reverse_padded, softmax)
from .tensor import ContractError, ShapeError, Tape, Tensor, as_tensor, no_grad, parameters_checksum

__all__ = [
    "AdamState", "ContractError", "LayerNorm", "Linear", "Module", "ShapeError", "Tape",
    "Tensor", "adam_step", "as_tensor", "clip_grad_norm", "concat", "dropout", "layer_norm",
    "log_softmax", "masked_max", "matmul", "nll", "no_grad", "ops", "parameters_checksum",
    "reverse_padded", "softmax", "uniform_init", "zeros_param",
]
