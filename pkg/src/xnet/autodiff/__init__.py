"""Minimal reverse-mode autodiff engine backing all networks in this package."""

from .gradcheck import grad_check
from .layers import (
    BatchNormLayer,
    ConvLayer,
    DenseLayer,
    RunningStats,
    TConvLayer,
    batchnorm,
    conv2d,
    dense,
    gaussian_param,
    tconv2d,
    zeros_param,
)
from .optim import AdamState, adam_step
from .tensor import (
    Tape,
    Tensor,
    activation,
    add,
    add_const,
    backward,
    concat,
    exp,
    leaky_relu,
    log_clamped,
    mean_all,
    mean_over,
    minimum_const,
    mul,
    mul_const,
    record,
    reshape,
    rsub_const,
    sigmoid,
    slice_rows,
    square,
    sub,
    sum_all,
    tanh,
)

__all__ = [
    "AdamState",
    "BatchNormLayer",
    "ConvLayer",
    "DenseLayer",
    "RunningStats",
    "Tape",
    "TConvLayer",
    "Tensor",
    "activation",
    "adam_step",
    "add",
    "add_const",
    "backward",
    "batchnorm",
    "concat",
    "conv2d",
    "dense",
    "exp",
    "gaussian_param",
    "grad_check",
    "leaky_relu",
    "log_clamped",
    "mean_all",
    "mean_over",
    "minimum_const",
    "mul",
    "mul_const",
    "record",
    "reshape",
    "rsub_const",
    "sigmoid",
    "slice_rows",
    "square",
    "sub",
    "sum_all",
    "tanh",
    "tconv2d",
    "zeros_param",
]
