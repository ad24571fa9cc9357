"""Reverse-mode autodiff on float64 numpy arrays."""

from .gradcheck import GradCheckReport, grad_check
from .tensor import (
    OP_KINDS,
    Tensor,
    abs_,
    add,
    clamp,
    concat,
    conv1d,
    conv2d,
    div,
    exp,
    expand,
    forward_op,
    getitem,
    index_select,
    layer_norm,
    linear,
    log,
    matmul,
    max_,
    maxpool2d,
    mean,
    mul,
    neg,
    no_grad,
    pow_,
    relu,
    reshape,
    sigmoid,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
    zero_grads,
)

__all__ = [
    "Tensor", "GradCheckReport", "grad_check", "no_grad", "zero_grads",
    "forward_op", "OP_KINDS",
    "add", "sub", "mul", "div", "neg", "pow_", "abs_", "relu", "sigmoid",
    "tanh", "exp", "log", "clamp", "reshape", "transpose", "expand",
    "getitem", "index_select", "concat", "sum_", "mean", "max_", "softmax",
    "matmul", "linear", "layer_norm", "conv2d", "conv1d", "maxpool2d",
]
