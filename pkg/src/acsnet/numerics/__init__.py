"""Array arithmetic, reverse-mode autodiff, optimizer, checkpoints."""

from .optim import AdamState, adam_step, clip_global_norm, global_grad_norm
from .params import ParamStore, init_uniform, load_checkpoint, save_checkpoint
from .tensor import (
    Tensor,
    clamp_max,
    clamp_min,
    concat,
    exp,
    grad_enabled,
    log,
    log_softmax,
    make_op,
    matmul,
    mean,
    no_grad,
    reciprocal,
    relu,
    reshape,
    set_debug_nan_checks,
    sigmoid,
    softmax,
    take,
    tanh,
    tsum,
)

__all__ = [
    "AdamState",
    "ParamStore",
    "Tensor",
    "adam_step",
    "clamp_max",
    "clamp_min",
    "clip_global_norm",
    "concat",
    "exp",
    "global_grad_norm",
    "grad_enabled",
    "init_uniform",
    "load_checkpoint",
    "log",
    "log_softmax",
    "make_op",
    "matmul",
    "mean",
    "no_grad",
    "reciprocal",
    "relu",
    "reshape",
    "save_checkpoint",
    "set_debug_nan_checks",
    "sigmoid",
    "softmax",
    "take",
    "tanh",
    "tsum",
]
