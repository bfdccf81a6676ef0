"""Gradient clipping and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractError, NumericError
from .params import ParamStore

# Norms within this relative slack of the bound count as already clipped,
# which makes the op exactly idempotent in floating point.
_CLIP_SLACK = 1e-12


def global_grad_norm(store: ParamStore) -> float:
    total = 0.0
    for _, p in store.items():
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def clip_global_norm(store: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the applied scale (1.0 when no clipping was needed).
    """
    if not max_norm > 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    for name, p in store.items():
        if p.grad is not None and not np.isfinite(p.grad).all():
            raise NumericError(f"non-finite gradient in {name!r}")
    norm = global_grad_norm(store)
    if norm <= max_norm * (1.0 + _CLIP_SLACK):
        return 1.0
    scale = max_norm / norm
    for _, p in store.items():
        if p.grad is not None:
            p.grad *= scale
    return scale


@dataclass
class AdamState:
    """Per-parameter moment estimates plus the shared step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState) -> AdamState:
    """One bias-corrected Adam update from the gradients in `store`.

    Parameters with no gradient this step are treated as zero-gradient
    (moments still decay). Mutates parameters and state in place.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in store.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ContractError(
                f"gradient shape {g.shape} != parameter shape "
                f"{p.data.shape} for {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state
