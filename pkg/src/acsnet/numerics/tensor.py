"""Reverse-mode automatic differentiation over float64 numpy arrays.

The tape is define-by-run: every op on `Tensor` records a backward
closure, and `Tensor.backward()` replays them in reverse topological
order. Graphs are rebuilt per utterance, so nodes are cheap plain
objects. A global switch (`no_grad`) turns recording off for inference;
op results are then bare value holders.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, NumericError

_grad_enabled = True
_check_finite = False


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def set_debug_nan_checks(on: bool) -> None:
    """Check every op result for NaN/Inf (slow; used by tests)."""
    global _check_finite
    _check_finite = bool(on)


def _as_f64(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """A float64 array plus an optional gradient slot and tape entry."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_f64(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward: Callable[[np.ndarray], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    # -- basic protocol ------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph construction ---------------------------------------------
    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise ContractError(
                f"backward() needs a scalar loss, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise NumericError("loss is not finite")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_lift(other), -1.0))

    def __rsub__(self, other):
        return add(_lift(other), mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, key):
        return take(self, key)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(data: np.ndarray, parents: Sequence[Tensor],
            backward: Callable[[np.ndarray], None] | None) -> Tensor:
    """Build an op result, recording on the tape only when needed."""
    if _check_finite and not np.isfinite(data).all():
        raise NumericError("non-finite value produced by an op")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p._parents or p._backward
                             for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise ----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data + b.data

    def bwd(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return make_op(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data * b.data

    def bwd(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return make_op(out, (a, b), bwd)


def power(a, p) -> Tensor:
    a = _lift(a)
    p = float(p)
    out = a.data ** p

    def bwd(g):
        a._accumulate(g * p * a.data ** (p - 1.0))

    return make_op(out, (a,), bwd)


def reciprocal(a) -> Tensor:
    a = _lift(a)
    out = 1.0 / a.data

    def bwd(g):
        a._accumulate(-g * out * out)

    return make_op(out, (a,), bwd)


def sigmoid(a) -> Tensor:
    a = _lift(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        a._accumulate(g * out * (1.0 - out))

    return make_op(out, (a,), bwd)


def tanh(a) -> Tensor:
    a = _lift(a)
    out = np.tanh(a.data)

    def bwd(g):
        a._accumulate(g * (1.0 - out * out))

    return make_op(out, (a,), bwd)


def relu(a) -> Tensor:
    a = _lift(a)
    out = np.maximum(a.data, 0.0)

    def bwd(g):
        a._accumulate(g * (a.data > 0.0))

    return make_op(out, (a,), bwd)


def exp(a) -> Tensor:
    a = _lift(a)
    out = np.exp(a.data)

    def bwd(g):
        a._accumulate(g * out)

    return make_op(out, (a,), bwd)


def log(a) -> Tensor:
    a = _lift(a)
    out = np.log(a.data)

    def bwd(g):
        a._accumulate(g / a.data)

    return make_op(out, (a,), bwd)


def clamp_max(a, hi: float) -> Tensor:
    """min(a, hi); gradient is zero on the clamped entries."""
    a = _lift(a)
    out = np.minimum(a.data, hi)

    def bwd(g):
        a._accumulate(g * (a.data < hi))

    return make_op(out, (a,), bwd)


def clamp_min(a, lo: float) -> Tensor:
    a = _lift(a)
    out = np.maximum(a.data, lo)

    def bwd(g):
        a._accumulate(g * (a.data > lo))

    return make_op(out, (a,), bwd)


# -- reductions / shaping ---------------------------------------------------

def tsum(a) -> Tensor:
    a = _lift(a)
    out = np.array(a.data.sum())

    def bwd(g):
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return make_op(out, (a,), bwd)


def mean(a) -> Tensor:
    a = _lift(a)
    n = a.data.size
    out = np.array(a.data.mean())

    def bwd(g):
        a._accumulate(np.broadcast_to(g / n, a.data.shape))

    return make_op(out, (a,), bwd)


def concat(parts: Iterable, axis: int = 0) -> Tensor:
    parts = [_lift(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for p, s, e in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(s, e)
            p._accumulate(g[tuple(sl)])

    return make_op(out, tuple(parts), bwd)


def take(a, key) -> Tensor:
    """Basic slicing/indexing; gradient scatters back into place."""
    a = _lift(a)
    out = a.data[key]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[key] = g
        a._accumulate(full)

    return make_op(np.array(out, copy=True), (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = _lift(a)
    out = a.data.reshape(shape)

    def bwd(g):
        a._accumulate(g.reshape(a.data.shape))

    return make_op(out, (a,), bwd)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data @ b.data

    def bwd(g):
        if a.data.ndim == 2 and b.data.ndim == 1:
            a._accumulate(np.outer(g, b.data))
            b._accumulate(a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 2:
            a._accumulate(g @ b.data.T)
            b._accumulate(np.outer(a.data, g))
        elif a.data.ndim == 1 and b.data.ndim == 1:
            a._accumulate(g * b.data)
            b._accumulate(g * a.data)
        else:
            a._accumulate(g @ b.data.T)
            b._accumulate(a.data.T @ g)

    return make_op(out, (a, b), bwd)


def log_softmax(a) -> Tensor:
    """Numerically stable log softmax over a 1-D tensor."""
    a = _lift(a)
    m = a.data.max()
    shifted = a.data - m
    lse = m + np.log(np.exp(shifted).sum())
    out = a.data - lse

    def bwd(g):
        p = np.exp(out)
        a._accumulate(g - p * g.sum())

    return make_op(out, (a,), bwd)


def softmax(a) -> Tensor:
    return exp(log_softmax(a))
