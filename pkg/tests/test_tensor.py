"""Autodiff tape: per-op gradients against central finite differences."""

import numpy as np
import numpy.testing as npt
import pytest

from acsnet.errors import ContractError, NumericError
from acsnet.numerics import (
    Tensor,
    clamp_max,
    clamp_min,
    concat,
    exp,
    log,
    log_softmax,
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
from conftest import fd_gradient, rel_error

rng = np.random.default_rng(1234)


def check_fd(build, x: np.ndarray, tol: float = 1e-4, step: float = 1e-5):
    """build(t) must return a scalar Tensor from Tensor t wrapping x."""
    t = Tensor(x, requires_grad=True)
    loss = build(t)
    loss.backward()
    got = t.grad.copy()
    want = fd_gradient(lambda: build(Tensor(x)).item(), x, step)
    assert rel_error(got, want) < tol, (got, want)


def test_polynomial_gradient():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    tsum(p ** 2).backward()
    npt.assert_allclose(p.grad, [2.0, 4.0])


def test_constant_loss_zero_gradient():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    tsum(p * 0.0).backward()
    npt.assert_array_equal(p.grad, [0.0, 0.0])


def test_sigmoid_dot_chain_fd():
    w = rng.uniform(-1, 1, 5)
    h = rng.uniform(-1, 1, 5)
    check_fd(lambda t: sigmoid(t) @ Tensor(h), w, tol=1e-6)


def test_non_scalar_loss_rejected():
    t = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (t * 2.0).backward()


def test_gradient_accumulates_on_reuse():
    x = rng.uniform(0.5, 1.5, 4)
    check_fd(lambda t: tsum(t + t * t), x, tol=1e-6)


_c6 = rng.uniform(-1, 1, 6)
_c5 = rng.uniform(-1, 1, 5)
_p5 = rng.uniform(0.0, 1.0, 5)
_c3 = rng.uniform(-1, 1, 3)


@pytest.mark.parametrize("build,x", [
    (lambda t: tsum(t * Tensor(_c6)), rng.uniform(-1, 1, 6)),
    (lambda t: tsum(t + 2.5), rng.uniform(-1, 1, 6)),
    (lambda t: tsum(2.0 - t), rng.uniform(-1, 1, 6)),
    (lambda t: mean(t ** 3), rng.uniform(0.5, 1.5, 6)),
    (lambda t: tsum(reciprocal(t)), rng.uniform(0.5, 2.0, 5)),
    (lambda t: tsum(sigmoid(t)), rng.uniform(-2, 2, 5)),
    (lambda t: tsum(tanh(t)), rng.uniform(-2, 2, 5)),
    (lambda t: tsum(relu(t)), rng.uniform(0.2, 2, 5) * rng.choice([-1, 1], 5)),
    (lambda t: tsum(exp(t)), rng.uniform(-1, 1, 5)),
    (lambda t: tsum(log(t)), rng.uniform(0.5, 2, 5)),
    (lambda t: tsum(clamp_max(t, 0.5)), rng.uniform(-1, 1, 7) + 0.01),
    (lambda t: tsum(clamp_min(t, -0.5)), rng.uniform(-1, 1, 7) + 0.01),
    (lambda t: tsum(concat([t, t * 2.0])), rng.uniform(-1, 1, 4)),
    (lambda t: tsum(take(t, slice(1, 3))), rng.uniform(-1, 1, 5)),
    (lambda t: tsum(take(t, slice(None, None, -1)) * Tensor(_c5)),
     rng.uniform(-1, 1, 5)),
    (lambda t: tsum(reshape(t, (2, 3)) @ Tensor(_c3)), rng.uniform(-1, 1, 6)),
    (lambda t: tsum(log_softmax(t) * Tensor(_p5)), rng.uniform(-1, 1, 5)),
    (lambda t: tsum(softmax(t) * Tensor(_p5)), rng.uniform(-1, 1, 5)),
])
def test_elementwise_ops_fd(build, x):
    check_fd(build, x)


def test_matmul_fd_all_shapes():
    M = rng.uniform(-1, 1, (3, 4))
    v = rng.uniform(-1, 1, 4)
    B = rng.uniform(-1, 1, (4, 2))
    w2 = Tensor(rng.uniform(-1, 1, 2))
    wv = Tensor(rng.uniform(-1, 1, 3))
    wB = Tensor(rng.uniform(-1, 1, (3, 2)))
    # matrix @ vector, wrt both operands
    check_fd(lambda t: (t @ Tensor(v)) @ wv, M.copy(), tol=1e-6)
    check_fd(lambda t: (Tensor(M) @ t) @ wv, v.copy(), tol=1e-6)
    # vector @ matrix
    check_fd(lambda t: tsum((t @ Tensor(B)) * w2), v.copy(), tol=1e-6)
    # vector @ vector
    check_fd(lambda t: t @ Tensor(v), v.copy() + 0.5, tol=1e-6)
    # matrix @ matrix
    check_fd(lambda t: tsum((t @ Tensor(B)) * wB), M.copy(), tol=1e-6)
    check_fd(lambda t: tsum((Tensor(M) @ t) * wB), B.copy(), tol=1e-6)


def test_broadcast_add_mul():
    x = rng.uniform(-1, 1, (3, 4))
    s = rng.uniform(0.5, 1.5, ())
    check_fd(lambda t: tsum(t + Tensor(s)), x.copy(), tol=1e-6)
    check_fd(lambda t: tsum(Tensor(x) * t), s.copy(), tol=1e-6)


def test_take_int_row():
    M = rng.uniform(-1, 1, (4, 3))
    t = Tensor(M, requires_grad=True)
    tsum(take(t, 2)).backward()
    want = np.zeros_like(M)
    want[2] = 1.0
    npt.assert_array_equal(t.grad, want)


def test_log_softmax_normalisation():
    x = Tensor(rng.uniform(-50, 50, 9))
    p = np.exp(log_softmax(x).data)
    assert abs(p.sum() - 1.0) < 1e-12
    assert (p > 0).all()


def test_no_grad_blocks_recording():
    t = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        out = tsum(t * 2.0)
    assert out._backward is None and out._parents == ()
    assert not out.requires_grad


def test_debug_nan_checks():
    set_debug_nan_checks(True)
    try:
        with pytest.raises(NumericError):
            log(Tensor(np.array([-1.0])))
    finally:
        set_debug_nan_checks(False)


def test_backward_rejects_non_finite_loss():
    t = Tensor(np.array([1e308]), requires_grad=True)
    loss = tsum(t * 10.0)
    with pytest.raises(NumericError):
        loss.backward()
