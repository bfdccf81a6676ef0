"""Kernel contracts, backend parity, and kernel-level gradient checks."""

import numpy as np
import numpy.testing as npt
import pytest

import acsnet.kernels as kernels
from conftest import fd_gradient, rel_error

rng = np.random.default_rng(7)


def _gru_params(din, dh, scale=0.5, seed=0):
    r = np.random.default_rng(seed)
    return (r.uniform(-scale, scale, (3 * dh, din)),
            r.uniform(-scale, scale, (3 * dh, dh)),
            r.uniform(-scale, scale, 3 * dh))


def _halt_params(d, C=3, kw=3, seed=0):
    r = np.random.default_rng(seed)
    return (r.uniform(-0.5, 0.5, (kw, C, d)), r.uniform(-0.5, 0.5, C),
            r.uniform(-0.5, 0.5, C), r.uniform(-0.5, 0.5, 1))


def test_gru_cell_zero_params_zero_output(backend):
    k = kernels.active()
    din, dh = 3, 4
    out = k.gru_cell(np.ones(din), np.zeros(dh), np.zeros((3 * dh, din)),
                     np.zeros((3 * dh, dh)), np.zeros(3 * dh))
    npt.assert_array_equal(out, np.zeros(dh))


def test_gru_cell_output_bounded(backend):
    k = kernels.active()
    din, dh = 5, 6
    W, U, b = _gru_params(din, dh, scale=3.0, seed=1)
    for i in range(20):
        x = rng.uniform(-5, 5, din)
        h = rng.uniform(-0.99, 0.99, dh)
        out = k.gru_cell(x, h, W, U, b)
        assert (np.abs(out) < 1.0).all()


def test_gru_seq_matches_iterated_cell(backend):
    k = kernels.active()
    din, dh, T = 3, 4, 9
    W, U, b = _gru_params(din, dh, seed=2)
    X = rng.uniform(-1, 1, (T, din))
    h0 = np.zeros(dh)
    H, _, _, _ = k.gru_seq_forward(X, h0, W, U, b)
    h = h0
    for t in range(T):
        h = k.gru_cell(X[t], h, W, U, b)
        npt.assert_array_equal(H[t], h)


def test_gru_seq_backward_fd(backend):
    k = kernels.active()
    din, dh, T = 3, 4, 6
    W, U, b = _gru_params(din, dh, seed=3)
    X = rng.uniform(-1, 1, (T, din))
    h0 = rng.uniform(-0.5, 0.5, dh)
    weights = rng.uniform(-1, 1, (T, dh))

    def loss():
        H, _, _, _ = k.gru_seq_forward(X, h0, W, U, b)
        return float((H * weights).sum())

    H, Z, R, N = k.gru_seq_forward(X, h0, W, U, b)
    dX, dh0, dW, dU, db = k.gru_seq_backward(weights, X, H, h0, Z, R, N,
                                             W, U, b)
    for got, arr in [(dX, X), (dh0, h0), (dW, W), (dU, U), (db, b)]:
        assert rel_error(got, fd_gradient(loss, arr)) < 1e-4


def test_halting_step_matches_seq(backend):
    k = kernels.active()
    d, T = 4, 7
    K, kb, w, b = _halt_params(d, seed=4)
    H = rng.uniform(-1, 1, (T, d))
    a, E = k.halting_seq_forward(H, K, kb, w, b)
    kw = K.shape[0]
    la = (kw - 1) // 2
    for j in range(T):
        window = np.zeros((kw, d))
        for kk in range(kw):
            idx = j + kk - la
            if 0 <= idx < T:
                window[kk] = H[idx]
        aj, ej = k.halting_step(window, K, kb, w, b)
        assert aj == a[j]
        npt.assert_array_equal(ej, E[j])


def test_halting_seq_length_and_range(backend):
    k = kernels.active()
    d = 3
    K, kb, w, b = _halt_params(d, seed=5)
    for T in range(1, 6):
        H = rng.uniform(-1, 1, (T, d))
        a, E = k.halting_seq_forward(H, K, kb, w, b)
        assert a.shape == (T,) and E.shape == (T, K.shape[1])
        assert ((a > 0) & (a < 1)).all()


def test_halting_activation_clamped(backend):
    k = kernels.active()
    d = 2
    K, kb, w, _ = _halt_params(d, seed=6)
    huge_b = np.array([1e4])
    H = rng.uniform(-1, 1, (4, d))
    a, _ = k.halting_seq_forward(H, K, kb, w, huge_b)
    assert (a <= 1.0 - 1e-13).all()
    a, _ = k.halting_seq_forward(H, K, kb, w, np.array([-1e4]))
    assert (a >= 1e-13).all()


def test_halting_seq_backward_fd(backend):
    k = kernels.active()
    d, T = 3, 6
    K, kb, w, b = _halt_params(d, seed=7)
    H = rng.uniform(-1, 1, (T, d))
    weights = rng.uniform(-1, 1, T)

    def loss():
        a, _ = k.halting_seq_forward(H, K, kb, w, b)
        return float((a * weights).sum())

    a, E = k.halting_seq_forward(H, K, kb, w, b)
    dH, dK, dkb, dw, db = k.halting_seq_backward(weights, H, E, a, K, w)
    for got, arr in [(dH, H), (dK, K), (dkb, kb), (dw, w), (db, b)]:
        assert rel_error(got, fd_gradient(loss, arr)) < 1e-4


@pytest.mark.skipif(len(kernels.available_backends()) < 2,
                    reason="compiled backend not built")
class TestBackendParity:
    def test_gru_forward_backward(self):
        pure = kernels._BACKENDS["pure"]
        core = kernels._BACKENDS["compiled"]
        for T, din, dh in [(1, 2, 3), (5, 3, 4), (12, 7, 5)]:
            X = rng.uniform(-2, 2, (T, din))
            h0 = rng.uniform(-0.5, 0.5, dh)
            W, U, b = _gru_params(din, dh, seed=T)
            outs_p = pure.gru_seq_forward(X, h0, W, U, b)
            outs_c = core.gru_seq_forward(X, h0, W, U, b)
            for p, c in zip(outs_p, outs_c):
                npt.assert_allclose(p, c, rtol=1e-12, atol=1e-14)
            dH = rng.uniform(-1, 1, (T, dh))
            gp = pure.gru_seq_backward(dH, X, *outs_p[:1], h0, *outs_p[1:],
                                       W, U, b)
            gc = core.gru_seq_backward(dH, X, *outs_c[:1], h0, *outs_c[1:],
                                       W, U, b)
            for p, c in zip(gp, gc):
                npt.assert_allclose(p, c, rtol=1e-12, atol=1e-14)

    def test_halting_forward_backward(self):
        pure = kernels._BACKENDS["pure"]
        core = kernels._BACKENDS["compiled"]
        for T, d, kw in [(1, 3, 3), (6, 4, 1), (9, 2, 5)]:
            K, kb, w, b = _halt_params(d, C=3, kw=kw, seed=T)
            H = rng.uniform(-2, 2, (T, d))
            ap, Ep = pure.halting_seq_forward(H, K, kb, w, b)
            ac, Ec = core.halting_seq_forward(H, K, kb, w, b)
            npt.assert_allclose(ap, ac, rtol=1e-12, atol=1e-14)
            npt.assert_allclose(Ep, Ec, rtol=1e-12, atol=1e-14)
            da = rng.uniform(-1, 1, T)
            gp = pure.halting_seq_backward(da, H, Ep, ap, K, w)
            gc = core.halting_seq_backward(da, H, Ec, ac, K, w)
            for p, c in zip(gp, gc):
                npt.assert_allclose(p, c, rtol=1e-12, atol=1e-14)
