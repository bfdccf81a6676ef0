"""Numpy reference kernels for the recurrent and halting hot loops.

The compiled backend (`_core`) mirrors these functions exactly; batch
sequence kernels are thin loops over the per-step routines so that
incremental (streaming) evaluation reproduces batch results bit for bit
within a backend.

GRU gate layout: W, U stack the update/reset/candidate blocks row-wise,
so W is (3*dh, din), U is (3*dh, dh), b is (3*dh,).
"""

from __future__ import annotations

import numpy as np

# Sigmoid outputs are clamped into the open interval so downstream
# accumulate-and-halt contracts (activations strictly inside (0, 1))
# survive float saturation.
SIGMOID_CLIP = 1e-12


def _sigmoid(x):
    with np.errstate(over="ignore"):  # saturates cleanly to 0.0
        return 1.0 / (1.0 + np.exp(-x))


def _gru_cell_full(x, h, W, U, b):
    """One GRU step; returns (h_new, z, r, n)."""
    dh = h.shape[0]
    gi = W @ x + b
    z = _sigmoid(gi[:dh] + U[:dh] @ h)
    r = _sigmoid(gi[dh:2 * dh] + U[dh:2 * dh] @ h)
    n = np.tanh(gi[2 * dh:] + U[2 * dh:] @ (r * h))
    h_new = (1.0 - z) * h + z * n
    return h_new, z, r, n


def gru_cell(x, h, W, U, b):
    """One GRU step, state only. x (din,), h (dh,) -> (dh,)."""
    return _gru_cell_full(x, h, W, U, b)[0]


def gru_seq_forward(X, h0, W, U, b):
    """Run the cell over X (T, din). Returns H (T, dh) and gate caches."""
    T = X.shape[0]
    dh = h0.shape[0]
    H = np.empty((T, dh))
    Z = np.empty((T, dh))
    R = np.empty((T, dh))
    N = np.empty((T, dh))
    h = h0
    for t in range(T):
        h, Z[t], R[t], N[t] = _gru_cell_full(X[t], h, W, U, b)
        H[t] = h
    return H, Z, R, N


def gru_seq_backward(dH, X, H, h0, Z, R, N, W, U, b):
    """Backprop through time. dH (T, dh) holds the upstream gradient on
    every output state; returns (dX, dh0, dW, dU, db)."""
    T, din = X.shape
    dh = h0.shape[0]
    Uz, Ur, Un = U[:dh], U[dh:2 * dh], U[2 * dh:]
    dX = np.empty((T, din))
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros_like(b)
    carry = np.zeros(dh)
    for t in range(T - 1, -1, -1):
        hprev = H[t - 1] if t > 0 else h0
        z, r, n = Z[t], R[t], N[t]
        g = dH[t] + carry
        dz = g * (n - hprev)
        dn = g * z
        dhp = g * (1.0 - z)
        da_n = dn * (1.0 - n * n)
        dhr = Un.T @ da_n
        dr = dhr * hprev
        dhp = dhp + dhr * r
        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        dX[t] = W[:dh].T @ da_z + W[dh:2 * dh].T @ da_r + W[2 * dh:].T @ da_n
        dW[:dh] += np.outer(da_z, X[t])
        dW[dh:2 * dh] += np.outer(da_r, X[t])
        dW[2 * dh:] += np.outer(da_n, X[t])
        db[:dh] += da_z
        db[dh:2 * dh] += da_r
        db[2 * dh:] += da_n
        dU[:dh] += np.outer(da_z, hprev)
        dU[dh:2 * dh] += np.outer(da_r, hprev)
        dU[2 * dh:] += np.outer(da_n, r * hprev)
        carry = dhp + Uz.T @ da_z + Ur.T @ da_r
    return dX, carry, dW, dU, db


def halting_step(window, K, kb, w, b):
    """Halting activation for one position.

    window (kw, d) is the zero-padded slice of states centred on the
    position; K (kw, C, d) the conv taps, kb (C,) their bias, w (C,) and
    b (1,) the scalar projection. Returns (a, e) with e the pre-ReLU
    energy kept for backprop.
    """
    kw = K.shape[0]
    e = kb.copy()
    for k in range(kw):
        e += K[k] @ window[k]
    f = np.maximum(e, 0.0)
    a = _sigmoid(w @ f + b[0])
    a = min(max(a, SIGMOID_CLIP), 1.0 - SIGMOID_CLIP)
    return a, e


def halting_seq_forward(H, K, kb, w, b):
    """Per-step halting activations over H (T, d).

    Returns (a (T,), E (T, C)). Evaluates each position independently via
    `halting_step` on a zero-padded window, which keeps streaming and
    batch arithmetic identical.
    """
    T, d = H.shape
    kw, C, _ = K.shape
    la = (kw - 1) // 2
    a = np.empty(T)
    E = np.empty((T, C))
    window = np.zeros((kw, d))
    for j in range(T):
        for k in range(kw):
            idx = j + k - la
            if 0 <= idx < T:
                window[k] = H[idx]
            else:
                window[k] = 0.0
        a[j], E[j] = halting_step(window, K, kb, w, b)
    return a, E


def halting_seq_backward(da, H, E, a, K, w):
    """Gradients of the halting path. Returns (dH, dK, dkb, dw, db)."""
    T, d = H.shape
    kw, C, _ = K.shape
    la = (kw - 1) // 2
    dH = np.zeros_like(H)
    dK = np.zeros_like(K)
    dkb = np.zeros(C)
    dw = np.zeros(C)
    db = np.zeros(1)
    for j in range(T):
        dg = da[j] * a[j] * (1.0 - a[j])
        f = np.maximum(E[j], 0.0)
        dw += dg * f
        db[0] += dg
        dE = (dg * w) * (E[j] > 0.0)
        dkb += dE
        for k in range(kw):
            idx = j + k - la
            if 0 <= idx < T:
                dK[k] += np.outer(dE, H[idx])
                dH[idx] += K[k].T @ dE
    return dH, dK, dkb, dw, db
