# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; drop-in replacements for `acsnet.kernels.pure`.

Same function surface and the same per-step arithmetic structure: the
sequence kernels loop over the single-step routines, so streaming and
batch evaluation agree bit for bit within this backend.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

SIGMOID_CLIP = 1e-12
cdef double _CLIP = 1e-12


cdef inline double _sig(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


cdef void _cell(const double* W, const double* U, const double* b,
                const double* x, const double* h, double* z, double* r,
                double* n, double* h_new, Py_ssize_t din,
                Py_ssize_t dh) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef const double* row
    cdef double acc
    for i in range(dh):
        acc = b[i]
        row = W + i * din
        for j in range(din):
            acc += row[j] * x[j]
        row = U + i * dh
        for j in range(dh):
            acc += row[j] * h[j]
        z[i] = _sig(acc)
    for i in range(dh):
        acc = b[dh + i]
        row = W + (dh + i) * din
        for j in range(din):
            acc += row[j] * x[j]
        row = U + (dh + i) * dh
        for j in range(dh):
            acc += row[j] * h[j]
        r[i] = _sig(acc)
    for i in range(dh):
        acc = b[2 * dh + i]
        row = W + (2 * dh + i) * din
        for j in range(din):
            acc += row[j] * x[j]
        row = U + (2 * dh + i) * dh
        for j in range(dh):
            acc += row[j] * (r[j] * h[j])
        n[i] = tanh(acc)
    for i in range(dh):
        h_new[i] = (1.0 - z[i]) * h[i] + z[i] * n[i]


def gru_cell(x, h, W, U, b):
    """One GRU step, state only. x (din,), h (dh,) -> (dh,)."""
    cdef cnp.ndarray[double, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ha = np.ascontiguousarray(h, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Wa = np.ascontiguousarray(W, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ua = np.ascontiguousarray(U, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ba = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t din = xa.shape[0]
    cdef Py_ssize_t dh = ha.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] z = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] r = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] n = np.empty(dh)
    _cell(&Wa[0, 0], &Ua[0, 0], &ba[0], &xa[0], &ha[0], &z[0], &r[0], &n[0],
          &out[0], din, dh)
    return out


def gru_seq_forward(X, h0, W, U, b):
    """Run the cell over X (T, din). Returns H (T, dh) and gate caches."""
    cdef cnp.ndarray[double, ndim=2] Xa = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] h0a = np.ascontiguousarray(h0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Wa = np.ascontiguousarray(W, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ua = np.ascontiguousarray(U, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ba = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t T = Xa.shape[0]
    cdef Py_ssize_t din = Xa.shape[1]
    cdef Py_ssize_t dh = h0a.shape[0]
    cdef cnp.ndarray[double, ndim=2] H = np.empty((T, dh))
    cdef cnp.ndarray[double, ndim=2] Z = np.empty((T, dh))
    cdef cnp.ndarray[double, ndim=2] R = np.empty((T, dh))
    cdef cnp.ndarray[double, ndim=2] N = np.empty((T, dh))
    cdef double* Hp = &H[0, 0]
    cdef double* Zp = &Z[0, 0]
    cdef double* Rp = &R[0, 0]
    cdef double* Np = &N[0, 0]
    cdef const double* Xp = &Xa[0, 0]
    cdef const double* hprev = &h0a[0]
    cdef const double* Wp = &Wa[0, 0]
    cdef const double* Up = &Ua[0, 0]
    cdef const double* bp = &ba[0]
    cdef Py_ssize_t t
    with nogil:
        for t in range(T):
            _cell(Wp, Up, bp, Xp + t * din, hprev, Zp + t * dh, Rp + t * dh,
                  Np + t * dh, Hp + t * dh, din, dh)
            hprev = Hp + t * dh
    return H, Z, R, N


def gru_seq_backward(dH, X, H, h0, Z, R, N, W, U, b):
    """Backprop through time; returns (dX, dh0, dW, dU, db)."""
    cdef cnp.ndarray[double, ndim=2] dHa = np.ascontiguousarray(dH, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Xa = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ha = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] h0a = np.ascontiguousarray(h0, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Za = np.ascontiguousarray(Z, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ra = np.ascontiguousarray(R, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Na = np.ascontiguousarray(N, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Wa = np.ascontiguousarray(W, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ua = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t T = Xa.shape[0]
    cdef Py_ssize_t din = Xa.shape[1]
    cdef Py_ssize_t dh = h0a.shape[0]
    cdef cnp.ndarray[double, ndim=2] dX = np.empty((T, din))
    cdef cnp.ndarray[double, ndim=2] dW = np.zeros((3 * dh, din))
    cdef cnp.ndarray[double, ndim=2] dU = np.zeros((3 * dh, dh))
    cdef cnp.ndarray[double, ndim=1] db = np.zeros(3 * dh)
    cdef cnp.ndarray[double, ndim=1] carry = np.zeros(dh)
    cdef cnp.ndarray[double, ndim=1] da_z = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] da_r = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] da_n = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] dhr = np.empty(dh)
    cdef cnp.ndarray[double, ndim=1] dhp = np.empty(dh)
    cdef double* dXp = &dX[0, 0]
    cdef double* dWp = &dW[0, 0]
    cdef double* dUp = &dU[0, 0]
    cdef double* dbp = &db[0]
    cdef double* carryp = &carry[0]
    cdef double* dazp = &da_z[0]
    cdef double* darp = &da_r[0]
    cdef double* danp = &da_n[0]
    cdef double* dhrp = &dhr[0]
    cdef double* dhpp = &dhp[0]
    cdef const double* Xp = &Xa[0, 0]
    cdef const double* Hp = &Ha[0, 0]
    cdef const double* h0p = &h0a[0]
    cdef const double* Zp = &Za[0, 0]
    cdef const double* Rp = &Ra[0, 0]
    cdef const double* Np = &Na[0, 0]
    cdef const double* Wp = &Wa[0, 0]
    cdef const double* Up = &Ua[0, 0]
    cdef const double* dHp = &dHa[0, 0]
    cdef const double* hprev
    cdef const double* xt
    cdef const double* zt
    cdef const double* rt
    cdef const double* nt
    cdef Py_ssize_t t, i, j
    cdef double g, dz, dn
    with nogil:
        for t in range(T - 1, -1, -1):
            hprev = (Hp + (t - 1) * dh) if t > 0 else h0p
            xt = Xp + t * din
            zt = Zp + t * dh
            rt = Rp + t * dh
            nt = Np + t * dh
            for i in range(dh):
                g = dHp[t * dh + i] + carryp[i]
                dz = g * (nt[i] - hprev[i])
                dn = g * zt[i]
                dhpp[i] = g * (1.0 - zt[i])
                danp[i] = dn * (1.0 - nt[i] * nt[i])
                dazp[i] = dz * zt[i] * (1.0 - zt[i])
            for j in range(dh):
                g = 0.0
                for i in range(dh):
                    g += Up[(2 * dh + i) * dh + j] * danp[i]
                dhrp[j] = g
            for i in range(dh):
                g = dhrp[i] * hprev[i]
                darp[i] = g * rt[i] * (1.0 - rt[i])
                dhpp[i] = dhpp[i] + dhrp[i] * rt[i]
            for j in range(din):
                g = 0.0
                for i in range(dh):
                    g += Wp[i * din + j] * dazp[i]
                    g += Wp[(dh + i) * din + j] * darp[i]
                    g += Wp[(2 * dh + i) * din + j] * danp[i]
                dXp[t * din + j] = g
            for i in range(dh):
                for j in range(din):
                    dWp[i * din + j] += dazp[i] * xt[j]
                    dWp[(dh + i) * din + j] += darp[i] * xt[j]
                    dWp[(2 * dh + i) * din + j] += danp[i] * xt[j]
                dbp[i] += dazp[i]
                dbp[dh + i] += darp[i]
                dbp[2 * dh + i] += danp[i]
                for j in range(dh):
                    dUp[i * dh + j] += dazp[i] * hprev[j]
                    dUp[(dh + i) * dh + j] += darp[i] * hprev[j]
                    dUp[(2 * dh + i) * dh + j] += danp[i] * (rt[j] * hprev[j])
            for j in range(dh):
                g = dhpp[j]
                for i in range(dh):
                    g += Up[i * dh + j] * dazp[i]
                    g += Up[(dh + i) * dh + j] * darp[i]
                carryp[j] = g
    return dX, carry, dW, dU, db


cdef double _hstep(const double* window, const double* K, const double* kb,
                   const double* w, double b, double* e, Py_ssize_t kw,
                   Py_ssize_t C, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t k, c, j
    cdef const double* row
    cdef double acc, g, a
    for c in range(C):
        acc = kb[c]
        for k in range(kw):
            row = K + (k * C + c) * d
            for j in range(d):
                acc += row[j] * window[k * d + j]
        e[c] = acc
    g = b
    for c in range(C):
        if e[c] > 0.0:
            g += w[c] * e[c]
    a = _sig(g)
    if a < _CLIP:
        a = _CLIP
    elif a > 1.0 - _CLIP:
        a = 1.0 - _CLIP
    return a


def halting_step(window, K, kb, w, b):
    """Halting activation for one zero-padded window (kw, d)."""
    cdef cnp.ndarray[double, ndim=2] wina = np.ascontiguousarray(window, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] Ka = np.ascontiguousarray(K, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] kba = np.ascontiguousarray(kb, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ba = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t kw = Ka.shape[0]
    cdef Py_ssize_t C = Ka.shape[1]
    cdef Py_ssize_t d = Ka.shape[2]
    cdef cnp.ndarray[double, ndim=1] e = np.empty(C)
    cdef double a = _hstep(&wina[0, 0], &Ka[0, 0, 0], &kba[0], &wa[0], ba[0],
                           &e[0], kw, C, d)
    return a, e


def halting_seq_forward(H, K, kb, w, b):
    """Per-step halting activations over H (T, d); returns (a, E)."""
    cdef cnp.ndarray[double, ndim=2] Ha = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] Ka = np.ascontiguousarray(K, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] kba = np.ascontiguousarray(kb, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] ba = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t T = Ha.shape[0]
    cdef Py_ssize_t d = Ha.shape[1]
    cdef Py_ssize_t kw = Ka.shape[0]
    cdef Py_ssize_t C = Ka.shape[1]
    cdef Py_ssize_t la = (kw - 1) // 2
    cdef cnp.ndarray[double, ndim=1] a = np.empty(T)
    cdef cnp.ndarray[double, ndim=2] E = np.empty((T, C))
    cdef cnp.ndarray[double, ndim=2] window = np.zeros((kw, d))
    cdef double* Hp = &Ha[0, 0]
    cdef double* Ep = &E[0, 0]
    cdef double* winp = &window[0, 0]
    cdef double* ap = &a[0]
    cdef const double* Kp = &Ka[0, 0, 0]
    cdef const double* kbp = &kba[0]
    cdef const double* wp = &wa[0]
    cdef double bscalar = ba[0]
    cdef Py_ssize_t j, k, idx, col
    with nogil:
        for j in range(T):
            for k in range(kw):
                idx = j + k - la
                if 0 <= idx < T:
                    for col in range(d):
                        winp[k * d + col] = Hp[idx * d + col]
                else:
                    for col in range(d):
                        winp[k * d + col] = 0.0
            ap[j] = _hstep(winp, Kp, kbp, wp, bscalar, Ep + j * C, kw, C, d)
    return a, E


def halting_seq_backward(da, H, E, a, K, w):
    """Gradients of the halting path; returns (dH, dK, dkb, dw, db)."""
    cdef cnp.ndarray[double, ndim=1] daa = np.ascontiguousarray(da, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ha = np.ascontiguousarray(H, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] Ea = np.ascontiguousarray(E, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] aa = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] Ka = np.ascontiguousarray(K, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] wa = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t T = Ha.shape[0]
    cdef Py_ssize_t d = Ha.shape[1]
    cdef Py_ssize_t kw = Ka.shape[0]
    cdef Py_ssize_t C = Ka.shape[1]
    cdef Py_ssize_t la = (kw - 1) // 2
    cdef cnp.ndarray[double, ndim=2] dH = np.zeros((T, d))
    cdef cnp.ndarray[double, ndim=3] dK = np.zeros((kw, C, d))
    cdef cnp.ndarray[double, ndim=1] dkb = np.zeros(C)
    cdef cnp.ndarray[double, ndim=1] dw = np.zeros(C)
    cdef cnp.ndarray[double, ndim=1] db = np.zeros(1)
    cdef cnp.ndarray[double, ndim=1] dE = np.empty(C)
    cdef double* dHp = &dH[0, 0]
    cdef double* dKp = &dK[0, 0, 0]
    cdef double* dkbp = &dkb[0]
    cdef double* dwp = &dw[0]
    cdef double* dbp = &db[0]
    cdef double* dEp = &dE[0]
    cdef const double* Hp = &Ha[0, 0]
    cdef const double* Ep = &Ea[0, 0]
    cdef const double* Kp = &Ka[0, 0, 0]
    cdef const double* dap = &daa[0]
    cdef const double* ap = &aa[0]
    cdef const double* wp = &wa[0]
    cdef Py_ssize_t j, k, c, col, idx
    cdef double dg
    with nogil:
        for j in range(T):
            dg = dap[j] * ap[j] * (1.0 - ap[j])
            dbp[0] += dg
            for c in range(C):
                if Ep[j * C + c] > 0.0:
                    dwp[c] += dg * Ep[j * C + c]
                    dEp[c] = dg * wp[c]
                else:
                    dEp[c] = 0.0
                dkbp[c] += dEp[c]
            for k in range(kw):
                idx = j + k - la
                if 0 <= idx < T:
                    for c in range(C):
                        for col in range(d):
                            dKp[(k * C + c) * d + col] += dEp[c] * Hp[idx * d + col]
                            dHp[idx * d + col] += Kp[(k * C + c) * d + col] * dEp[c]
    return dH, dK, dkb, dw, db
