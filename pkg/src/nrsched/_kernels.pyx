# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense-network hot kernels.

Same contract as ``nrsched._kernels_np``: relu hidden layers, linear output,
fused forward+backward for the squared TD error of one selected output unit
per sample. The batched matrix products go through BLAS (via scipy's Cython
bindings); everything else is plain C loops, so a whole training step does
no per-operation Python dispatch.
"""

import numpy as np

from scipy.linalg.cython_blas cimport dgemm, dgemv


cdef inline void _gemm_rm(bint ta, bint tb, int m, int n, int k, double alpha,
                          double* a, int lda, double* b, int ldb,
                          double beta, double* c, int ldc) noexcept nogil:
    # Row-major C(m,n) = alpha*op(a)(m,k) @ op(b)(k,n) + beta*C, expressed as
    # the column-major product C^T = op(b)^T @ op(a)^T. ld* are the row
    # strides of the stored row-major arrays.
    cdef char fa = 116 if ta else 110  # 't' / 'n'
    cdef char fb = 116 if tb else 110
    dgemm(&fb, &fa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef inline void _add_bias_relu(double[:, ::1] z, double[::1] bias, bint relu) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            z[i, j] += bias[j]
            if relu and z[i, j] < 0.0:
                z[i, j] = 0.0


DEF MAX_LAYERS = 16


def forward_one(list weights, list biases, x):
    """Q-values for a single input vector."""
    cdef Py_ssize_t n_layers = len(weights)
    if n_layers > MAX_LAYERS:
        raise ValueError(f"forward_one supports up to {MAX_LAYERS} layers")
    cdef const double* wptr[MAX_LAYERS]
    cdef const double* bptr[MAX_LAYERS]
    cdef Py_ssize_t rows[MAX_LAYERS]
    cdef Py_ssize_t cols[MAX_LAYERS]
    cdef double[:, ::1] wmv
    cdef double[::1] bmv
    cdef Py_ssize_t k, i, j, scratch = 1
    for k in range(n_layers):
        wmv = weights[k]
        bmv = biases[k]
        wptr[k] = &wmv[0, 0]
        bptr[k] = &bmv[0]
        rows[k] = wmv.shape[0]
        cols[k] = wmv.shape[1]
        if k < n_layers - 1 and rows[k] > scratch:
            scratch = rows[k]

    cdef double[::1] xin = np.ascontiguousarray(x, dtype=np.float64)
    ping = np.empty(scratch)
    pong = np.empty(scratch)
    out = np.empty(rows[n_layers - 1])
    cdef double[::1] ping_v = ping, pong_v = pong, out_v = out
    cdef const double* cur = &xin[0]
    cdef double* nxt
    cdef char trans = 116  # 't': row-major W @ x via the column-major view
    cdef int m, n, inc = 1
    cdef double one = 1.0, zero = 0.0
    with nogil:
        for k in range(n_layers):
            if k == n_layers - 1:
                nxt = &out_v[0]
            elif k % 2 == 0:
                nxt = &ping_v[0]
            else:
                nxt = &pong_v[0]
            m = <int>cols[k]
            n = <int>rows[k]
            dgemv(&trans, &m, &n, &one, <double*>wptr[k], &m, <double*>cur, &inc, &zero, nxt, &inc)
            for i in range(rows[k]):
                nxt[i] += bptr[k][i]
                if k < n_layers - 1 and nxt[i] < 0.0:
                    nxt[i] = 0.0
            cur = nxt
    return out


def batch_forward(list weights, list biases, xs):
    """Q-values for a batch of inputs, one row per sample."""
    cdef double[:, ::1] h = np.ascontiguousarray(xs, dtype=np.float64)
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t m = h.shape[0]
    cdef double[:, ::1] w, z
    cdef Py_ssize_t k
    out = None
    for k in range(n_layers):
        w = weights[k]
        out = np.empty((m, w.shape[0]))
        z = out
        _gemm_rm(False, True, <int>m, <int>w.shape[0], <int>w.shape[1], 1.0,
                 &h[0, 0], <int>h.shape[1], &w[0, 0], <int>w.shape[1],
                 0.0, &z[0, 0], <int>w.shape[0])
        _add_bias_relu(z, biases[k], k < n_layers - 1)
        h = z
    return out


def td_backward_batch(list weights, list biases, states, actions, targets):
    """Mean squared TD error over a minibatch and its parameter gradients."""
    cdef Py_ssize_t n_layers = len(weights)
    cdef double[:, ::1] s = np.ascontiguousarray(states, dtype=np.float64)
    cdef Py_ssize_t[::1] act = np.ascontiguousarray(actions, dtype=np.intp)
    cdef double[::1] tgt = np.ascontiguousarray(targets, dtype=np.float64)
    cdef Py_ssize_t m = s.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double[:, ::1] w, z, h, delta, dprev, gw
    cdef double[::1] gb
    cdef double err, loss = 0.0

    # Forward, keeping every post-activation layer.
    acts = [np.asarray(s)]
    h = s
    for k in range(n_layers):
        w = weights[k]
        out = np.empty((m, w.shape[0]))
        z = out
        _gemm_rm(False, True, <int>m, <int>w.shape[0], <int>w.shape[1], 1.0,
                 &h[0, 0], <int>h.shape[1], &w[0, 0], <int>w.shape[1],
                 0.0, &z[0, 0], <int>w.shape[0])
        _add_bias_relu(z, biases[k], k < n_layers - 1)
        acts.append(out)
        h = z

    # Error signal on the selected output units only, mean-reduced.
    q = acts[n_layers]
    cdef double[:, ::1] qv = q
    delta_arr = np.zeros_like(q)
    delta = delta_arr
    with nogil:
        for i in range(m):
            err = qv[i, act[i]] - tgt[i]
            loss += err * err
            delta[i, act[i]] = 2.0 * err / m
    loss /= m

    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        w = weights[k]
        hk = acts[k]
        h = hk
        gw_arr = np.empty((w.shape[0], w.shape[1]))
        gw = gw_arr
        _gemm_rm(True, False, <int>w.shape[0], <int>w.shape[1], <int>m, 1.0,
                 &delta[0, 0], <int>delta.shape[1], &h[0, 0], <int>h.shape[1],
                 0.0, &gw[0, 0], <int>w.shape[1])
        gb_arr = np.zeros(w.shape[0])
        gb = gb_arr
        with nogil:
            for i in range(m):
                for j in range(w.shape[0]):
                    gb[j] += delta[i, j]
        grad_w[k] = gw_arr
        grad_b[k] = gb_arr
        if k:
            dprev_arr = np.empty((m, w.shape[1]))
            dprev = dprev_arr
            _gemm_rm(False, False, <int>m, <int>w.shape[1], <int>w.shape[0], 1.0,
                     &delta[0, 0], <int>delta.shape[1], &w[0, 0], <int>w.shape[1],
                     0.0, &dprev[0, 0], <int>w.shape[1])
            with nogil:
                for i in range(m):
                    for j in range(w.shape[1]):
                        if h[i, j] <= 0.0:
                            dprev[i, j] = 0.0
            delta = dprev
    return loss, grad_w, grad_b
