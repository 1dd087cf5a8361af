# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels.

Mirrors py_kernels exactly: float64, C-contiguous in/out. Matrix products
go through BLAS dgemm; everything else is a typed loop. Row-major arrays
are fed to the column-major BLAS via the usual transpose identity
(C = A@B  <=>  C^T = B^T @ A^T).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log as c_log, sqrt as c_sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"

cdef char CHAR_N = 78  # 'N'
cdef char CHAR_T = 84  # 'T'

cdef double ONE = 1.0
cdef double ZERO = 0.0


# ---------------------------------------------------------------- matmul

def matmul(double[:, ::1] a, double[:, ::1] b):
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    if m == 0 or n == 0 or k == 0:
        return np.zeros((m, n))
    out = np.empty((m, n))
    cdef double[:, ::1] c = out
    dgemm(&CHAR_N, &CHAR_N, &n, &m, &k, &ONE,
          &b[0, 0], &n, &a[0, 0], &k, &ZERO, &c[0, 0], &n)
    return out


def matmul_nt(double[:, ::1] a, double[:, ::1] b):
    """a @ b.T"""
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[0]
    if m == 0 or n == 0 or k == 0:
        return np.zeros((m, n))
    out = np.empty((m, n))
    cdef double[:, ::1] c = out
    dgemm(&CHAR_T, &CHAR_N, &n, &m, &k, &ONE,
          &b[0, 0], &k, &a[0, 0], &k, &ZERO, &c[0, 0], &n)
    return out


def matmul_tn(double[:, ::1] a, double[:, ::1] b):
    """a.T @ b"""
    cdef int m = a.shape[1], k = a.shape[0], n = b.shape[1]
    if m == 0 or n == 0 or k == 0:
        return np.zeros((m, n))
    out = np.empty((m, n))
    cdef double[:, ::1] c = out
    dgemm(&CHAR_N, &CHAR_T, &n, &m, &k, &ONE,
          &b[0, 0], &n, &a[0, 0], &m, &ZERO, &c[0, 0], &n)
    return out


def transpose(double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[j, i] = a[i, j]
    return out


# ----------------------------------------------------------- elementwise

def add(a, b):
    out = np.empty_like(a)
    _add_flat(a.ravel(), b.ravel(), out.ravel())
    return out


cdef void _add_flat(double[::1] x, double[::1] y, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] + y[i]


def add_rowvec(double[:, ::1] a, double[::1] v):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[i, j] = a[i, j] + v[j]
    return out


def sub(a, b):
    out = np.empty_like(a)
    _sub_flat(a.ravel(), b.ravel(), out.ravel())
    return out


cdef void _sub_flat(double[::1] x, double[::1] y, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] - y[i]


def mul(a, b):
    out = np.empty_like(a)
    _mul_flat(a.ravel(), b.ravel(), out.ravel())
    return out


cdef void _mul_flat(double[::1] x, double[::1] y, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] * y[i]


def scale(a, double s):
    out = np.empty_like(a)
    _scale_flat(a.ravel(), s, out.ravel())
    return out


cdef void _scale_flat(double[::1] x, double s, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] * s


def add_into(acc, x):
    _add_into_flat(acc.ravel(), x.ravel())


cdef void _add_into_flat(double[::1] a, double[::1] x):
    cdef Py_ssize_t i
    for i in range(a.shape[0]):
        a[i] += x[i]


def relu(a):
    out = np.empty_like(a)
    _relu_flat(a.ravel(), out.ravel())
    return out


cdef void _relu_flat(double[::1] x, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = x[i] if x[i] > 0.0 else 0.0


def relu_bwd(x, g):
    out = np.empty_like(x)
    _relu_bwd_flat(x.ravel(), g.ravel(), out.ravel())
    return out


cdef void _relu_bwd_flat(double[::1] x, double[::1] g, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = g[i] if x[i] > 0.0 else 0.0


def sigmoid(a):
    # numpy's SIMD exp beats a scalar libm loop on the (rows, H) gate inputs
    out = np.empty_like(a)
    np.negative(a, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def sigmoid_bwd(y, g):
    out = np.empty_like(y)
    _sigmoid_bwd_flat(y.ravel(), g.ravel(), out.ravel())
    return out


cdef void _sigmoid_bwd_flat(double[::1] y, double[::1] g, double[::1] o):
    cdef Py_ssize_t i
    for i in range(y.shape[0]):
        o[i] = g[i] * y[i] * (1.0 - y[i])


def tanh(a):
    return np.tanh(a)  # SIMD ufunc; the scalar libm loop is far slower


def tanh_bwd(y, g):
    out = np.empty_like(y)
    _tanh_bwd_flat(y.ravel(), g.ravel(), out.ravel())
    return out


cdef void _tanh_bwd_flat(double[::1] y, double[::1] g, double[::1] o):
    cdef Py_ssize_t i
    for i in range(y.shape[0]):
        o[i] = g[i] * (1.0 - y[i] * y[i])


def log(a):
    out = np.empty_like(a)
    _log_flat(a.ravel(), out.ravel())
    return out


cdef void _log_flat(double[::1] x, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = c_log(x[i])


def log_bwd(x, g):
    out = np.empty_like(x)
    _log_bwd_flat(x.ravel(), g.ravel(), out.ravel())
    return out


cdef void _log_bwd_flat(double[::1] x, double[::1] g, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = g[i] / x[i]


def clip(a, double lo, double hi):
    out = np.empty_like(a)
    _clip_flat(a.ravel(), lo, hi, out.ravel())
    return out


cdef void _clip_flat(double[::1] x, double lo, double hi, double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = lo if x[i] < lo else (hi if x[i] > hi else x[i])


def clip_bwd(x, g, double lo, double hi):
    out = np.empty_like(x)
    _clip_bwd_flat(x.ravel(), g.ravel(), lo, hi, out.ravel())
    return out


cdef void _clip_bwd_flat(double[::1] x, double[::1] g, double lo, double hi,
                         double[::1] o):
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = g[i] if (x[i] >= lo and x[i] <= hi) else 0.0


# ------------------------------------------------------------ reductions

def softmax_rows(double[:, ::1] a):
    # max-shift and normalization in C, the exp via numpy's SIMD ufunc
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    cdef double mx, s
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        mx = a[i, 0]
        for j in range(1, n):
            if a[i, j] > mx:
                mx = a[i, j]
        for j in range(n):
            o[i, j] = a[i, j] - mx
    np.exp(out, out=out)
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += o[i, j]
        for j in range(n):
            o[i, j] /= s
    return out


def softmax_rows_bwd(double[:, ::1] y, double[:, ::1] g):
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1], i, j
    cdef double dot
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        dot = 0.0
        for j in range(n):
            dot += y[i, j] * g[i, j]
        for j in range(n):
            o[i, j] = y[i, j] * (g[i, j] - dot)
    return out


def mean_rows(double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    out = np.zeros(n)
    cdef double[::1] o = out
    for i in range(m):
        for j in range(n):
            o[j] += a[i, j]
    for j in range(n):
        o[j] /= m
    return out


def sum_rows(double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], i, j
    out = np.zeros(n)
    cdef double[::1] o = out
    for i in range(m):
        for j in range(n):
            o[j] += a[i, j]
    return out


def broadcast_rows(double[::1] v, Py_ssize_t m):
    cdef Py_ssize_t n = v.shape[0], i, j
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    for i in range(m):
        for j in range(n):
            o[i, j] = v[j]
    return out


def sum_all(a):
    return _sum_flat(a.ravel())


cdef double _sum_flat(double[::1] x):
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(x.shape[0]):
        s += x[i]
    return s


def sq_diff_sum(a, b):
    return _sq_diff_flat(a.ravel(), b.ravel())


cdef double _sq_diff_flat(double[::1] x, double[::1] y):
    cdef Py_ssize_t i
    cdef double s = 0.0, d
    for i in range(x.shape[0]):
        d = x[i] - y[i]
        s += d * d
    return s


def adamw_update(theta, g, m, v, double lr, double wd, double b1, double b2,
                 double eps, double bc1, double bc2):
    _adamw_flat(theta.ravel(), g.ravel(), m.ravel(), v.ravel(),
                lr, wd, b1, b2, eps, bc1, bc2)


cdef void _adamw_flat(double[::1] theta, double[::1] g, double[::1] m,
                      double[::1] v, double lr, double wd, double b1,
                      double b2, double eps, double bc1, double bc2):
    cdef Py_ssize_t i
    cdef double upd
    for i in range(theta.shape[0]):
        m[i] = b1 * m[i] + (1.0 - b1) * g[i]
        v[i] = b2 * v[i] + (1.0 - b2) * (g[i] * g[i])
        upd = (m[i] / bc1) / (c_sqrt(v[i] / bc2) + eps) + wd * theta[i]
        theta[i] -= lr * upd


# ---------------------------------------------------------------- gather

def gather_rows(double[:, ::1] a, Py_ssize_t[::1] idx):
    cdef Py_ssize_t s = idx.shape[0], n = a.shape[1], i, j
    out = np.empty((s, n))
    cdef double[:, ::1] o = out
    for i in range(s):
        for j in range(n):
            o[i, j] = a[idx[i], j]
    return out


def scatter_add_rows(double[:, ::1] acc, Py_ssize_t[::1] idx,
                     double[:, ::1] rows):
    cdef Py_ssize_t s = idx.shape[0], n = acc.shape[1], i, j
    for i in range(s):
        for j in range(n):
            acc[idx[i], j] += rows[i, j]
