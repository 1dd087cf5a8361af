"""Numpy implementations of the numeric kernels.

This is the fallback backend and the reference the compiled backend is
tested against. Every function takes C-contiguous float64 arrays and
returns freshly allocated arrays (except the explicitly in-place ones).
"""

import numpy as np

NAME = "numpy"


# ---------------------------------------------------------------- matmul

def matmul(a, b):
    return a @ b


def matmul_nt(a, b):
    """a @ b.T for row-major operands."""
    return a @ b.T


def matmul_tn(a, b):
    """a.T @ b for row-major operands."""
    return a.T @ b


def transpose(a):
    return np.ascontiguousarray(a.T)


# ----------------------------------------------------------- elementwise

def add(a, b):
    return a + b


def add_rowvec(a, v):
    return a + v


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def scale(a, s):
    return a * s


def add_into(acc, x):
    """In-place acc += x (gradient accumulation)."""
    acc += x


def relu(a):
    return np.maximum(a, 0.0)


def relu_bwd(x, g):
    return np.where(x > 0.0, g, 0.0)


def sigmoid(a):
    out = np.empty_like(a)
    np.negative(a, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def sigmoid_bwd(y, g):
    return g * y * (1.0 - y)


def tanh(a):
    return np.tanh(a)


def tanh_bwd(y, g):
    return g * (1.0 - y * y)


def log(a):
    return np.log(a)


def log_bwd(x, g):
    return g / x


def clip(a, lo, hi):
    return np.clip(a, lo, hi)


def clip_bwd(x, g, lo, hi):
    return np.where((x >= lo) & (x <= hi), g, 0.0)


# ------------------------------------------------------------ reductions

def softmax_rows(a):
    shifted = a - a.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def softmax_rows_bwd(y, g):
    dot = np.sum(y * g, axis=1, keepdims=True)
    return y * (g - dot)


def mean_rows(a):
    return a.sum(axis=0) / a.shape[0]


def sum_rows(a):
    """Column sums: reduce an (m, n) matrix over its rows to shape (n,)."""
    return a.sum(axis=0)


def broadcast_rows(v, m):
    return np.tile(v, (m, 1))


def sum_all(a):
    return float(a.sum())


def sq_diff_sum(a, b):
    d = a - b
    return float(np.dot(d.ravel(), d.ravel()))


def adamw_update(theta, g, m, v, lr, wd, b1, b2, eps, bc1, bc2):
    """In-place AdamW step on one tensor: updates theta, m, v."""
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    update = (m / bc1) / (np.sqrt(v / bc2) + eps)
    if wd != 0.0:
        update += wd * theta
    theta -= lr * update


# ---------------------------------------------------------------- gather

def gather_rows(a, idx):
    return a[idx]


def scatter_add_rows(acc, idx, rows):
    """In-place acc[idx[s], :] += rows[s, :] with repeated-index accumulation."""
    np.add.at(acc, idx, rows)
