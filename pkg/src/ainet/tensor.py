"""Dense tensors with reverse-mode differentiation.

Small dynamic-tape engine sufficient for the whole pipeline: rank 0-2
float tensors, a fixed set of operations, and a backward pass driven by
per-op vector-Jacobian closures. Numeric work is delegated to the active
kernel backend (compiled extension or numpy, see ainet._backend).

Conventions:
  * 64-bit precision by default; float32 is an opt-in via AINET_DTYPE or
    set_default_dtype() and runs on the numpy kernels only.
  * Tensors are immutable after construction. The one sanctioned
    exception is the optimizer's in-place parameter update.
  * A tape (the _parents/_vjp graph hanging off a result) belongs to one
    logical thread. Read-only tensors may be shared freely.
  * Leaf tensors created with requires_grad=True carry a persistent
    .grad buffer that backward() accumulates into; intermediate
    gradients live only for the duration of a backward pass.
  * The only broadcast is row-vector-over-matrix in add(); every other
    shape mismatch raises ShapeError.
"""

import math
import os
from contextlib import contextmanager

import numpy as np

from . import _backend
from ._backend import py_kernels
from .errors import ShapeError

_DTYPE = np.float64
_K = _backend.active

if os.environ.get("AINET_DTYPE", "").strip() == "float32":
    _DTYPE = np.float32
    _K = py_kernels  # compiled kernels are float64-only


def set_default_dtype(name):
    """Switch precision ("float64" or "float32") for newly created tensors.

    float32 forces the numpy kernels; float64 restores the backend chosen
    at import.
    """
    global _DTYPE, _K
    if name == "float64":
        _DTYPE = np.float64
        _K = _backend.active
    elif name == "float32":
        _DTYPE = np.float32
        _K = py_kernels
    else:
        raise ValueError(f"unknown dtype {name!r}")


def backend_name():
    """Name of the kernel backend actually in use."""
    return _K.NAME


def kernels():
    """The active kernel module (compiled or numpy)."""
    return _K


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense array plus optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=_DTYPE)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # convenience operators (elementwise; matmul via @)
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _node(data, parents, vjp):
    """Wrap an op result, recording the tape edge."""
    t = Tensor.__new__(Tensor)
    t.data = data
    t.requires_grad = True
    t.grad = None
    t._parents = parents
    t._vjp = vjp
    return t


def _track(*tensors):
    return _grad_enabled and any(t.requires_grad for t in tensors)


def constant(data):
    return Tensor(data, requires_grad=False)


def parameter(data):
    return Tensor(data, requires_grad=True)


# --------------------------------------------------------------- backward

def _toposort(root):
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return topo


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable leaf's .grad.

    Repeated calls keep accumulating until grads are zeroed. Gradients of
    intermediate nodes are transient; the graph itself is left intact.
    """
    if loss.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ShapeError("loss is not reachable from any tracked tensor")

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_toposort(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node._parents:
            _K.add_into(node.grad, g)
            continue
        for p, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not p.requires_grad:
                continue
            if p._parents:
                cur = grads.get(id(p))
                if cur is None:
                    grads[id(p)] = pg
                else:
                    _K.add_into(cur, pg)
            else:
                _K.add_into(p.grad, pg)


# ------------------------------------------------------------- operations

def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = _K.matmul(a.data, b.data)
    if not _track(a, b):
        return constant(out)
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            _K.matmul_nt(g, bd) if a.requires_grad else None,
            _K.matmul_tn(ad, g) if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def matmul_t(a, b):
    """a @ b.T without materializing the transpose."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"matmul_t shape mismatch: {a.shape} x {b.shape}")
    out = _K.matmul_nt(a.data, b.data)
    if not _track(a, b):
        return constant(out)
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            _K.matmul(g, bd) if a.requires_grad else None,
            _K.matmul_tn(g, ad) if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def transpose(a):
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    out = _K.transpose(a.data)
    if not _track(a):
        return constant(out)
    return _node(out, (a,), lambda g: (_K.transpose(g),))


def add(a, b):
    """Elementwise sum; also accepts matrix + row vector."""
    if a.shape == b.shape:
        out = _K.add(a.data, b.data)
        if not _track(a, b):
            return constant(out)

        def vjp(g):
            ga = g if a.requires_grad else None
            gb = None
            if b.requires_grad:
                gb = g.copy() if a.requires_grad else g
            return ga, gb

        return _node(out, (a, b), vjp)
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        out = _K.add_rowvec(a.data, b.data)
        if not _track(a, b):
            return constant(out)

        def vjp(g):
            return (
                g if a.requires_grad else None,
                _K.sum_rows(g) if b.requires_grad else None,
            )

        return _node(out, (a, b), vjp)
    raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")


def sub(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    out = _K.sub(a.data, b.data)
    if not _track(a, b):
        return constant(out)

    def vjp(g):
        return (
            g if a.requires_grad else None,
            _K.scale(g, -1.0) if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def mul(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    out = _K.mul(a.data, b.data)
    if not _track(a, b):
        return constant(out)
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            _K.mul(g, bd) if a.requires_grad else None,
            _K.mul(g, ad) if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def scale(a, s):
    s = float(s)
    out = _K.scale(a.data, s)
    if not _track(a):
        return constant(out)
    return _node(out, (a,), lambda g: (_K.scale(g, s),))


def relu(a):
    out = _K.relu(a.data)
    if not _track(a):
        return constant(out)
    ad = a.data
    return _node(out, (a,), lambda g: (_K.relu_bwd(ad, g),))


def sigmoid(a):
    out = _K.sigmoid(a.data)
    if not _track(a):
        return constant(out)
    return _node(out, (a,), lambda g: (_K.sigmoid_bwd(out, g),))


def tanh(a):
    out = _K.tanh(a.data)
    if not _track(a):
        return constant(out)
    return _node(out, (a,), lambda g: (_K.tanh_bwd(out, g),))


def log(a):
    """Natural log; caller guarantees positive input (clip() upstream)."""
    out = _K.log(a.data)
    if not _track(a):
        return constant(out)
    ad = a.data
    return _node(out, (a,), lambda g: (_K.log_bwd(ad, g),))


def clip(a, lo, hi):
    """Clamp to [lo, hi]; gradient passes through in-range entries only."""
    lo, hi = float(lo), float(hi)
    out = _K.clip(a.data, lo, hi)
    if not _track(a):
        return constant(out)
    ad = a.data
    return _node(out, (a,), lambda g: (_K.clip_bwd(ad, g, lo, hi),))


def softmax_rows(a):
    """Row-wise softmax of a matrix, max-shifted for stability."""
    if a.ndim != 2:
        raise ShapeError(f"softmax_rows expects a matrix, got shape {a.shape}")
    out = _K.softmax_rows(a.data)
    if not _track(a):
        return constant(out)
    return _node(out, (a,), lambda g: (_K.softmax_rows_bwd(out, g),))


def softmax(a):
    """Softmax of a vector."""
    if a.ndim != 1:
        raise ShapeError(f"softmax expects a vector, got shape {a.shape}")
    n = a.shape[0]
    out2 = _K.softmax_rows(a.data.reshape(1, n))
    out = out2.reshape(n)
    if not _track(a):
        return constant(out)

    def vjp(g):
        return (_K.softmax_rows_bwd(out2, g.reshape(1, n)).reshape(n),)

    return _node(out, (a,), vjp)


def mean_rows(a):
    """Column means of a matrix: out[d] = (1/M) sum_i a[i, d]."""
    if a.ndim != 2:
        raise ShapeError(f"mean_rows expects a matrix, got shape {a.shape}")
    m = a.shape[0]
    if m == 0:
        raise ShapeError("mean_rows of an empty matrix")
    out = _K.mean_rows(a.data)
    if not _track(a):
        return constant(out)

    def vjp(g):
        return (_K.broadcast_rows(_K.scale(g, 1.0 / m), m),)

    return _node(out, (a,), vjp)


def tsum(a):
    """Sum of all entries, as a scalar tensor."""
    out = np.asarray(_K.sum_all(a.data), dtype=a.data.dtype)
    if not _track(a):
        return constant(out)
    shape = a.shape

    def vjp(g):
        return (np.full(shape, g.reshape(-1)[0], dtype=g.dtype),)

    return _node(out, (a,), vjp)


def sq_diff_sum(a, b):
    """Sum of squared differences, as a scalar tensor."""
    if a.shape != b.shape:
        raise ShapeError(f"sq_diff_sum shape mismatch: {a.shape} vs {b.shape}")
    out = np.asarray(_K.sq_diff_sum(a.data, b.data), dtype=a.data.dtype)
    if not _track(a, b):
        return constant(out)
    ad, bd = a.data, b.data

    def vjp(g):
        d = _K.sub(ad, bd)
        s = 2.0 * float(g.reshape(-1)[0])
        return (
            _K.scale(d, s) if a.requires_grad else None,
            _K.scale(d, -s) if b.requires_grad else None,
        )

    return _node(out, (a, b), vjp)


def gather_rows(a, idx):
    """Select rows by index; backward scatters into the selected rows."""
    if a.ndim != 2:
        raise ShapeError(f"gather_rows expects a matrix, got shape {a.shape}")
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("gather_rows expects a flat index list")
    m = a.shape[0]
    if idx.size:
        lo, hi = int(idx.min()), int(idx.max())
        if lo < 0 or hi >= m:
            bad = lo if lo < 0 else hi
            raise IndexError(f"gather_rows index {bad} out of range [0, {m})")
    out = _K.gather_rows(a.data, idx)
    if not _track(a):
        return constant(out)
    shape = a.data.shape
    dt = a.data.dtype

    def vjp(g):
        acc = np.zeros(shape, dtype=dt)
        _K.scatter_add_rows(acc, idx, g)
        return (acc,)

    return _node(out, (a,), vjp)


def concat_rows(tensors):
    """Stack matrices along rows (all must share the column count)."""
    if not tensors:
        raise ShapeError("concat_rows of an empty list")
    ncol = tensors[0].shape[1] if tensors[0].ndim == 2 else None
    for t in tensors:
        if t.ndim != 2 or t.shape[1] != ncol:
            raise ShapeError(
                f"concat_rows needs matching matrices, got {[t.shape for t in tensors]}"
            )
    out = np.concatenate([t.data for t in tensors], axis=0)
    if not _track(*tensors):
        return constant(out)
    offsets = np.cumsum([0] + [t.shape[0] for t in tensors])

    def vjp(g):
        return tuple(
            g[offsets[i]:offsets[i + 1]] if t.requires_grad else None
            for i, t in enumerate(tensors)
        )

    return _node(out, tuple(tensors), vjp)


def slice_rows(a, start, stop):
    """Contiguous row range of a matrix or segment of a vector."""
    out = a.data[start:stop].copy()
    if not _track(a):
        return constant(out)
    shape = a.data.shape
    dt = a.data.dtype

    def vjp(g):
        acc = np.zeros(shape, dtype=dt)
        acc[start:stop] = g
        return (acc,)

    return _node(out, (a,), vjp)


def slice_cols(a, start, stop):
    """Contiguous column range of a matrix."""
    if a.ndim != 2:
        raise ShapeError(f"slice_cols expects a matrix, got shape {a.shape}")
    out = np.ascontiguousarray(a.data[:, start:stop])
    if not _track(a):
        return constant(out)
    shape = a.data.shape
    dt = a.data.dtype

    def vjp(g):
        acc = np.zeros(shape, dtype=dt)
        acc[:, start:stop] = g
        return (acc,)

    return _node(out, (a,), vjp)


def concat_cols(tensors):
    """Stack matrices along columns (all must share the row count)."""
    if not tensors:
        raise ShapeError("concat_cols of an empty list")
    nrow = tensors[0].shape[0] if tensors[0].ndim == 2 else None
    for t in tensors:
        if t.ndim != 2 or t.shape[0] != nrow:
            raise ShapeError(
                f"concat_cols needs matching matrices, got {[t.shape for t in tensors]}"
            )
    out = np.concatenate([t.data for t in tensors], axis=1)
    if not _track(*tensors):
        return constant(out)
    offsets = np.cumsum([0] + [t.shape[1] for t in tensors])

    def vjp(g):
        return tuple(
            np.ascontiguousarray(g[:, offsets[i]:offsets[i + 1]])
            if t.requires_grad
            else None
            for i, t in enumerate(tensors)
        )

    return _node(out, tuple(tensors), vjp)


def reshape(a, shape):
    out = a.data.reshape(shape)
    if not _track(a):
        return constant(out)
    orig = a.data.shape
    return _node(out, (a,), lambda g: (g.reshape(orig),))


def cosine(u, v, eps=1e-12):
    """Cosine similarity of two vectors, as a plain float (no gradient).

    eps is added to each norm so zero vectors yield a near-zero
    similarity instead of dividing by zero.
    """
    ud = u.data if isinstance(u, Tensor) else np.asarray(u, dtype=_DTYPE)
    vd = v.data if isinstance(v, Tensor) else np.asarray(v, dtype=_DTYPE)
    un = math.sqrt(float(np.dot(ud, ud)))
    vn = math.sqrt(float(np.dot(vd, vd)))
    return float(np.dot(ud, vd)) / ((un + eps) * (vn + eps))
