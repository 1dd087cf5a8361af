"""Anchor-instance multi-instance learning.

Bags of instance features are split into spatial regions, scored against
region- and bag-level embeddings to mine anchor instances, corrected by
anchor-guided cross-region attention with attention-based masking, and
pooled by a gated-attention predictor into region- and bag-level class
probabilities. Includes a synthetic bag generator, training/evaluation
with k-fold cross-validation, ablation grids, and a CLI.
"""

try:
    # Training allocates fresh few-hundred-KB buffers every step; glibc
    # serves those via mmap/munmap by default, so each step refaults the
    # pages. Raising the thresholds keeps the buffers on the heap for
    # reuse. Best effort: silently skipped off glibc.
    import ctypes as _ctypes

    _libc = _ctypes.CDLL("libc.so.6")
    _libc.mallopt(-3, 32 * 1024 * 1024)  # M_MMAP_THRESHOLD
    _libc.mallopt(-1, 64 * 1024 * 1024)  # M_TRIM_THRESHOLD
except (OSError, AttributeError):  # pragma: no cover
    pass

from .tensor import Tensor, backend_name

try:
    # The workload is many small matrix products; BLAS thread pools only
    # add sync overhead (spinning workers fight the compute thread) and
    # blur determinism. Parallelism is done at the process level (one
    # worker per fold) instead. This must run after the kernel backend
    # import above so scipy's BLAS is already loaded and gets capped too.
    from threadpoolctl import threadpool_limits

    _BLAS_LIMIT = threadpool_limits(limits=1, user_api="blas")
except ImportError:  # pragma: no cover
    _BLAS_LIMIT = None

__version__ = "0.1.0"

__all__ = ["Tensor", "backend_name", "__version__"]
