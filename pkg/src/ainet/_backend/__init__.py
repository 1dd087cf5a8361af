"""Kernel backend selection.

Two interchangeable kernel sets exist: the compiled Cython extension and
the numpy fallback. The active one is picked at import time; set
AINET_BACKEND=compiled|numpy to force a choice (forcing "compiled" when
the extension is missing is an error rather than a silent downgrade).
"""

import os

from . import py_kernels

try:
    from . import _ckernels as c_kernels
except ImportError:  # extension not built
    c_kernels = None


def available_backends():
    names = ["numpy"]
    if c_kernels is not None:
        names.insert(0, "compiled")
    return names


def get_kernels(name):
    if name == "numpy":
        return py_kernels
    if name == "compiled":
        if c_kernels is None:
            raise ImportError(
                "compiled kernel backend requested but the extension is not "
                "built; install with the extension or unset AINET_BACKEND"
            )
        return c_kernels
    raise ValueError(f"unknown backend {name!r}; expected 'compiled' or 'numpy'")


_requested = os.environ.get("AINET_BACKEND", "auto").strip().lower()
if _requested in ("", "auto"):
    active = c_kernels if c_kernels is not None else py_kernels
else:
    active = get_kernels(_requested)

backend_name = active.NAME
