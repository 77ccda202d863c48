"""Kernel backend selection.

The compiled module is used when importable; ``DUALPROJ_BACKEND=python``
forces the numpy fallback (useful for cross-checking the two).
"""

import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _kernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("DUALPROJ_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    BACKEND = "compiled"
else:
    kernels = _pykernels
    BACKEND = "python"


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    if compiled_kernels is not None:
        names.insert(0, "compiled")
    return names


def get(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "compiled":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled_kernels
    raise ValueError(f"unknown backend {name!r}")
