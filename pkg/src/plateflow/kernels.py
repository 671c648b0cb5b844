"""Per-element kernel dispatch: compiled core when built, NumPy otherwise.

Set ``PLATEFLOW_KERNELS=python`` to force the NumPy path.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PLATEFLOW_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython' or 'python'; default: active)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def cubic_energy(hess, grad, area, Z, yloc):
    return _impl.cubic_energy(hess, grad, area, Z, yloc)


def cubic_gradient(hess, grad, area, Z, yloc):
    return _impl.cubic_gradient(hess, grad, area, Z, yloc)


def constraint_rows(grad, area, yloc):
    return _impl.constraint_rows(grad, area, yloc)


def metric_defect(grad, area, g, yloc):
    return _impl.metric_defect(grad, area, g, yloc)
