"""Basis-expansion kernels with a compiled core and a numpy fallback.

The Cython extension ``kanforge.kernels._ckernels`` is used when it was
built; otherwise the pure-numpy implementations take over.  Selection
happens once at import.  Set ``KANFORGE_KERNELS=numpy`` or
``KANFORGE_KERNELS=compiled`` to force a backend (``compiled`` raises if
the extension is unavailable).

``benchmarks/bench_kernels.py`` times the two backends side by side.
"""

from __future__ import annotations

import os

from . import numpy_backend

_FUNCTIONS = (
    "bspline_features",
    "bspline_features_grad",
    "rbf_features",
    "rbf_features_grad",
    "fourier_features",
    "fourier_features_grad",
)

_choice = os.environ.get("KANFORGE_KERNELS", "auto").lower()
if _choice not in ("auto", "numpy", "compiled"):
    raise ValueError(
        f"KANFORGE_KERNELS must be auto, numpy or compiled, got {_choice!r}"
    )

_compiled = None
if _choice in ("auto", "compiled"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None
    if _choice == "compiled" and _compiled is None:
        raise ImportError(
            "KANFORGE_KERNELS=compiled but the extension is not built; "
            "reinstall the package or drop the override"
        )

backend_name = "numpy" if _compiled is None else "compiled"
_active = numpy_backend if _compiled is None else _compiled

bspline_features = _active.bspline_features
bspline_features_grad = _active.bspline_features_grad
rbf_features = _active.rbf_features
rbf_features_grad = _active.rbf_features_grad
fourier_features = _active.fourier_features
fourier_features_grad = _active.fourier_features_grad


def available_backends() -> list[str]:
    return ["numpy"] if _compiled is None else ["numpy", "compiled"]


def get_backend(name: str):
    """Return the backend module by name, for benchmarks and parity tests."""
    if name == "numpy":
        return numpy_backend
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


__all__ = list(_FUNCTIONS) + ["backend_name", "available_backends", "get_backend"]
