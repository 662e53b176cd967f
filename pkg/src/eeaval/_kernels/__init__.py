"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_pykernels``. Set ``EEAVAL_PURE_PYTHON=1`` to force the
fallback, or call :func:`set_backend` (tests and the benchmark do).
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

NEWTON = _pykernels.NEWTON
GINI = _pykernels.GINI

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

if os.environ.get("EEAVAL_PURE_PYTHON") == "1" or _ckernels is None:
    _active = "python"
else:
    _active = "compiled"


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return _active


def set_backend(name):
    """Switch the process-wide backend; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    prev, _active = _active, name
    return prev


def get():
    return _BACKENDS[_active]
