"""Kernel backend selection.

The compiled backend is used when the extension imports; otherwise, or when
``SIMFUZZ_PURE_PYTHON=1`` is set, the pure-Python kernels are used. Both
expose the same functions with identical results.
"""

import importlib
import os

from . import _pykernels

_BACKENDS = {"python": "simfuzz._pykernels", "cython": "simfuzz._ckernels"}


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module(_BACKENDS["cython"])
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


def get(name: str | None = None):
    """Kernel module for ``name`` (``"python"``/``"cython"``) or the default."""
    if name is None:
        return _DEFAULT
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}")
    return importlib.import_module(_BACKENDS[name])


def _select():
    if os.environ.get("SIMFUZZ_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels
    return _ckernels


_DEFAULT = _select()
BACKEND = _DEFAULT.BACKEND


def default():
    return _DEFAULT
