"""Backend selection for the rollout kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``GCBATCH_PURE_PYTHON=1`` to force the fallback.
"""
import importlib
import os

from . import _pykernels

_NAMES = ("norm_angle", "wrap_angle", "step_batch", "replay", "expert_rollout", "policy_rollout")


def load(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("gcbatch._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("GCBATCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        _impl = load("cython")
    except ImportError:
        _impl = _pykernels


def use(name):
    """Switch every kernel entry point to backend ``name`` for this process."""
    global _impl, BACKEND
    _impl = load(name)
    BACKEND = name
    g = globals()
    for n in _NAMES:
        g[n] = getattr(_impl, n)


use("cython" if _impl is not _pykernels else "python")
