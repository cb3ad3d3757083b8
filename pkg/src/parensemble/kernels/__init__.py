"""Kernel backend selection.

The compiled numba kernels are used when numba imports and
``PARENSEMBLE_DISABLE_NUMBA`` is unset (or "0"); otherwise the pure-numpy
fallback. Callers go through :func:`active` so the choice can be switched
at runtime with :func:`set_backend`.
"""
from __future__ import annotations

import importlib
import os
from types import ModuleType

from . import _numpy

ENV_FLAG = "PARENSEMBLE_DISABLE_NUMBA"

EUCLIDEAN = _numpy.EUCLIDEAN
MANHATTAN = _numpy.MANHATTAN
LINEAR = _numpy.LINEAR
POLY = _numpy.POLY
SIGMOID = _numpy.SIGMOID


def numba_available() -> bool:
    try:
        importlib.import_module("numba")
    except ImportError:
        return False
    return True


def load(name: str) -> ModuleType:
    if name == "numpy":
        return _numpy
    if name == "numba":
        return importlib.import_module("._numba", __name__)
    raise ValueError(f"unknown kernel backend {name!r}")


def default_backend() -> str:
    if os.environ.get(ENV_FLAG, "") not in ("", "0") or not numba_available():
        return "numpy"
    return "numba"


_active = load(default_backend())


def active() -> ModuleType:
    return _active


def backend_name() -> str:
    return "numba" if _active is not _numpy else "numpy"


def set_backend(name: str) -> str:
    """Switch backends; returns the previous name."""
    global _active
    prev = backend_name()
    _active = load(name)
    return prev


def warmup() -> None:
    """Trigger compilation on tiny inputs so JIT time stays out of timed runs.

    Dataset arrays are read-only, which numba types separately, so both
    variants are compiled.
    """
    import numpy as np

    k = active()
    for ro in (False, True):
        x = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]])
        y = np.array([0, 0, 1, 1], dtype=np.int64)
        if ro:
            x.flags.writeable = False
            y.flags.writeable = False
        yf = np.array([1.0, 1.0, -1.0, -1.0])
        rows = np.arange(4, dtype=np.int64)
        for metric in (EUCLIDEAN, MANHATTAN):
            k.knn_predict(x, y, x, 1, metric, 2)
            k.knn_topk(x, np.ascontiguousarray(x[0]), 2, metric)
        k.best_split(x, y, rows, np.arange(2, dtype=np.int64), 2, 1)
        k.tree_apply(
            np.array([0], dtype=np.int64),
            np.array([0.5]),
            np.array([1, -1, -1], dtype=np.int64),
            np.array([2, -1, -1], dtype=np.int64),
            x,
        )
        xc = np.ascontiguousarray(x)
        for kind in (LINEAR, POLY, SIGMOID):
            alpha, rho, _, _ = k.smo(xc, yf, 1.0, kind, 0.5, 0.0, 3, 1e-3, 100)
            k.svm_decision(xc, alpha * yf, rho, x, kind, 0.5, 0.0, 3)
            k.kernel_matrix(x, x, kind, 0.5, 0.0, 3)
