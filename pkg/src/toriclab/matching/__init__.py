"""Minimum-weight perfect matching backends.

The compiled ``_cblossom`` extension is used when it was built; otherwise, or
when ``TORICLAB_PURE_PYTHON=1`` is set, the pure-Python implementation is used.
Both return identical matchings.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pyblossom
from .brute import brute_force_min_weight

try:
    if os.environ.get("TORICLAB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend forced")
    from . import _cblossom
except ImportError:  # pragma: no cover - depends on the build
    _cblossom = None

BACKEND = "cython" if _cblossom is not None else "python"


def min_weight_perfect_matching(weights, backend: str | None = None) -> list[tuple[int, int]]:
    """Optimal pairs ``(i, j)``, ``i < j``, for a symmetric integer weight matrix."""
    backend = backend or BACKEND
    if backend == "cython":
        if _cblossom is None:
            raise RuntimeError("compiled matching backend is not available")
        w = np.ascontiguousarray(weights, dtype=np.int64)
        return _cblossom.min_weight_perfect_matching(w)
    if backend == "python":
        return _pyblossom.min_weight_perfect_matching(np.asarray(weights).tolist())
    raise ValueError(f"unknown backend {backend!r}")


def matching_weight(weights, pairs) -> int:
    return int(sum(weights[i][j] for i, j in pairs))


__all__ = ["BACKEND", "min_weight_perfect_matching", "brute_force_min_weight", "matching_weight"]
