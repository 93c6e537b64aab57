"""Threshold estimation from crossing LER curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoCrossing


@dataclass(frozen=True)
class ThresholdEstimate:
    p_c: float
    spread: float
    crossings: tuple  # ((d_small, d_large, p_cross), ...)


def crossing(p, ler_small, ler_large) -> float:
    """Where the smaller-distance curve stops beating the larger one.

    Works on ``log(LER)``, linearly interpolated between grid points.  Points
    where either LER is zero are skipped.  The first sign change of
    ``log LER_small - log LER_large`` from positive to non-positive is used.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(ler_small, dtype=float)
    b = np.asarray(ler_large, dtype=float)
    keep = (a > 0) & (b > 0)
    p, diff = p[keep], np.log(a[keep]) - np.log(b[keep])
    for i in range(len(p) - 1):
        if diff[i] > 0 and diff[i + 1] <= 0:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(p[i] + t * (p[i + 1] - p[i]))
    raise NoCrossing("curves do not cross inside the grid")


def estimate_threshold(curves) -> ThresholdEstimate:
    """Mean crossing over adjacent-distance pairs, with half the range as spread.

    ``curves`` maps ``d`` to a :class:`~toriclab.lab.evaluate.LerCurve` (or any
    object with ``p`` and ``ler`` arrays) sharing one p grid.
    """
    ds = sorted(curves)
    if len(ds) < 2:
        raise ValueError("need curves for at least two distances")
    found = []
    for small, large in zip(ds, ds[1:]):
        cs, cl = curves[small], curves[large]
        if not np.array_equal(np.asarray(cs.p), np.asarray(cl.p)):
            raise ValueError(f"d={small} and d={large} curves use different p grids")
        try:
            found.append((small, large, crossing(cs.p, cs.ler, cl.ler)))
        except NoCrossing:
            raise NoCrossing(f"no crossing between d={small} and d={large}") from None
    xs = np.array([c[2] for c in found])
    return ThresholdEstimate(float(xs.mean()), float((xs.max() - xs.min()) / 2), tuple(found))


__all__ = ["ThresholdEstimate", "crossing", "estimate_threshold"]
