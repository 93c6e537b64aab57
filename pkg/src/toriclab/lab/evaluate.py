"""Monte-Carlo logical error rates."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..noise import NoiseSpec, sample_errors
from ..pipeline import DecodeConfig, adjudicate_batch, enhanced_mwpm_batch, iterative_decode_batch
from ..toric import LatticeGeometry
from .dataset import measured_syndromes

DECODERS = ("mwpm", "sunetqd", "enhanced_mwpm")
DEFAULT_P_GRID = tuple(round(0.01 + 0.02 * k, 2) for k in range(13))


@dataclass(frozen=True)
class LerPoint:
    p: float
    ler: float
    n: int

    @property
    def failures(self) -> int:
        return round(self.ler * self.n)

    @property
    def stderr(self) -> float:
        return math.sqrt(self.ler * (1.0 - self.ler) / self.n) if self.n else 0.0


@dataclass
class LerCurve:
    d: int
    decoder: str
    points: list = field(default_factory=list)

    def __post_init__(self):
        ps = [pt.p for pt in self.points]
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("LER curve p values must be strictly increasing")

    @property
    def p(self) -> np.ndarray:
        return np.array([pt.p for pt in self.points])

    @property
    def ler(self) -> np.ndarray:
        return np.array([pt.ler for pt in self.points])

    def rows(self):
        for pt in self.points:
            yield {"p": pt.p, "ler": pt.ler, "stderr": pt.stderr, "n": pt.n, "d": self.d,
                   "decoder": self.decoder}


@dataclass
class Decoders:
    """Models an evaluation needs; unused entries may stay None."""

    model_high_rate: object = None
    model_low_rate: object = None
    high_model: object = None
    n_max: int = 6
    threshold: float = 0.5
    mwpm_policy: str = "fail"


def _require(obj, name, decoder):
    if obj is None:
        raise ValueError(f"decoder {decoder!r} needs a {name}")


def count_failures(decoder: str, d: int, spec: NoiseSpec, seed: int, start: int, count: int,
                   models: Decoders) -> int:
    """Failures among samples ``start .. start+count-1`` of stream ``seed``."""
    errors = sample_errors(LatticeGeometry(d), spec, seed, start, count)
    syn = measured_syndromes(errors, spec, seed, start)
    if decoder == "mwpm":
        out = enhanced_mwpm_batch(syn, None, policy=models.mwpm_policy)
    elif decoder == "enhanced_mwpm":
        _require(models.high_model, "high-level model", decoder)
        high = models.high_model
        if hasattr(high, "bind"):  # ground-truth oracle: show it this chunk's errors
            high.bind(errors, syn)
        out = enhanced_mwpm_batch(syn, high, models.threshold, policy=models.mwpm_policy)
    elif decoder == "sunetqd":
        _require(models.model_high_rate, "low-level model", decoder)
        high = models.high_model
        if high is not None and hasattr(high, "bind"):
            high.bind(errors, syn)
        cfg = DecodeConfig(models.model_high_rate, models.model_low_rate or models.model_high_rate,
                           high, models.n_max, models.threshold)
        out = iterative_decode_batch(syn, cfg)
    else:
        raise ValueError(f"unknown decoder {decoder!r}; choose from {DECODERS}")
    ok = adjudicate_batch(errors, out.recovery, out.logical_errors, out.cleared)
    return int((~ok).sum())


def _count_task(args):
    return count_failures(*args)


def evaluate_ler(decoder: str, d: int, spec: NoiseSpec, p_grid, n: int, seed: int,
                 models: Decoders | None = None, chunk: int = 2000, workers: int = 1) -> LerCurve:
    """LER at every ``p`` of ``p_grid`` from ``n`` samples each.

    Every grid point reuses the same per-sample streams (common random numbers),
    so curves for different ``p`` and different decoders see coupled samples.
    ``workers > 1`` spreads chunks over processes; results do not depend on it.
    """
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}; choose from {DECODERS}")
    if n < 1:
        raise ValueError("need at least one sample per point")
    models = models or Decoders()
    grid = [float(p) for p in p_grid]
    tasks = [(decoder, d, spec.with_p(p), seed, s, min(chunk, n - s), models)
             for p in grid for s in range(0, n, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            counts = list(pool.map(_count_task, tasks))
    else:
        counts = [_count_task(t) for t in tasks]
    per_point = len(range(0, n, chunk))
    points = [LerPoint(p, sum(counts[i * per_point:(i + 1) * per_point]) / n, n) for i, p in enumerate(grid)]
    return LerCurve(d, decoder, points)


__all__ = ["DECODERS", "DEFAULT_P_GRID", "LerPoint", "LerCurve", "Decoders", "count_failures", "evaluate_ler"]
