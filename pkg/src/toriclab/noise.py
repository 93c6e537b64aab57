"""Biased Pauli noise, measurement flips and deterministic per-sample random streams."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .toric import PauliFrame, _geometry

# Stream tags keep the error, measurement, augmentation and init draws of one
# sample index statistically independent.
ERROR_STREAM = 0
MEASUREMENT_STREAM = 1
AUGMENT_STREAM = 2
INIT_STREAM = 3
SHUFFLE_STREAM = 4

MODELS = ("biased", "bitflip", "phaseflip")


def rng_stream(seed: int, index: int = 0, tag: int = ERROR_STREAM) -> np.random.Generator:
    """Counter-style generator identified by ``(seed, tag, index)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(tag), int(index))))


@dataclass(frozen=True)
class NoiseSpec:
    """Independent single-qubit Pauli channel plus optional measurement flips.

    ``model='biased'`` uses ``p_x = p_z = p / (2(eta+1))`` and ``p_y = eta/(eta+1) p``;
    ``eta=0.5`` is depolarizing and ``eta=inf`` pure Y (bit-phase-flip).
    ``'bitflip'`` and ``'phaseflip'`` put all of ``p`` on X or Z.
    """

    p: float
    eta: float = 0.5
    measurement_noise: bool = False
    model: str = "biased"

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"physical error rate must lie in [0, 1), got {self.p}")
        if self.model not in MODELS:
            raise ValueError(f"noise model must be one of {MODELS}, got {self.model!r}")
        if self.model == "biased" and not self.eta > 0:
            raise ValueError(f"bias eta must be > 0, got {self.eta}")

    @property
    def p_m(self) -> float:
        return self.p if self.measurement_noise else 0.0

    def with_p(self, p: float) -> "NoiseSpec":
        return NoiseSpec(p, self.eta, self.measurement_noise, self.model)

    @classmethod
    def preset(cls, name: str, p: float, eta: float | None = None, measurement_noise: bool = False):
        """Named noise families used by the CLI."""
        name = name.replace("_", "-").lower()
        if name == "bitflip":
            return cls(p, math.inf, measurement_noise, "bitflip")
        if name == "phaseflip":
            return cls(p, 0.5, measurement_noise, "phaseflip")
        if name == "depolarizing":
            return cls(p, 0.5, measurement_noise)
        if name in ("bitphaseflip", "bit-phase-flip"):
            return cls(p, math.inf, measurement_noise)
        if name == "biased":
            if eta is None:
                raise ValueError("biased noise needs an eta value")
            return cls(p, eta, measurement_noise)
        raise ValueError(f"unknown noise preset {name!r}")

    def to_config(self) -> dict:
        return {
            "p": self.p,
            "eta": "inf" if math.isinf(self.eta) else self.eta,
            "measurement_noise": self.measurement_noise,
            "model": self.model,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "NoiseSpec":
        return cls(
            p=float(cfg["p"]),
            eta=parse_eta(cfg.get("eta", 0.5)),
            measurement_noise=_parse_bool(cfg.get("measurement_noise", False)),
            model=str(cfg.get("model", "biased")),
        )


def parse_eta(value) -> float:
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    return float(value)


def _parse_bool(value) -> bool:
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return bool(value)


def channel_probs(spec: NoiseSpec) -> tuple[float, float, float]:
    """Return ``(p_x, p_y, p_z)``."""
    p = spec.p
    if spec.model == "bitflip":
        return (p, 0.0, 0.0)
    if spec.model == "phaseflip":
        return (0.0, 0.0, p)
    eta = spec.eta
    if math.isinf(eta):
        return (0.0, p, 0.0)
    p_xz = p / (2.0 * (eta + 1.0))
    return (p_xz, eta / (eta + 1.0) * p, p_xz)


def _codes_from_uniform(u: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    p_x, p_y, p_z = channel_probs(spec)
    codes = np.zeros(u.shape, dtype=np.uint8)
    codes[u < p_x + p_y + p_z] = 2  # Z
    codes[u < p_x + p_y] = 3  # Y
    codes[u < p_x] = 1  # X
    return codes


def sample_error(geometry, spec: NoiseSpec, rng: np.random.Generator) -> PauliFrame:
    """IID Pauli error on every qubit, drawn from ``rng``."""
    geom = _geometry(geometry)
    return PauliFrame(_codes_from_uniform(rng.random(geom.shape), spec))


def sample_errors(geometry, spec: NoiseSpec, seed: int, start: int, count: int) -> np.ndarray:
    """Errors for sample indices ``start .. start+count-1`` as a ``(count, 2, d, d)`` array.

    Sample ``i`` is bit-identical to ``sample_error(g, spec, rng_stream(seed, i))``.
    """
    geom = _geometry(geometry)
    u = np.empty((count,) + geom.shape)
    for k in range(count):
        u[k] = rng_stream(seed, start + k, ERROR_STREAM).random(geom.shape)
    return _codes_from_uniform(u, spec)


def flip_measurements(syndrome: np.ndarray, spec: NoiseSpec, rng: np.random.Generator,
                      p_m: float | None = None) -> np.ndarray:
    """Flip each syndrome bit independently with probability ``p_m`` (single round).

    ``p_m`` defaults to ``spec.p_m``; passing it explicitly allows the ``p_m = 1`` edge case.
    """
    if not spec.measurement_noise:
        raise ContractViolation("flip_measurements called with measurement noise disabled")
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    prob = spec.p_m if p_m is None else p_m
    flips = rng.random(syndrome.shape) < prob
    return syndrome ^ flips.astype(np.uint8)


def flip_measurements_batch(syndromes: np.ndarray, spec: NoiseSpec, seed: int, start: int) -> np.ndarray:
    """Per-sample-stream version of :func:`flip_measurements` for a batch."""
    out = np.empty_like(syndromes, dtype=np.uint8)
    for k in range(len(syndromes)):
        out[k] = flip_measurements(syndromes[k], spec, rng_stream(seed, start + k, MEASUREMENT_STREAM))
    return out


__all__ = [
    "NoiseSpec",
    "channel_probs",
    "sample_error",
    "sample_errors",
    "flip_measurements",
    "flip_measurements_batch",
    "rng_stream",
    "parse_eta",
]
