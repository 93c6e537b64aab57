"""Tensor encodings of syndromes/recoveries, cyclic shifts and circular padding."""
from __future__ import annotations

import numpy as np

from .noise import AUGMENT_STREAM, rng_stream
from .toric import PauliFrame

# Recovery codes share the Pauli encoding of toric.Pauli: 0=I, 1=X, 2=Z, 3=Y.
RECOVERY_CLASSES = ("I", "X", "Z", "Y")

AUGMENT_PROBABILITY = 0.5


def frame_to_recovery(frame: PauliFrame) -> np.ndarray:
    return np.array(frame.codes, dtype=np.uint8)


def recovery_to_frame(rec) -> PauliFrame:
    rec = np.asarray(rec)
    if rec.size and (rec.min() < 0 or rec.max() > 3):
        raise ValueError("recovery codes must lie in {0, 1, 2, 3}")
    return PauliFrame(rec.astype(np.uint8))


def cyclic_shift(tensor, dr: int, dc: int) -> np.ndarray:
    """Roll the last two axes so that ``out[..., r+dr, c+dc] = in[..., r, c]`` (mod d)."""
    return np.roll(np.asarray(tensor), (int(dr), int(dc)), axis=(-2, -1))


def shift_frame(frame: PauliFrame, dr: int, dc: int) -> PauliFrame:
    """Translate a Pauli frame on the torus (a lattice symmetry for this qubit layout)."""
    return PauliFrame(cyclic_shift(frame.codes, dr, dc))


def circular_pad(tensor, k: int) -> np.ndarray:
    """Wrap-around padding of width ``k`` on the last two axes."""
    if k < 0:
        raise ValueError("pad width must be non-negative")
    tensor = np.asarray(tensor)
    if k == 0:
        return tensor.copy()
    widths = [(0, 0)] * (tensor.ndim - 2) + [(k, k), (k, k)]
    return np.pad(tensor, widths, mode="wrap")


def draw_shift(d: int, rng: np.random.Generator, probability: float = AUGMENT_PROBABILITY) -> tuple[int, int]:
    """A shift in ``{-d//2 .. d//2}^2`` with the given probability, else ``(0, 0)``."""
    half = d // 2
    if rng.random() >= probability:
        return (0, 0)
    dr, dc = rng.integers(-half, half + 1, size=2)
    return int(dr), int(dc)


def augment(sample, rng: np.random.Generator, probability: float = AUGMENT_PROBABILITY):
    """Apply one random toroidal shift to syndrome and recovery; the logical label is kept."""
    syndrome, recovery, logical = sample
    d = np.shape(syndrome)[-1]
    dr, dc = draw_shift(d, rng, probability)
    if (dr, dc) == (0, 0):
        return syndrome, recovery, logical
    return cyclic_shift(syndrome, dr, dc), cyclic_shift(recovery, dr, dc), logical


def augment_batch(syndromes, recoveries, seed: int, indices, epoch: int = 0,
                  probability: float = AUGMENT_PROBABILITY):
    """Augment a training batch with one independent stream per (epoch, sample index)."""
    syndromes = np.array(syndromes, copy=True)
    recoveries = np.array(recoveries, copy=True)
    d = syndromes.shape[-1]
    for k, idx in enumerate(indices):
        rng = rng_stream(seed, int(idx) + (int(epoch) << 32), AUGMENT_STREAM)
        dr, dc = draw_shift(d, rng, probability)
        if (dr, dc) != (0, 0):
            syndromes[k] = cyclic_shift(syndromes[k], dr, dc)
            recoveries[k] = cyclic_shift(recoveries[k], dr, dc)
    return syndromes, recoveries
