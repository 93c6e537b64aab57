"""Labeled sample sets and their binary file format.

File layout, little-endian::

    b"TQEC"  u16 version  u16 d  u8 kind  u8 noise model  u8 measurement noise  u8 pad
    f64 p  f64 eta  u64 seed  u64 count
    count x record:
        packed syndrome bits   ceil(2 d^2 / 8) bytes, channel-major, LSB first
        recovery codes         ceil(2 d^2 / 4) bytes, four 2-bit codes per byte, LSB first
        logical bits           1 byte, X1 X2 Z1 Z2 in bits 0..3

``kind`` 0 holds low-level samples (label recovery for the syndrome), kind 1
high-level samples (a decoder's recovery and the logical class it leaves).
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError
from ..mwpm import mwpm_decode_batch
from ..noise import MEASUREMENT_STREAM, MODELS, NoiseSpec, flip_measurements, rng_stream, sample_errors
from ..pipeline import DecodeConfig, iterative_decode_batch, label_batch
from ..toric import LatticeGeometry, logical_bits, syndrome_of_codes

MAGIC = b"TQEC"
VERSION = 1
KINDS = ("low", "high")
_HEADER = struct.Struct("<4sHHBBBxddQQ")


@dataclass
class Dataset:
    d: int
    spec: NoiseSpec
    seed: int
    syndromes: np.ndarray  # (N, 2, d, d) uint8
    recoveries: np.ndarray  # (N, 2, d, d) uint8 codes
    logicals: np.ndarray  # (N, 4) uint8
    kind: str = "low"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"dataset kind must be one of {KINDS}")
        n = len(self.syndromes)
        shape = (n, 2, self.d, self.d)
        if self.syndromes.shape != shape or self.recoveries.shape != shape or self.logicals.shape != (n, 4):
            raise ValueError("dataset arrays do not share a consistent (N, d)")

    def __len__(self):
        return len(self.syndromes)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.d, self.spec, self.seed, self.syndromes[idx], self.recoveries[idx],
                       self.logicals[idx], self.kind)

    def __eq__(self, other):
        return (isinstance(other, Dataset) and self.d == other.d and self.spec == other.spec
                and self.seed == other.seed and self.kind == other.kind
                and np.array_equal(self.syndromes, other.syndromes)
                and np.array_equal(self.recoveries, other.recoveries)
                and np.array_equal(self.logicals, other.logicals))


# -- generation ---------------------------------------------------------------------------
def measured_syndromes(errors, spec: NoiseSpec, seed: int, start: int) -> np.ndarray:
    """True syndromes of ``errors``, with per-sample measurement flips when enabled."""
    syn = syndrome_of_codes(errors)
    if spec.measurement_noise:
        for k in range(len(syn)):
            syn[k] = flip_measurements(syn[k], spec, rng_stream(seed, start + k, MEASUREMENT_STREAM))
    return syn


def generate_dataset(d: int, spec: NoiseSpec, n: int, seed: int, kind: str = "low",
                     low_model=None, strict: bool = True, chunk: int = 4096) -> Dataset:
    """``n`` iid labeled samples, sample ``i`` drawn from stream ``(seed, i)``.

    Low-level samples carry the training label of :func:`label_batch`.  High-level
    samples carry the recovery of ``low_model`` run through the iterative loop
    (MWPM when ``low_model`` is None) and the logical class of
    ``error * recovery``.
    """
    if n < 1:
        raise ValueError("dataset size must be at least 1")
    if kind not in KINDS:
        raise ValueError(f"dataset kind must be one of {KINDS}")
    geom = LatticeGeometry(d)
    syns, recs, logs = [], [], []
    for start in range(0, n, chunk):
        count = min(chunk, n - start)
        errors = sample_errors(geom, spec, seed, start, count)
        syn = measured_syndromes(errors, spec, seed, start)
        if kind == "low":
            rec, log = label_batch(errors, strict=strict)
        else:
            if low_model is None:
                rec, _ = mwpm_decode_batch(syn, policy="leave")
            else:
                rec = iterative_decode_batch(syn, DecodeConfig(low_model, low_model)).recovery
            log = logical_bits(errors ^ rec)
        syns.append(syn)
        recs.append(rec)
        logs.append(log)
    return Dataset(d, spec, seed, np.concatenate(syns), np.concatenate(recs), np.concatenate(logs), kind)


# -- file format ---------------------------------------------------------------------------
def _record_sizes(d: int):
    bits = 2 * d * d
    return (bits + 7) // 8, (bits + 3) // 4


def _pack_codes(codes: np.ndarray) -> np.ndarray:
    """``(N, M)`` 2-bit codes -> ``(N, ceil(M/4))`` bytes."""
    n, m = codes.shape
    padded = np.zeros((n, -(-m // 4) * 4), dtype=np.uint8)
    padded[:, :m] = codes
    q = padded.reshape(n, padded.shape[1] // 4, 4)
    return q[..., 0] | (q[..., 1] << 2) | (q[..., 2] << 4) | (q[..., 3] << 6)


def _unpack_codes(packed: np.ndarray, m: int) -> np.ndarray:
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    codes = (packed[..., None] >> shifts) & 3
    return codes.reshape(len(packed), packed.shape[1] * 4)[:, :m]


def dumps(ds: Dataset) -> bytes:
    d, n = ds.d, len(ds)
    head = _HEADER.pack(MAGIC, VERSION, d, KINDS.index(ds.kind), MODELS.index(ds.spec.model),
                        int(ds.spec.measurement_noise), ds.spec.p, ds.spec.eta, ds.seed, n)
    bits = 2 * d * d
    syn = np.packbits(ds.syndromes.reshape(n, bits), axis=1, bitorder="little")
    rec = _pack_codes(ds.recoveries.reshape(n, bits))
    log = np.packbits(ds.logicals, axis=1, bitorder="little")
    body = np.concatenate([syn, rec, log], axis=1)
    return head + body.tobytes()


def loads(blob: bytes) -> Dataset:
    if len(blob) < _HEADER.size:
        raise FormatError("dataset file truncated inside the header")
    magic, version, d, kind, model, meas, p, eta, seed, n = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError("not a dataset file (bad magic)")
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    if kind >= len(KINDS) or model >= len(MODELS) or meas > 1:
        raise FormatError("corrupt dataset header")
    sb, rb = _record_sizes(d)
    width = sb + rb + 1
    body = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if body.size != n * width:
        raise FormatError(f"dataset body holds {body.size} bytes, header promises {n} x {width}")
    body = body.reshape(n, width)
    bits = 2 * d * d
    syn = np.unpackbits(body[:, :sb], axis=1, count=bits, bitorder="little").reshape(n, 2, d, d)
    rec = _unpack_codes(body[:, sb:sb + rb], bits).reshape(n, 2, d, d)
    log = np.unpackbits(body[:, sb + rb:], axis=1, count=4, bitorder="little")
    spec = NoiseSpec(p, eta, bool(meas), MODELS[model])
    return Dataset(d, spec, seed, syn, rec.astype(np.uint8), log, KINDS[kind])


def save_dataset(ds: Dataset, path):
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(dumps(ds))
    os.replace(tmp, path)


def load_dataset(path) -> Dataset:
    with open(os.fspath(path), "rb") as fh:
        return loads(fh.read())


__all__ = ["Dataset", "generate_dataset", "measured_syndromes", "dumps", "loads", "save_dataset",
           "load_dataset", "MAGIC", "VERSION", "KINDS"]
