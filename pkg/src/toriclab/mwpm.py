"""Minimum-weight perfect matching decoder for the toric code.

Each syndrome channel is decoded on its own: plaquette defects (channel 0) are
paired and joined by X chains on the dual lattice, vertex defects (channel 1)
by Z chains on the primal lattice.  Overlapping X and Z corrections compose to
Y.  Edge weights are unit (toric Manhattan distance).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DecodeFailure, OddParity
from .matching import min_weight_perfect_matching
from .toric import PLAQUETTE, VERTEX, Pauli

ODD_PARITY_POLICIES = ("fail", "leave")


@dataclass(frozen=True)
class DefectSet:
    channel: int
    coords: tuple

    def __post_init__(self):
        coords = tuple((int(r), int(c)) for r, c in self.coords)
        if len(set(coords)) != len(coords):
            raise ValueError("defect coordinates must be distinct")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_syndrome(cls, syndrome, channel: int) -> "DefectSet":
        rows, cols = np.nonzero(np.asarray(syndrome)[channel])
        return cls(channel, tuple(zip(rows.tolist(), cols.tolist())))

    def __len__(self):
        return len(self.coords)


@dataclass(frozen=True)
class Matching:
    pairs: list = field(default_factory=list)
    total_weight: int = 0


def toric_distance(a, b, d: int) -> int:
    """Manhattan distance on a ``d x d`` torus."""
    dr = abs(a[0] - b[0]) % d
    dc = abs(a[1] - b[1]) % d
    return min(dr, d - dr) + min(dc, d - dc)


def distance_matrix(coords, d: int) -> np.ndarray:
    pts = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
    delta = np.abs(pts[:, None, :] - pts[None, :, :]) % d
    return np.minimum(delta, d - delta).sum(axis=-1)


def min_weight_matching(defects, d: int, backend: str | None = None) -> Matching:
    """Pair up defects with minimum total toric distance.

    ``defects`` is a :class:`DefectSet` or a sequence of ``(r, c)``.  Pairs are
    returned as ``(a, b)`` with ``a`` earlier in the input order, sorted by the
    index of ``a``.  Raises :class:`OddParity` for an odd number of defects.
    """
    coords = defects.coords if isinstance(defects, DefectSet) else tuple(map(tuple, defects))
    n = len(coords)
    if n % 2:
        raise OddParity(f"{n} defects cannot be perfectly matched")
    if n == 0:
        return Matching([], 0)
    w = distance_matrix(coords, d)
    idx_pairs = min_weight_perfect_matching(w, backend=backend)
    pairs = [(coords[i], coords[j]) for i, j in idx_pairs]
    return Matching(pairs, int(sum(w[i, j] for i, j in idx_pairs)))


def _steps(start: int, stop: int, d: int) -> tuple[int, int]:
    """(direction, count) of the shorter arc from ``start`` to ``stop``; ties go +1."""
    fwd = (stop - start) % d
    back = d - fwd if fwd else 0
    if fwd <= back:
        return 1, fwd
    return -1, back


def _path_qubits(a, b, channel: int, d: int):
    """Qubits ``(s, r, c)`` on the row-first shortest path from defect ``a`` to ``b``."""
    r, c = a
    qubits = []
    step, count = _steps(a[0], b[0], d)
    for _ in range(count):
        if channel == PLAQUETTE:
            qubits.append((0, r, c) if step == 1 else (0, (r - 1) % d, c))
        else:
            qubits.append((1, (r + 1) % d, c) if step == 1 else (1, r, c))
        r = (r + step) % d
    step, count = _steps(a[1], b[1], d)
    for _ in range(count):
        if channel == PLAQUETTE:
            qubits.append((1, (r + 1) % d, (c + 1) % d) if step == 1 else (1, (r + 1) % d, c))
        else:
            qubits.append((0, (r - 1) % d, c) if step == 1 else (0, (r - 1) % d, (c - 1) % d))
        c = (c + step) % d
    return qubits


def path_recovery(pair, channel: int, d: int) -> np.ndarray:
    """Correction chain for one defect pair as a ``(2, d, d)`` recovery tensor.

    Channel-0 (plaquette) pairs get X chains, channel-1 (vertex) pairs Z chains.
    The path moves along rows first, then columns, each the shorter way round.
    """
    pauli = Pauli.X if channel == PLAQUETTE else Pauli.Z
    rec = np.zeros((2, d, d), dtype=np.uint8)
    for q in _path_qubits(pair[0], pair[1], channel, d):
        rec[q] ^= pauli
    return rec


def _decode_channel(rec, syndrome, channel, d, policy, backend):
    coords = list(zip(*np.nonzero(syndrome[channel])))
    coords = [(int(r), int(c)) for r, c in coords]
    if len(coords) % 2:
        if policy == "fail":
            raise OddParity(f"channel {channel} has {len(coords)} defects")
        # Leave exactly one defect unmatched: a virtual vertex at zero distance to all.
        n = len(coords)
        w = np.zeros((n + 1, n + 1), dtype=np.int64)
        w[:n, :n] = distance_matrix(coords, d)
        pairs = [(coords[i], coords[j]) for i, j in min_weight_perfect_matching(w, backend) if j < n]
    else:
        pairs = min_weight_matching(coords, d, backend).pairs
    pauli = Pauli.X if channel == PLAQUETTE else Pauli.Z
    for a, b in pairs:
        for q in _path_qubits(a, b, channel, d):
            rec[q] ^= pauli


def mwpm_decode(syndrome, d: int | None = None, policy: str = "fail", backend: str | None = None) -> np.ndarray:
    """Recovery tensor for a ``(2, d, d)`` syndrome.

    With ``policy='fail'`` an odd-parity channel raises :class:`DecodeFailure`;
    with ``policy='leave'`` one defect per odd channel stays unmatched.
    """
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    d = syndrome.shape[-1] if d is None else d
    if syndrome.shape != (2, d, d):
        raise ValueError(f"syndrome shape {syndrome.shape} does not match d={d}")
    if policy not in ODD_PARITY_POLICIES:
        raise ValueError(f"policy must be one of {ODD_PARITY_POLICIES}")
    rec = np.zeros((2, d, d), dtype=np.uint8)
    try:
        for channel in (PLAQUETTE, VERTEX):
            _decode_channel(rec, syndrome, channel, d, policy, backend)
    except OddParity as exc:
        raise DecodeFailure(str(exc)) from exc
    return rec


def mwpm_decode_batch(syndromes, policy: str = "fail", backend: str | None = None):
    """Decode a ``(N, 2, d, d)`` batch.

    Returns ``(recoveries, ok)``; ``ok[k]`` is False where decoding failed under
    the odd-parity policy (that recovery is left as identity).
    """
    syndromes = np.asarray(syndromes, dtype=np.uint8)
    recs = np.zeros_like(syndromes)
    ok = np.ones(len(syndromes), dtype=bool)
    for k, s in enumerate(syndromes):
        if not s.any():
            continue
        try:
            recs[k] = mwpm_decode(s, policy=policy, backend=backend)
        except DecodeFailure:
            ok[k] = False
    return recs, ok


__all__ = [
    "DefectSet",
    "Matching",
    "toric_distance",
    "min_weight_matching",
    "path_recovery",
    "mwpm_decode",
    "mwpm_decode_batch",
]
