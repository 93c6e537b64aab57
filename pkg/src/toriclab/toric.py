"""Toric-code geometry, Pauli frames, syndromes and logical classes.

Layout conventions (every other module imports these rather than redefining them):

* Qubits live in a ``(2, d, d)`` array indexed ``(s, r, c)`` with flat index
  ``s*d*d + r*d + c``.  Sublattice ``s=0`` holds the horizontal primal edges
  ("data qubits in each column" of the recovery tensor, channel 0) and ``s=1``
  the vertical primal edges (channel 1).
* An X on qubit ``(0, r, c)`` flips plaquettes ``(r, c)`` and ``(r+1, c)``; an X on
  ``(1, r, c)`` flips plaquettes ``(r-1, c-1)`` and ``(r-1, c)``.
* A Z on qubit ``(1, r, c)`` flips vertices ``(r-1, c)`` and ``(r, c)``; a Z on
  ``(0, r, c)`` flips vertices ``(r+1, c)`` and ``(r+1, c+1)``.
* Syndrome channel 0 holds plaquette (B_p, Z-type) outcomes and channel 1 vertex
  (A_v, X-type) outcomes.
* Pauli codes are two bits: bit 0 = X component, bit 1 = Z component, so
  ``I, X, Z, Y = 0, 1, 2, 3`` and the phase-free Pauli product is bitwise XOR.

All coordinate arithmetic is modulo ``d``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

PLAQUETTE = 0
VERTEX = 1

# Order of the four logical bits everywhere in the package.
LOGICAL_NAMES = ("X1", "X2", "Z1", "Z2")


class Pauli(enum.IntEnum):
    I = 0
    X = 1
    Z = 2
    Y = 3

    @classmethod
    def parse(cls, value) -> "Pauli":
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


@dataclass(frozen=True)
class LatticeGeometry:
    """A distance-``d`` toric lattice with ``2*d*d`` edge qubits."""

    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ValueError(f"code distance must be an integer >= 3, got {self.d!r}")

    @property
    def n_qubits(self) -> int:
        return 2 * self.d * self.d

    @property
    def shape(self) -> tuple[int, int, int]:
        return (2, self.d, self.d)

    def qubit_index(self, s: int, r: int, c: int) -> int:
        d = self.d
        return s * d * d + (r % d) * d + (c % d)

    def qubit_coords(self, q: int) -> tuple[int, int, int]:
        d = self.d
        if not 0 <= q < self.n_qubits:
            raise ValueError(f"qubit index {q} out of range for d={d}")
        s, rest = divmod(q, d * d)
        r, c = divmod(rest, d)
        return s, r, c

    def _check_coord(self, r, c):
        if not (0 <= r < self.d and 0 <= c < self.d):
            raise ValueError(f"coordinate ({r}, {c}) out of range for d={self.d}")

    def plaquette_boundary(self, r: int, c: int) -> frozenset[int]:
        self._check_coord(r, c)
        q = self.qubit_index
        return frozenset((q(0, r, c), q(0, r - 1, c), q(1, r + 1, c), q(1, r + 1, c + 1)))

    def vertex_star(self, r: int, c: int) -> frozenset[int]:
        self._check_coord(r, c)
        q = self.qubit_index
        return frozenset((q(1, r, c), q(1, r + 1, c), q(0, r - 1, c), q(0, r - 1, c - 1)))

    def stabilizer_support(self, kind: str, r: int, c: int) -> frozenset[int]:
        """Qubits acted on by the vertex (A_v) or plaquette (B_p) stabilizer at ``(r, c)``."""
        if kind == "vertex":
            return self.vertex_star(r, c)
        if kind == "plaquette":
            return self.plaquette_boundary(r, c)
        raise ValueError(f"kind must be 'vertex' or 'plaquette', got {kind!r}")


def _geometry(d_or_geometry) -> LatticeGeometry:
    if isinstance(d_or_geometry, LatticeGeometry):
        return d_or_geometry
    return LatticeGeometry(int(d_or_geometry))


@dataclass(frozen=True, eq=False)
class PauliFrame:
    """Phase-free Pauli operator on every qubit of a toric lattice.

    ``codes`` is a read-only ``uint8`` array of shape ``(2, d, d)`` holding
    :class:`Pauli` codes.
    """

    codes: np.ndarray

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.uint8)
        if codes.ndim != 3 or codes.shape[0] != 2 or codes.shape[1] != codes.shape[2]:
            raise ValueError(f"frame codes must have shape (2, d, d), got {codes.shape}")
        if codes.max(initial=0) > 3:
            raise ValueError("Pauli codes must lie in {0, 1, 2, 3}")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def d(self) -> int:
        return self.codes.shape[1]

    @classmethod
    def identity(cls, d: int) -> "PauliFrame":
        return cls(np.zeros((2, d, d), dtype=np.uint8))

    @classmethod
    def from_ops(cls, d: int, ops: dict) -> "PauliFrame":
        """Build a frame from ``{qubit_index: pauli}``; paulis may be names or codes."""
        geom = _geometry(d)
        codes = np.zeros(geom.shape, dtype=np.uint8)
        for q, p in ops.items():
            codes[geom.qubit_coords(q)] ^= Pauli.parse(p)
        return cls(codes)

    @property
    def ops(self) -> list[Pauli]:
        """Pauli per flat qubit index."""
        return [Pauli(int(v)) for v in self.codes.ravel()]

    def weight(self) -> int:
        return int(np.count_nonzero(self.codes))

    def compose(self, other: "PauliFrame") -> "PauliFrame":
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, PauliFrame):
            return NotImplemented
        return self.codes.shape == other.codes.shape and bool(np.array_equal(self.codes, other.codes))

    def __hash__(self):
        return hash(self.codes.tobytes())

    def __repr__(self):
        return f"PauliFrame(d={self.d}, weight={self.weight()})"


def _codes(frame) -> np.ndarray:
    return frame.codes if isinstance(frame, PauliFrame) else np.asarray(frame)


def compose(frame_a, frame_b):
    """Phase-free Pauli product.  Works on frames or on code arrays of any batch shape."""
    a, b = _codes(frame_a), _codes(frame_b)
    if a.shape[-3:] != b.shape[-3:]:
        raise ValueError(f"geometry mismatch: {a.shape[-3:]} vs {b.shape[-3:]}")
    out = np.bitwise_xor(a.astype(np.uint8), b.astype(np.uint8))
    if isinstance(frame_a, PauliFrame) and isinstance(frame_b, PauliFrame):
        return PauliFrame(out)
    return out


def _roll(a, shift, axis):
    return np.roll(a, shift, axis=axis)


def syndrome_of_codes(codes: np.ndarray) -> np.ndarray:
    """Syndrome of a batch of code arrays shaped ``(..., 2, d, d)``."""
    codes = np.asarray(codes, dtype=np.uint8)
    x = codes & 1
    z = codes >> 1
    x0, x1 = x[..., 0, :, :], x[..., 1, :, :]
    z0, z1 = z[..., 0, :, :], z[..., 1, :, :]
    r, c = -2, -1
    plaq = x0 ^ _roll(x0, 1, r) ^ _roll(x1, -1, r) ^ _roll(x1, (-1, -1), (r, c))
    vert = z1 ^ _roll(z1, -1, r) ^ _roll(z0, 1, r) ^ _roll(z0, (1, 1), (r, c))
    return np.stack([plaq, vert], axis=-3)


def extract_syndrome(geometry, frame) -> np.ndarray:
    """Noiseless stabilizer outcomes of ``frame`` as a ``(2, d, d)`` binary array.

    Channel 0 entry ``(r, c)`` is the parity of X/Y operators on the boundary of
    plaquette ``(r, c)``; channel 1 is the parity of Z/Y operators on the star of
    vertex ``(r, c)``.  Batched code arrays ``(..., 2, d, d)`` are accepted.
    """
    geom = _geometry(geometry)
    codes = _codes(frame)
    if codes.shape[-3:] != geom.shape:
        raise ValueError(f"frame shape {codes.shape[-3:]} does not match d={geom.d}")
    return syndrome_of_codes(codes)


def logical_bits(codes: np.ndarray) -> np.ndarray:
    """Logical bits ``(X1, X2, Z1, Z2)`` of code arrays, without the syndrome check.

    Each bit counts anticommutations with the conjugate representative: X1 is read
    on the support of Z2 (sublattice 0, row 0), X2 on Z1 (sublattice 1, column 0),
    Z1 on X2 (sublattice 1, row 0) and Z2 on X1 (sublattice 0, column 0).
    """
    codes = np.asarray(codes, dtype=np.uint8)
    x = codes & 1
    z = codes >> 1
    bits = [
        x[..., 0, 0, :].sum(axis=-1),
        x[..., 1, :, 0].sum(axis=-1),
        z[..., 1, 0, :].sum(axis=-1),
        z[..., 0, :, 0].sum(axis=-1),
    ]
    return (np.stack(bits, axis=-1) & 1).astype(np.uint8)


def logical_class(geometry, frame) -> np.ndarray:
    """Logical operator ``(X1, X2, Z1, Z2)`` implemented by a zero-syndrome frame.

    Raises :class:`ContractViolation` if the frame has a nonzero syndrome.
    """
    geom = _geometry(geometry)
    codes = _codes(frame)
    if extract_syndrome(geom, codes).any():
        raise ContractViolation("logical_class requires a frame with zero syndrome")
    return logical_bits(codes)


def logical_representative(geometry, name: str) -> PauliFrame:
    """Canonical straight-loop representative of ``X1``, ``X2``, ``Z1`` or ``Z2``."""
    geom = _geometry(geometry)
    codes = np.zeros(geom.shape, dtype=np.uint8)
    if name == "X1":
        codes[0, :, 0] = Pauli.X
    elif name == "X2":
        codes[1, 0, :] = Pauli.X
    elif name == "Z1":
        codes[1, :, 0] = Pauli.Z
    elif name == "Z2":
        codes[0, 0, :] = Pauli.Z
    else:
        raise ValueError(f"unknown logical operator {name!r}")
    return PauliFrame(codes)


def stabilizer_frame(geometry, kind: str, r: int, c: int) -> PauliFrame:
    """The stabilizer generator A_v (``kind='vertex'``, X-type) or B_p (Z-type) as a frame."""
    geom = _geometry(geometry)
    pauli = Pauli.X if kind == "vertex" else Pauli.Z
    return PauliFrame.from_ops(geom.d, {q: pauli for q in geom.stabilizer_support(kind, r, c)})
