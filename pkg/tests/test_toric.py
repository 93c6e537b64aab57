import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toriclab.errors import ContractViolation
from toriclab.toric import (
    LOGICAL_NAMES, LatticeGeometry, Pauli, PauliFrame, compose, extract_syndrome, logical_bits,
    logical_class, logical_representative, stabilizer_frame, syndrome_of_codes,
)

ds = st.sampled_from([3, 4, 5, 7])


@st.composite
def frames(draw, d=None):
    d = d or draw(ds)
    codes = draw(st.lists(st.integers(0, 3), min_size=2 * d * d, max_size=2 * d * d))
    return PauliFrame(np.array(codes, dtype=np.uint8).reshape(2, d, d))


def _slow_syndrome(geom, frame):
    """Syndrome from explicit stabilizer supports, one commutation at a time."""
    ops = frame.ops
    out = np.zeros((2, geom.d, geom.d), dtype=np.uint8)
    for r in range(geom.d):
        for c in range(geom.d):
            out[0, r, c] = sum(ops[q] & 1 for q in geom.plaquette_boundary(r, c)) % 2
            out[1, r, c] = sum(ops[q] >> 1 for q in geom.vertex_star(r, c)) % 2
    return out


# [TRIVIAL]
def test_geometry_rejects_small_distance():
    with pytest.raises(ValueError):
        LatticeGeometry(2)
    assert LatticeGeometry(3).n_qubits == 18


def test_qubit_index_round_trip():
    g = LatticeGeometry(5)
    for q in range(g.n_qubits):
        assert g.qubit_index(*g.qubit_coords(q)) == q
    with pytest.raises(ValueError):
        g.qubit_coords(g.n_qubits)


def test_pauli_parse_and_product():
    assert Pauli.parse("y") is Pauli.Y
    assert Pauli.parse(2) is Pauli.Z
    assert Pauli.X ^ Pauli.Z == Pauli.Y


def test_frame_validation():
    with pytest.raises(ValueError):
        PauliFrame(np.zeros((3, 3, 3)))
    with pytest.raises(ValueError):
        PauliFrame(np.full((2, 3, 3), 4))
    f = PauliFrame.identity(3)
    with pytest.raises(ValueError):
        f.codes[0, 0, 0] = 1


def test_single_error_flips_two_checks():
    g = LatticeGeometry(5)
    for q in range(g.n_qubits):
        for p, ch in ((Pauli.X, 0), (Pauli.Z, 1)):
            s = extract_syndrome(g, PauliFrame.from_ops(5, {q: p}))
            assert s[ch].sum() == 2 and s[1 - ch].sum() == 0
        assert extract_syndrome(g, PauliFrame.from_ops(5, {q: "Y"})).sum() == 4


def test_every_stabilizer_has_four_qubits_and_each_qubit_two_stabilizers():
    g = LatticeGeometry(4)
    counts = np.zeros(g.n_qubits, dtype=int)
    for r in range(4):
        for c in range(4):
            for kind in ("vertex", "plaquette"):
                sup = g.stabilizer_support(kind, r, c)
                assert len(sup) == 4
                counts[list(sup)] += 1
    assert (counts == 4).all()


# [DERIVED] vectorized syndrome against the explicit stabilizer-support oracle
@given(frames())
def test_syndrome_matches_support_oracle(frame):
    g = LatticeGeometry(frame.d)
    assert np.array_equal(extract_syndrome(g, frame), _slow_syndrome(g, frame))


@given(frames(d=5), frames(d=5))
def test_syndrome_is_linear(a, b):
    g = LatticeGeometry(5)
    lhs = extract_syndrome(g, compose(a, b))
    assert np.array_equal(lhs, extract_syndrome(g, a) ^ extract_syndrome(g, b))


@given(frames(d=4))
def test_defect_count_even_per_channel(frame):
    s = extract_syndrome(LatticeGeometry(4), frame)
    assert s[0].sum() % 2 == 0 and s[1].sum() % 2 == 0


@given(frames(), st.data())
def test_stabilizers_commute_and_keep_logical_class(frame, data):
    g = LatticeGeometry(frame.d)
    kind = data.draw(st.sampled_from(["vertex", "plaquette"]))
    r, c = data.draw(st.integers(0, g.d - 1)), data.draw(st.integers(0, g.d - 1))
    stab = stabilizer_frame(g, kind, r, c)
    assert not extract_syndrome(g, stab).any()
    assert not logical_bits(stab.codes).any()
    moved = compose(frame, stab)
    assert np.array_equal(extract_syndrome(g, moved), extract_syndrome(g, frame))
    assert np.array_equal(logical_bits(moved.codes), logical_bits(frame.codes))


@pytest.mark.parametrize("d", [3, 4, 6])
def test_logical_representatives(d):
    g = LatticeGeometry(d)
    for k, name in enumerate(LOGICAL_NAMES):
        rep = logical_representative(g, name)
        assert not extract_syndrome(g, rep).any()
        expected = np.zeros(4, dtype=np.uint8)
        expected[k] = 1
        assert np.array_equal(logical_class(g, rep), expected)
        assert rep.weight() == d
    with pytest.raises(ValueError):
        logical_representative(g, "Y1")


def test_logical_class_requires_zero_syndrome():
    g = LatticeGeometry(3)
    with pytest.raises(ContractViolation):
        logical_class(g, PauliFrame.from_ops(3, {0: "X"}))


# [DERIVED] logical bits from commutation with the conjugate representative
@given(frames(d=4))
def test_logical_bits_are_anticommutation_counts(frame):
    g = LatticeGeometry(4)
    conj = {"X1": "Z2", "X2": "Z1", "Z1": "X2", "Z2": "X1"}
    bits = logical_bits(frame.codes)
    for k, name in enumerate(LOGICAL_NAMES):
        other = logical_representative(g, conj[name]).codes
        a, b = frame.codes, other
        # symplectic product of two-bit Pauli codes
        anti = ((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1))
        assert bits[k] == anti.sum() % 2


def test_compose_checks_shapes_and_batches():
    a = np.ones((5, 2, 3, 3), dtype=np.uint8)
    assert compose(a, a).shape == (5, 2, 3, 3) and not compose(a, a).any()
    with pytest.raises(ValueError):
        compose(np.zeros((2, 3, 3)), np.zeros((2, 4, 4)))
    assert syndrome_of_codes(a).shape == (5, 2, 3, 3)


def test_frame_equality_and_hash():
    a = PauliFrame.from_ops(3, {1: "X", 4: "Z"})
    b = PauliFrame.from_ops(3, {4: 2, 1: 1})
    assert a == b and hash(a) == hash(b)
    assert a.compose(b) == PauliFrame.identity(3)
