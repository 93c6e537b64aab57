import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toriclab.errors import DecodeFailure, OddParity
from toriclab.matching import BACKEND, brute_force_min_weight
from toriclab.mwpm import (
    DefectSet, distance_matrix, min_weight_matching, mwpm_decode, mwpm_decode_batch, path_recovery,
    toric_distance,
)
from toriclab.noise import NoiseSpec, sample_errors
from toriclab.toric import LatticeGeometry, logical_bits, syndrome_of_codes


@st.composite
def defect_sets(draw, d=None, even=True):
    d = d or draw(st.sampled_from([3, 5, 7]))
    cells = draw(st.sets(st.tuples(st.integers(0, d - 1), st.integers(0, d - 1)), max_size=10))
    cells = sorted(cells)
    if even and len(cells) % 2:
        cells = cells[:-1]
    return d, cells


# [TRIVIAL]
def test_toric_distance_wraps():
    assert toric_distance((0, 0), (4, 4), 5) == 2
    assert toric_distance((1, 2), (1, 2), 5) == 0
    assert toric_distance((0, 0), (2, 3), 6) == 5


def test_defect_set():
    with pytest.raises(ValueError):
        DefectSet(0, ((1, 1), (1, 1)))
    syn = np.zeros((2, 3, 3), np.uint8)
    syn[1, 0, 2] = syn[1, 2, 2] = 1
    assert DefectSet.from_syndrome(syn, 1).coords == ((0, 2), (2, 2))


def test_odd_parity_raises():
    with pytest.raises(OddParity):
        min_weight_matching([(0, 0)], 3)
    syn = np.zeros((2, 3, 3), np.uint8)
    syn[0, 0, 0] = 1
    with pytest.raises(DecodeFailure):
        mwpm_decode(syn)
    rec = mwpm_decode(syn, policy="leave")
    assert not rec.any()
    with pytest.raises(ValueError):
        mwpm_decode(syn, policy="guess")


def test_leave_policy_matches_the_rest():
    syn = np.zeros((2, 5, 5), np.uint8)
    syn[0, 0, 0] = syn[0, 0, 1] = syn[0, 3, 3] = 1
    rec = mwpm_decode(syn, policy="leave")
    residual = syn ^ syndrome_of_codes(rec)
    assert residual.sum() == 1 and residual[0, 3, 3] == 1


# [DERIVED] matching weight against the subset dynamic program
@given(defect_sets())
def test_matching_weight_is_optimal(case):
    d, cells = case
    m = min_weight_matching(cells, d)
    if cells:
        assert m.total_weight == brute_force_min_weight(distance_matrix(cells, d).tolist())[0]
    assert sorted(v for p in m.pairs for v in p) == sorted(cells)


@pytest.mark.parametrize("channel", [0, 1])
@given(data=st.data())
def test_path_recovery_joins_its_pair(channel, data):
    d = data.draw(st.sampled_from([3, 4, 5, 7]))
    a = (data.draw(st.integers(0, d - 1)), data.draw(st.integers(0, d - 1)))
    b = (data.draw(st.integers(0, d - 1)), data.draw(st.integers(0, d - 1)))
    rec = path_recovery((a, b), channel, d)
    syn = syndrome_of_codes(rec)
    expected = np.zeros((d, d), np.uint8)
    expected[a] ^= 1
    expected[b] ^= 1
    assert np.array_equal(syn[channel], expected) and not syn[1 - channel].any()
    assert np.count_nonzero(rec) == toric_distance(a, b, d)


@given(st.sampled_from([3, 5, 7]), st.integers(0, 2**31), st.sampled_from([0.05, 0.1, 0.2]))
def test_decode_clears_and_is_no_heavier_than_error(d, seed, p):
    errors = sample_errors(LatticeGeometry(d), NoiseSpec.preset("bitflip", p), seed, 0, 4)
    syn = syndrome_of_codes(errors)
    recs, ok = mwpm_decode_batch(syn)
    assert ok.all()
    assert np.array_equal(syndrome_of_codes(recs), syn)
    # for X-only noise the recovery is a minimum-weight chain with that boundary
    assert ((recs != 0).reshape(4, -1).sum(1) <= (errors != 0).reshape(4, -1).sum(1)).all()


def test_y_errors_decode_to_y_where_chains_overlap():
    syn = syndrome_of_codes(np.array([[[3, 0, 0], [0, 0, 0], [0, 0, 0]], [[0] * 3] * 3], np.uint8))
    rec = mwpm_decode(syn)
    assert np.array_equal(syndrome_of_codes(rec), syn)
    assert (rec == 3).sum() == 1


def test_single_errors_always_corrected():
    d = 5
    for q in range(2 * d * d):
        for p in (1, 2, 3):
            e = np.zeros(2 * d * d, np.uint8)
            e[q] = p
            e = e.reshape(2, d, d)
            net = e ^ mwpm_decode(syndrome_of_codes(e))
            assert not syndrome_of_codes(net).any() and not logical_bits(net).any()


def test_batch_reports_failures():
    syn = np.zeros((3, 2, 3, 3), np.uint8)
    syn[1, 0, 0, 0] = 1
    recs, ok = mwpm_decode_batch(syn)
    assert ok.tolist() == [True, False, True] and not recs[1].any()


@pytest.mark.skipif(BACKEND != "cython", reason="compiled backend not built")
def test_backends_find_equal_weight_matchings():
    errors = sample_errors(LatticeGeometry(7), NoiseSpec(0.1), 5, 0, 30)
    for syn in syndrome_of_codes(errors):
        for ch in (0, 1):
            cells = DefectSet.from_syndrome(syn, ch)
            a = min_weight_matching(cells, 7, backend="python").total_weight
            assert a == min_weight_matching(cells, 7, backend="cython").total_weight
