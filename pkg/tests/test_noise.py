import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toriclab.errors import ContractViolation
from toriclab.noise import (
    MEASUREMENT_STREAM, NoiseSpec, channel_probs, flip_measurements, flip_measurements_batch, parse_eta,
    rng_stream, sample_error, sample_errors,
)
from toriclab.toric import LatticeGeometry


# [TRIVIAL]
def test_validation():
    with pytest.raises(ValueError):
        NoiseSpec(1.0)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, eta=0)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, model="erasure")


def test_depolarizing_split():
    px, py, pz = channel_probs(NoiseSpec(0.3, 0.5))
    assert px == pytest.approx(0.1) and py == pytest.approx(0.1) and pz == pytest.approx(0.1)


def test_bit_phase_flip_is_pure_y():
    assert channel_probs(NoiseSpec.preset("bitphaseflip", 0.2)) == (0.0, 0.2, 0.0)
    assert channel_probs(NoiseSpec.preset("bitflip", 0.2)) == (0.2, 0.0, 0.0)
    assert channel_probs(NoiseSpec.preset("phaseflip", 0.2)) == (0.0, 0.0, 0.2)


@given(st.floats(0.0, 0.99), st.floats(0.01, 1e4))
def test_bias_definition(p, eta):
    px, py, pz = channel_probs(NoiseSpec(p, eta))
    assert px + py + pz == pytest.approx(p, abs=1e-12)
    assert px == pytest.approx(pz)
    if p > 0:
        assert py / (px + pz) == pytest.approx(eta, rel=1e-9)


def test_preset_errors_and_eta_parsing():
    with pytest.raises(ValueError):
        NoiseSpec.preset("biased", 0.1)
    with pytest.raises(ValueError):
        NoiseSpec.preset("amplitude", 0.1)
    assert math.isinf(parse_eta("inf")) and parse_eta("5") == 5.0
    spec = NoiseSpec.preset("biased", 0.1, eta=5, measurement_noise=True)
    assert NoiseSpec.from_config(spec.to_config()) == spec
    inf = NoiseSpec.preset("bitphaseflip", 0.1)
    assert NoiseSpec.from_config(inf.to_config()) == inf


def test_zero_rate_gives_identity():
    g = LatticeGeometry(5)
    assert sample_error(g, NoiseSpec(0.0), rng_stream(0)).weight() == 0


# [DERIVED] empirical frequencies against the channel probabilities (5 sigma binomial band)
@pytest.mark.parametrize("spec", [NoiseSpec(0.2, 0.5), NoiseSpec(0.15, 5.0), NoiseSpec(0.1, math.inf),
                                  NoiseSpec(0.1, model="bitflip")])
def test_single_qubit_frequencies(spec):
    codes = sample_errors(LatticeGeometry(7), spec, seed=3, start=0, count=400).ravel()
    n = codes.size
    px, py, pz = channel_probs(spec)
    for code, prob in ((1, px), (3, py), (2, pz)):
        freq = np.mean(codes == code)
        assert abs(freq - prob) <= 5 * math.sqrt(prob * (1 - prob) / n) + 1e-12


def test_streams_are_indexed_not_sequential():
    g = LatticeGeometry(5)
    spec = NoiseSpec(0.2)
    batch = sample_errors(g, spec, seed=9, start=10, count=5)
    for k in range(5):
        single = sample_error(g, spec, rng_stream(9, 10 + k))
        assert np.array_equal(batch[k], single.codes)
    assert np.array_equal(sample_errors(g, spec, 9, 12, 3), batch[2:])


def test_streams_differ_by_tag_and_seed():
    a = rng_stream(1, 0).random(8)
    assert not np.allclose(a, rng_stream(1, 0, MEASUREMENT_STREAM).random(8))
    assert not np.allclose(a, rng_stream(2, 0).random(8))
    assert np.array_equal(a, rng_stream(1, 0).random(8))


def test_measurement_flips():
    syn = np.zeros((2, 5, 5), dtype=np.uint8)
    with pytest.raises(ContractViolation):
        flip_measurements(syn, NoiseSpec(0.1), rng_stream(0))
    spec = NoiseSpec(0.1, measurement_noise=True)
    assert spec.p_m == 0.1 and NoiseSpec(0.1).p_m == 0.0
    assert flip_measurements(syn, spec, rng_stream(0), p_m=1.0).all()
    assert not flip_measurements(syn, spec, rng_stream(0), p_m=0.0).any()
    batch = flip_measurements_batch(np.zeros((3, 2, 5, 5), np.uint8), spec, 4, 7)
    assert np.array_equal(batch[1], flip_measurements(syn, spec, rng_stream(4, 8, MEASUREMENT_STREAM)))
