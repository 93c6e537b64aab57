import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toriclab.errors import FormatError
from toriclab.lab.dataset import (
    MAGIC, Dataset, dumps, generate_dataset, load_dataset, loads, measured_syndromes, save_dataset,
)
from toriclab.noise import NoiseSpec, channel_probs, sample_errors
from toriclab.pipeline import MwpmOracleLowModel
from toriclab.toric import LatticeGeometry, logical_bits, syndrome_of_codes


# [TRIVIAL]
def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        generate_dataset(5, NoiseSpec(0.05), 0, seed=1)
    with pytest.raises(ValueError):
        generate_dataset(5, NoiseSpec(0.05), 3, seed=1, kind="mid")


def test_same_seed_same_bytes(tmp_path):
    a = generate_dataset(5, NoiseSpec(0.08), 50, seed=4)
    b = generate_dataset(5, NoiseSpec(0.08), 50, seed=4, chunk=7)
    save_dataset(a, tmp_path / "a.tqec")
    save_dataset(b, tmp_path / "b.tqec")
    assert (tmp_path / "a.tqec").read_bytes() == (tmp_path / "b.tqec").read_bytes()
    assert load_dataset(tmp_path / "a.tqec") == a
    assert generate_dataset(5, NoiseSpec(0.08), 50, seed=5) != a


def test_prefix_property():
    a = generate_dataset(3, NoiseSpec(0.1), 20, seed=8)
    b = generate_dataset(3, NoiseSpec(0.1), 12, seed=8)
    assert a.subset(slice(0, 12)) == b


def test_labels_are_consistent():
    ds = generate_dataset(5, NoiseSpec(0.1, 5.0), 300, seed=2)
    assert np.array_equal(syndrome_of_codes(ds.recoveries), ds.syndromes)
    assert not ds.logicals.any()


# [DERIVED] label density against the channel probabilities (3 sigma binomial band)
def test_label_density_tracks_error_rate():
    spec = NoiseSpec(0.09, 0.5)
    ds = generate_dataset(5, spec, 10_000, seed=1)
    n = ds.recoveries.size
    p = sum(channel_probs(spec))
    assert abs(np.mean(ds.recoveries != 0) - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_high_level_dataset_records_logical_class():
    spec = NoiseSpec(0.1)
    ds = generate_dataset(5, spec, 200, seed=3, kind="high")
    errors = sample_errors(LatticeGeometry(5), spec, 3, 0, 200)
    assert np.array_equal(ds.logicals, logical_bits(errors ^ ds.recoveries))
    assert ds.logicals.any()
    oracle = generate_dataset(5, spec, 200, seed=3, kind="high", low_model=MwpmOracleLowModel())
    assert oracle.kind == "high" and len(oracle) == 200


def test_measurement_noise_changes_syndromes():
    spec = NoiseSpec(0.1, measurement_noise=True)
    errors = sample_errors(LatticeGeometry(5), spec, 6, 0, 50)
    noisy = measured_syndromes(errors, spec, 6, 0)
    assert not np.array_equal(noisy, syndrome_of_codes(errors))
    assert np.array_equal(noisy, measured_syndromes(errors, spec, 6, 0))


@given(st.sampled_from([3, 4, 5, 7]), st.integers(0, 30), st.integers(0, 2**40),
       st.sampled_from(["low", "high"]), st.booleans())
def test_file_round_trip(d, n, seed, kind, meas):
    rng = np.random.default_rng(seed % 1000)
    codes = rng.integers(0, 4, (n, 2, d, d)).astype(np.uint8)
    spec = NoiseSpec(0.07, math.inf, meas)
    ds = Dataset(d, spec, seed, syndrome_of_codes(codes), codes, rng.integers(0, 2, (n, 4)).astype(np.uint8), kind)
    blob = dumps(ds)
    assert blob[:4] == MAGIC
    assert loads(blob) == ds


def test_damaged_files_rejected():
    blob = dumps(generate_dataset(3, NoiseSpec(0.1), 5, seed=0))
    for bad in (blob[:10], blob[:-1], b"XXXX" + blob[4:], blob + b"\0", blob[:4] + b"\x07\x00" + blob[6:]):
        with pytest.raises(FormatError):
            loads(bad)


def test_dataset_shape_validation():
    z = np.zeros((2, 2, 3, 3), np.uint8)
    with pytest.raises(ValueError):
        Dataset(3, NoiseSpec(0.1), 0, z, z, np.zeros((3, 4), np.uint8))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError) as info:
        load_dataset(tmp_path / "nope.tqec")
    assert "nope.tqec" in str(info.value)
