import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toriclab.errors import NoCrossing
from toriclab.lab.evaluate import DEFAULT_P_GRID, Decoders, LerCurve, LerPoint, evaluate_ler
from toriclab.lab.threshold import crossing, estimate_threshold
from toriclab.noise import NoiseSpec
from toriclab.pipeline import GroundTruthHighModel, MwpmOracleLowModel


# [TRIVIAL]
def test_default_grid():
    assert DEFAULT_P_GRID[0] == 0.01 and DEFAULT_P_GRID[-1] == 0.25 and len(DEFAULT_P_GRID) == 13


def test_point_stderr():
    pt = LerPoint(0.1, 0.2, 400)
    assert pt.stderr == pytest.approx(0.02) and pt.failures == 80


def test_curve_requires_increasing_p():
    with pytest.raises(ValueError):
        LerCurve(5, "mwpm", [LerPoint(0.2, 0.1, 10), LerPoint(0.1, 0.1, 10)])


def test_zero_rate_has_zero_ler():
    curve = evaluate_ler("mwpm", 5, NoiseSpec(0.0), [0.0], 200, seed=0)
    assert curve.ler.tolist() == [0.0]


def test_unknown_decoder_and_missing_models():
    with pytest.raises(ValueError):
        evaluate_ler("bp", 5, NoiseSpec(0.1), [0.1], 10, seed=0)
    with pytest.raises(ValueError):
        evaluate_ler("sunetqd", 5, NoiseSpec(0.1), [0.1], 10, seed=0)
    with pytest.raises(ValueError):
        evaluate_ler("enhanced_mwpm", 5, NoiseSpec(0.1), [0.1], 10, seed=0)
    with pytest.raises(ValueError):
        evaluate_ler("mwpm", 5, NoiseSpec(0.1), [0.1], 0, seed=0)


def test_deterministic_and_chunk_independent():
    spec = NoiseSpec.preset("bitflip", 0.1)
    a = evaluate_ler("mwpm", 5, spec, [0.06, 0.1], 300, seed=3, chunk=300)
    b = evaluate_ler("mwpm", 5, spec, [0.06, 0.1], 300, seed=3, chunk=64)
    assert a.ler.tolist() == b.ler.tolist()


def test_process_workers_do_not_change_results():
    spec = NoiseSpec.preset("bitflip", 0.1)
    a = evaluate_ler("mwpm", 3, spec, [0.1], 200, seed=3, chunk=50)
    b = evaluate_ler("mwpm", 3, spec, [0.1], 200, seed=3, chunk=50, workers=2)
    assert a.ler.tolist() == b.ler.tolist()


# [DERIVED] common random numbers make the MWPM curve monotone well within 2 stderr
def test_mwpm_ler_monotone_in_p():
    curve = evaluate_ler("mwpm", 5, NoiseSpec.preset("bitflip", 0.1), [0.02, 0.05, 0.08, 0.11, 0.14], 1000, seed=1)
    pts = curve.points
    for a, b in zip(pts, pts[1:]):
        assert b.ler >= a.ler - 2 * math.hypot(a.stderr, b.stderr)


def test_oracle_decoders():
    spec = NoiseSpec(0.08, math.inf)
    plain = evaluate_ler("mwpm", 5, spec, [0.08], 400, seed=2)
    models = Decoders(high_model=GroundTruthHighModel())
    enhanced = evaluate_ler("enhanced_mwpm", 5, spec, [0.08], 400, seed=2, models=models)
    assert enhanced.ler[0] <= plain.ler[0]
    oracle_low = Decoders(MwpmOracleLowModel(policy="fail"), MwpmOracleLowModel(policy="fail"))
    pipeline = evaluate_ler("sunetqd", 5, spec, [0.08], 400, seed=2, models=oracle_low)
    assert pipeline.ler[0] == plain.ler[0]


# -- threshold
def _curve(d, p, ler):
    return SimpleNamespace(p=np.asarray(p), ler=np.asarray(ler))


def test_identical_curves_do_not_cross():
    p = np.linspace(0.05, 0.15, 6)
    with pytest.raises(NoCrossing):
        estimate_threshold({5: _curve(5, p, p), 7: _curve(7, p, p)})
    with pytest.raises(ValueError):
        estimate_threshold({5: _curve(5, p, p)})
    with pytest.raises(ValueError):
        estimate_threshold({5: _curve(5, p, p), 7: _curve(7, p + 0.01, p)})


# [DERIVED] (p/q)^d curves all meet at p = q
@given(st.floats(0.06, 0.14), st.integers(5, 25))
def test_synthetic_power_law_threshold(q, points):
    p = np.linspace(0.05, 0.15, points)
    curves = {d: _curve(d, p, (p / q) ** d) for d in (5, 7, 9)}
    est = estimate_threshold(curves)
    # the log-LER gap is linear in log p, not p: chord error is O(h^2 / q)
    h = p[1] - p[0]
    assert est.p_c == pytest.approx(q, abs=h * h / (4 * q))
    assert est.spread < 1e-3
    assert [c[:2] for c in est.crossings] == [(5, 7), (7, 9)]


def test_crossing_skips_zero_points():
    p = [0.01, 0.05, 0.1, 0.15]
    assert crossing(p, [0.0, 0.02, 0.2, 0.5], [0.0, 0.01, 0.1, 0.6]) == pytest.approx(
        0.1 + 0.05 * math.log(2) / (math.log(2) - math.log(0.5 / 0.6)))
