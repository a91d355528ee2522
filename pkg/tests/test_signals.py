import json

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import admissible_pwl
from nlconsensus import signals
from nlconsensus.errors import AssumptionViolation, ConfigParseError, NotAFixedPoint

TANH25_FIXED = 0.9856238716346564  # brentq on tanh(2.5 x) = x


def classes(s):
    return [(round(r.value, 9), r.classification) for r in s.fixed_points]


def test_tanh_fixed_points():
    assert classes(signals.tanh_gain(2.5)) == [
        (round(-TANH25_FIXED, 9), "stable"), (0.0, "unstable"), (round(TANH25_FIXED, 9), "stable")]
    assert classes(signals.tanh_gain(0.8)) == [(0.0, "stable")]


def test_clip_fixed_points_include_the_ends():
    assert classes(signals.clip_linear(1.2)) == [(-1.0, "stable"), (0.0, "unstable"), (1.0, "stable")]


def test_sine_staircase_is_semi_stable_everywhere_but_one():
    recs = signals.sine_staircase().fixed_points
    assert [round(r.value, 9) for r in recs] == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert [r.classification for r in recs] == ["semi_stable"] * 4 + ["stable"]
    assert all(r.left_stable for r in recs)
    assert not any(r.in_left_unstable_set for r in recs)


def test_staircase_example():
    assert classes(signals.staircase_example()) == [
        (-0.7, "stable"), (-0.5, "unstable"), (0.3, "stable"), (0.7, "unstable"), (0.85, "stable")]


def test_interval_of_fixed_points():
    s = signals.piecewise_linear([[-1, -0.5], [-0.2, -0.2], [0.2, 0.2], [1, 0.5]])
    (rec,) = s.fixed_points
    assert rec.is_interval
    assert rec.lo == pytest.approx(-0.2, abs=1e-9) and rec.hi == pytest.approx(0.2, abs=1e-9)
    assert rec.stable


def test_classify_single_point():
    s = signals.tanh_gain(2.5)
    assert signals.classify_fixed_point(s, 0.0).classification == "unstable"
    assert signals.classify_fixed_point(s, TANH25_FIXED).classification == "stable"
    with pytest.raises(NotAFixedPoint):
        signals.classify_fixed_point(s, 0.5)


def test_slope_conventions():
    s = signals.sine_staircase()
    # larger one-sided slope at interior kinks, only the inner side at the ends
    assert s.derivative([-1.0, -0.5, 0.0, 0.5, 1.0]).tolist() == [2.0, 2.0, 2.0, 2.0, 0.0]
    c = signals.clip_linear(2.0)
    assert c.derivative([-0.5, 0.0, 0.5, 0.9]).tolist() == [2.0, 2.0, 2.0, 0.0]
    p = signals.staircase_example()
    assert p.derivative(-0.5) == pytest.approx(7.0)
    assert p.lipschitz_k == pytest.approx(7.0)


@pytest.mark.parametrize("name", ["tanh2.5", "tanh0.8", "clip1.2", "clip0.5", "sinestair", "staircase"])
def test_builtins_are_admissible(builtin_signals, name):
    s = builtin_signals[name]
    rep = signals.validate_assumptions(s)
    assert rep.passed
    assert rep.estimated_lipschitz <= s.lipschitz_k * (1 + 1e-9)


def test_validation_flags_violations():
    wobbly = signals.custom(lambda x: 0.5 * np.sin(6 * x), 3.0)
    assert not signals.validate_assumptions(wobbly).monotone_ok
    too_big = signals.custom(lambda x: 1.5 * x, 1.5)
    assert not signals.validate_assumptions(too_big).range_ok
    steep = signals.custom(lambda x: np.tanh(5 * x), 1.0)
    assert not signals.validate_assumptions(steep).lipschitz_ok
    with pytest.raises(AssumptionViolation):
        signals.find_fixed_points(wobbly)
    with pytest.raises(AssumptionViolation):
        signals.piecewise_linear([[-1, 0.5], [1, -0.5]])


def test_under_and_overestimation():
    assert signals.validate_assumptions(signals.tanh_gain(0.8)).underestimation
    assert signals.validate_assumptions(signals.clip_linear(0.5)).underestimation
    for s in (signals.tanh_gain(2.5), signals.sine_staircase()):
        rep = signals.validate_assumptions(s)
        assert not rep.underestimation and not rep.overestimation
    rep = signals.validate_assumptions(signals.custom(lambda x: np.clip(2 * x, -1, 1), 2.0))
    assert rep.overestimation and not rep.underestimation


def test_from_spec(tmp_path):
    assert signals.from_spec("tanh:K=2.5").params == {"k": 2.5}
    assert signals.from_spec("clip:K=1.2", k=3.0).lipschitz_k == 3.0
    assert signals.from_spec("sinestair").family_tag == "sine_staircase"
    path = tmp_path / "s.json"
    path.write_text(json.dumps([[-1, -1], [0, 0.2], [1, 1]]))
    assert signals.from_spec(f"pwl:file={path}").lipschitz_k == pytest.approx(1.2)
    for bad in ("nope", "tanh", "tanh:K=abc", "clip:K"):
        with pytest.raises(ConfigParseError):
            signals.from_spec(bad)


def test_oddness():
    assert signals.is_odd(signals.tanh_gain(3.0))
    assert not signals.is_odd(signals.sine_staircase())


@settings(max_examples=60, deadline=None)
@given(admissible_pwl())
def test_every_admissible_signal_has_a_stable_fixed_point(s):
    recs = s.fixed_points
    assert any(r.stable for r in recs)
    for r in recs:
        assert abs(float(s(r.lo)) - r.lo) < 1e-10 and abs(float(s(r.hi)) - r.hi) < 1e-10
