import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagsens import (RunSet, confidence_interval, d_var, gain_factor,
                      mean_sensitivity, variance)


def test_mean_examples():
    assert mean_sensitivity([{3: 1.0}]) == {3: 1.0}
    assert mean_sensitivity([{3: 1.0}, {3: 3.0}]) == {3: 2.0}
    assert mean_sensitivity([{1: 1.0}, {2: 1.0}]) == {1: 0.5, 2: 0.5}
    with pytest.raises(ValueError):
        mean_sensitivity([])


def test_variance_examples():
    per_mass, agg = variance([{1: 1.0}, {1: 1.0}, {1: 1.0}])
    assert per_mass == {1: 0.0} and agg == 0.0
    per_mass, agg = variance([{1: 0.0}, {1: 2.0}])
    assert per_mass[1] == pytest.approx(2.0)
    assert agg == pytest.approx(2.0)
    with pytest.raises(ValueError):
        variance([{1: 1.0}])


def test_variance_translation_and_scaling():
    rng = random.Random(4)
    runs = [{m: rng.gauss(0, 1) for m in range(1, 6)} for _ in range(40)]
    _, base = variance(runs)
    shifted = [{m: v + 7.5 for m, v in run.items()} for run in runs]
    _, shifted_var = variance(shifted)
    assert shifted_var == pytest.approx(base, rel=1e-9)
    scaled = [{m: 3.0 * v for m, v in run.items()} for run in runs]
    _, scaled_var = variance(scaled)
    assert scaled_var == pytest.approx(9.0 * base, rel=1e-9)


def test_d_var_examples():
    ref = {0.5: {1: 0.3, 2: -0.1}}
    assert d_var(ref, ref, [0.5]) == 0.0
    est = {0.5: {1: 0.6, 2: -0.1}}
    assert d_var(est, ref, [0.5]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        d_var(est, ref, [0.75])


sparse_maps = st.dictionaries(st.integers(min_value=1, max_value=30),
                              st.floats(-5, 5, allow_nan=False), max_size=8)


@settings(max_examples=200, deadline=None)
@given(sparse_maps, sparse_maps, sparse_maps)
def test_d_var_is_a_metric(a, b, c):
    t = 1.0
    wrap = lambda m: {t: m}
    dab = d_var(wrap(a), wrap(b), [t])
    assert dab >= 0.0
    assert d_var(wrap(b), wrap(a), [t]) == pytest.approx(dab, rel=1e-12)
    if a == b:
        assert dab == 0.0
    dac = d_var(wrap(a), wrap(c), [t])
    dcb = d_var(wrap(c), wrap(b), [t])
    assert dab <= dac + dcb + 1e-9


def test_gain_factor():
    assert gain_factor(1.0, 1.0, 1.0, 1.0) == 1.0
    assert gain_factor(1.0, 2.0, 2.0, 2.0) == pytest.approx(0.5)
    # multiplicative under composition of time and variance ratios
    g1 = gain_factor(1.0, 1.0, 2.0, 3.0)
    g2 = gain_factor(2.0, 3.0, 5.0, 7.0)
    assert gain_factor(1.0, 1.0, 5.0, 7.0) == pytest.approx(g1 * g2)
    with pytest.raises(ValueError):
        gain_factor(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        gain_factor(1.0, 1.0, -2.0, 1.0)


def test_confidence_interval_examples():
    runs = [{1: 1.0}, {1: 1.0}, {1: 1.0}]
    mean, hw = confidence_interval(runs, 1)
    assert mean == 1.0 and hw == 0.0
    # Var = 4, L = 100 -> halfwidth 1.96 * sqrt(4/100) = 0.392
    rng = random.Random(9)
    vals = [2.0, -2.0] * 50
    runs = [{1: 2.0 + v} for v in vals]
    mean, hw = confidence_interval(runs, 1)
    var = sum((v + 2.0 - mean) ** 2 for v in vals) / 99
    assert hw == pytest.approx(1.96 * math.sqrt(var / 100))
    with pytest.raises(ValueError):
        confidence_interval([{1: 1.0}], 1)


def test_confidence_interval_coverage_calibration():
    """~95% of intervals over iid gaussian cells must cover the true mean."""
    rng = random.Random(1234)
    cells = 600
    L = 80
    covered = 0
    for _ in range(cells):
        true = rng.uniform(-1, 1)
        runs = [{1: rng.gauss(true, 0.7)} for _ in range(L)]
        mean, hw = confidence_interval(runs, 1)
        covered += abs(mean - true) <= hw
    assert 0.93 * cells <= covered <= 0.975 * cells


def test_runset_bookkeeping():
    rs = RunSet(times=(0.5, 1.0))
    rs.add_run({0.5: {1: 1.0}, 1.0: {1: 2.0}}, duration=0.25)
    rs.add_run({0.5: {1: 3.0}, 1.0: {1: 2.0, 2: 2.0}}, duration=0.75)
    assert rs.n_runs == 2
    assert rs.mean(0.5) == {1: 2.0}
    assert rs.mean(1.0) == {1: 2.0, 2: 1.0}
    per_mass, agg = rs.variance(1.0)
    assert per_mass[2] == pytest.approx(2.0)
    assert rs.mean_duration() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        rs.at(0.75)
    with pytest.raises(ValueError):
        rs.add_run({0.5: {}}, duration=0.0)
