import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.isotonic import IsotonicRegression

from omnisim.bir import BIRInstance, solve_bir
from omnisim.pav import (PAVRegressor, StepPredictor, merge_ties, pav_blocks, pav_calibration_report,
                         pav_double_fit, pav_fit, pav_fit_decreasing)

labels = st.lists(st.floats(0, 1), min_size=1, max_size=40)


def best_monotone_on_grid(y, w, candidates):
    """Weighted least squares over non-decreasing sequences taking values in ``candidates``."""
    c = np.sort(np.unique(candidates))
    cost = w[0] * (c - y[0]) ** 2
    for i in range(1, len(y)):
        cost = np.minimum.accumulate(cost) + w[i] * (c - y[i]) ** 2
    return cost.min()


def segment_means(y, w):
    n = len(y)
    return [np.sum(w[i:j] * y[i:j]) / np.sum(w[i:j]) for i in range(n) for j in range(i + 1, n + 1)]


def test_examples():
    p = pav_fit([1, 2], [0, 1])
    assert p.predict(1.0) == 0 and p.predict(2.0) == 1
    p = pav_fit([1, 2], [1, 0])
    assert np.allclose(p.predict(np.array([1.0, 2.0])), 0.5)
    p = pav_fit([1, 2, 3, 4], [0, 1, 1, 0])
    assert np.allclose(p.predict(np.arange(1.0, 5.0)), [0, 2 / 3, 2 / 3, 2 / 3])


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        pav_fit([], [])


def test_ties_pre_merged():
    x, y, w = merge_ties([2, 1, 2], [1.0, 0.0, 0.0], [1.0, 1.0, 3.0])
    assert np.array_equal(x, [1, 2])
    assert np.allclose(y, [0.0, 0.25]) and np.allclose(w, [1, 4])


def test_extrapolation_uses_end_blocks():
    p = pav_fit([0, 1, 2], [0.1, 0.5, 0.9])
    assert p.predict(-10.0) == pytest.approx(0.1)
    assert p.predict(10.0) == pytest.approx(0.9)


def test_optimality_against_grid_search(rng):
    for _ in range(200):
        n = int(rng.integers(1, 13))
        x = np.sort(rng.choice(100, size=n, replace=False)).astype(float)
        y = rng.random(n)
        w = rng.uniform(0.2, 3.0, n)
        p = pav_fit(x, y, w).predict(x)
        assert np.all(np.diff(p) >= 0)
        sse = np.sum(w * (p - y) ** 2)
        assert sse == pytest.approx(best_monotone_on_grid(y, w, segment_means(y, w)), abs=1e-12)
        v = solve_bir(BIRInstance(y, np.zeros(n - 1), np.full(n - 1, 1e6))).v if n > 1 else y
        if np.all(w == w[0]) or n == 1:
            assert np.max(np.abs(v - p)) <= 1e-8


@given(labels)
def test_matches_bir_unit_weights(ys):
    y = np.array(ys)
    n = y.size
    p = pav_fit(np.arange(n, dtype=float), y).predict(np.arange(n, dtype=float))
    v = solve_bir(BIRInstance(y, np.zeros(max(n - 1, 0)), np.full(max(n - 1, 0), 1e6))).v
    assert np.max(np.abs(p - v)) <= 1e-8


@given(labels)
def test_matches_sklearn(ys):
    y = np.array(ys)
    x = np.arange(y.size, dtype=float)
    ref = IsotonicRegression().fit(x, y).predict(x)
    assert np.max(np.abs(pav_fit(x, y).predict(x) - ref)) <= 1e-12


@given(labels)
def test_merge_log_monotone(ys):
    y = np.array(ys)
    log = []
    pav_blocks(y, np.ones_like(y), log)
    for left, merged, right in log:
        assert left + 1e-12 >= merged >= right - 1e-12


@given(labels, st.lists(st.floats(0.1, 5.0), min_size=40, max_size=40))
def test_blocks_are_calibrated(ys, ws):
    y = np.array(ys)
    w = np.array(ws[: y.size])
    x = np.arange(y.size, dtype=float)
    assert pav_calibration_report(pav_fit(x, y, w), x, y, w) <= 1e-12


def test_calibration_report_examples(rng):
    x = rng.random(50)
    y = rng.random(50) * 0.9
    const = StepPredictor([], [y.mean()])
    assert pav_calibration_report(const, x, y) <= 1e-15
    p = pav_fit(x, y)
    shifted = StepPredictor(p.thresholds, p.values + 0.1)
    assert pav_calibration_report(shifted, x, y) == pytest.approx(0.1)


def test_double_fit_examples():
    x = np.linspace(-1, 1, 9)
    y = np.linspace(0, 1, 9)
    plus, minus = pav_double_fit(x, y)
    assert np.allclose(plus.predict(x), y)
    assert np.all(np.diff(minus.predict(x)) <= 0)
    assert np.sum((minus.predict(x) - y) ** 2) > np.sum((plus.predict(x) - y) ** 2)


def test_double_fit_mirror_symmetry(rng):
    half = rng.random(6)
    x = np.concatenate([-np.arange(6, 0, -1), np.arange(1, 7)]).astype(float)
    y = np.concatenate([half[::-1], half])
    plus, minus = pav_double_fit(x, y)
    assert np.allclose(plus.predict(x), minus.predict(-x))


@given(labels)
def test_decreasing_fit_mirrors(ys):
    y = np.array(ys)
    x = np.arange(y.size, dtype=float)
    dec = pav_fit_decreasing(x, y)
    assert dec.direction == "dec"
    assert np.allclose(dec.predict(x), pav_fit(-x, y).predict(-x))


def test_step_predictor_json_and_validation():
    p = pav_fit([0, 1, 2, 3], [0.2, 0.1, 0.7, 0.9])
    assert StepPredictor.from_json(p.to_json()) == p
    assert set(p.to_dict()) == {"direction", "thresholds", "values"}
    with pytest.raises(ValueError):
        StepPredictor([0.0], [0.6, 0.2], "inc")
    with pytest.raises(ValueError):
        StepPredictor([0.0], [0.2], "inc")


def test_regressor_estimator(rng):
    x = rng.random(30)
    y = rng.random(30)
    est = PAVRegressor().fit(x[:, None], y)
    assert np.allclose(est.predict(x[:, None]), pav_fit(x, y).predict(x))
    dec = PAVRegressor(increasing=False).fit(x[:, None], y)
    assert np.all(np.diff(dec.predict(np.sort(x)[:, None])) <= 0)
