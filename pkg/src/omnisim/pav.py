"""Pool-adjacent-violators isotonic regression and step predictors."""

import json

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted


class StepPredictor:
    """Monotone step function of one real input.

    ``values[i]`` applies between ``thresholds[i-1]`` and ``thresholds[i]``;
    the first and last values extend to minus and plus infinity. A cut point
    belongs to the block on its right for ``"inc"`` predictors and to the
    block on its left for ``"dec"`` predictors, which keeps every training
    point on its own block.
    """

    def __init__(self, thresholds, values, direction="inc"):
        thresholds = np.array(thresholds, dtype=np.float64).ravel()
        values = np.array(values, dtype=np.float64).ravel()
        if direction not in ("inc", "dec"):
            raise ValueError("direction must be 'inc' or 'dec'")
        if values.size != thresholds.size + 1:
            raise ValueError("need exactly one more value than thresholds")
        if np.any(np.diff(thresholds) < 0):
            raise ValueError("thresholds must be sorted")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("values must lie in [0, 1]")
        steps = np.diff(values)
        if (direction == "inc" and np.any(steps < 0)) or (direction == "dec" and np.any(steps > 0)):
            raise ValueError(f"values are not monotone in the '{direction}' direction")
        self.thresholds, self.values, self.direction = thresholds, values, direction

    def __call__(self, x):
        return self.predict(x)

    def predict(self, x):
        x_arr = np.asarray(x, dtype=np.float64)
        side = "right" if self.direction == "inc" else "left"
        out = self.values[np.searchsorted(self.thresholds, x_arr, side=side)]
        return float(out) if x_arr.ndim == 0 else out

    def __eq__(self, other):
        if not isinstance(other, StepPredictor):
            return NotImplemented
        return (self.direction == other.direction and np.array_equal(self.thresholds, other.thresholds)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"StepPredictor(direction={self.direction!r}, n_steps={self.values.size})"

    def to_dict(self):
        return {"direction": self.direction, "thresholds": self.thresholds.tolist(), "values": self.values.tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["thresholds"], obj["values"], obj.get("direction", "inc"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _validate(x, y, weight):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("PAV needs at least one point")
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    w = np.ones_like(x) if weight is None else np.asarray(weight, dtype=np.float64).ravel()
    if w.shape != x.shape:
        raise ValueError("weights differ in length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("labels must lie in [0, 1]")
    return x, y, w


def merge_ties(x, y, weight=None):
    """Sort by x and pool equal x into one point (summed weight, mean label)."""
    x, y, w = _validate(x, y, weight)
    ux, inv = np.unique(x, return_inverse=True)
    sw = np.bincount(inv, weights=w)
    swy = np.bincount(inv, weights=w * y)
    return ux, swy / sw, sw


def pav_blocks(y, weight, merge_log=None):
    """Isotonic blocks of an already sorted sequence.

    Returns ``(starts, means)``. If ``merge_log`` is a list, every merge
    appends ``(left_mean, merged_mean, right_mean)``.
    """
    n = len(y)
    sum_wy = np.empty(n)
    sum_w = np.empty(n)
    start = np.empty(n, dtype=np.int64)
    top = -1
    for i in range(n):
        top += 1
        sum_wy[top] = weight[i] * y[i]
        sum_w[top] = weight[i]
        start[top] = i
        while top > 0 and sum_wy[top - 1] * sum_w[top] > sum_wy[top] * sum_w[top - 1]:
            swy = sum_wy[top - 1] + sum_wy[top]
            sw = sum_w[top - 1] + sum_w[top]
            if merge_log is not None:
                merge_log.append((sum_wy[top - 1] / sum_w[top - 1], swy / sw, sum_wy[top] / sum_w[top]))
            top -= 1
            sum_wy[top] = swy
            sum_w[top] = sw
    k = top + 1
    means = np.clip(sum_wy[:k] / sum_w[:k], 0.0, 1.0)
    return start[:k].copy(), means


def pav_fit(x, y, weight=None, merge_log=None):
    """Weighted least-squares non-decreasing fit, as a step predictor."""
    ux, uy, uw = merge_ties(x, y, weight)
    starts, means = pav_blocks(uy, uw, merge_log)
    return StepPredictor(ux[starts[1:]], means, "inc")


def pav_fit_decreasing(x, y, weight=None):
    x, y, w = _validate(x, y, weight)
    mirror = pav_fit(-x, y, w)
    return StepPredictor(-mirror.thresholds[::-1], mirror.values[::-1], "dec")


def pav_double_fit(x, y, weight=None):
    """Non-decreasing and non-increasing fits of the same data."""
    return pav_fit(x, y, weight), pav_fit_decreasing(x, y, weight)


def pav_calibration_report(predictor, x, y, weight=None):
    """Largest gap between a predicted value and the mean label it receives."""
    x, y, w = _validate(x, y, weight)
    p = np.asarray(predictor.predict(x), dtype=np.float64)
    vals, inv = np.unique(p, return_inverse=True)
    mean_y = np.bincount(inv, weights=w * y) / np.bincount(inv, weights=w)
    return float(np.max(np.abs(mean_y - vals)))


class PAVRegressor(RegressorMixin, BaseEstimator):
    """Isotonic regression on a single feature via pool-adjacent-violators."""

    def __init__(self, increasing=True):
        self.increasing = increasing

    def fit(self, X, y, sample_weight=None):
        x = np.asarray(X, dtype=np.float64)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ValueError("expected a single feature")
            x = x[:, 0]
        fit = pav_fit if self.increasing else pav_fit_decreasing
        self.predictor_ = fit(x, y, sample_weight)
        return self

    def predict(self, X):
        check_is_fitted(self, "predictor_")
        x = np.asarray(X, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, 0]
        return self.predictor_.predict(x)
