"""Omnigap estimation, comparator grids and loss-gap evaluation."""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .data_io import GRID_STREAM, philox
from .learners import MultiIndexModel
from .links import (PiecewiseLinearLink, affine_link, constant_link, eval_link, invert_link,
                    logistic_link, matching_loss)
from .pav import StepPredictor

DEFAULT_LINK_CAP = 64


def empirical_omnigap(pred_values, unlink_values, wx_values, labels):
    """Sample mean of ``(p - y)(u - w.x)``."""
    p, u, s, y = (np.asarray(a, dtype=np.float64).ravel() for a in (pred_values, unlink_values, wx_values, labels))
    if not (p.size == u.size == s.size == y.size):
        raise ValueError("omnigap inputs must have equal lengths")
    if p.size == 0:
        raise ValueError("omnigap needs at least one sample")
    return float(np.mean((p - y) * (u - s)))


# ---------------------------------------------------------------- grids


@dataclass(frozen=True, eq=False)
class ComparatorGrid:
    links: tuple
    weights: np.ndarray  # shape (K, d)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        if len(self.links) == 0 or w.shape[0] == 0:
            raise ValueError("comparator grid must be non-empty")
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return len(self.links), self.weights.shape[0]


def _link_count(K, M):
    # non-decreasing level paths with K steps of size 0 or 1 inside 0..M
    return sum(math.comb(K, s) for v0 in range(M + 1) for s in range(min(K, M - v0) + 1))


def build_link_grid(beta, LR, resolution_eps, cap=DEFAULT_LINK_CAP, seed=0):
    """Monotone piecewise-linear links on an eps-grid of knots and levels.

    Knots are evenly spaced so one level step per knot keeps the slope
    within ``beta``. When the full family exceeds ``cap`` a seeded random
    subset is drawn. Constant 0, constant 1, affine and logistic links are
    always included.
    """
    if not 0 < resolution_eps < 1:
        raise ValueError("resolution must lie in (0, 1)")
    if not beta > 0 or not LR > 0:
        raise ValueError("beta and LR must be positive")
    if cap < 4:
        raise ValueError("cap must leave room for the four fixed links")
    K = int(math.floor(2 * LR * beta / resolution_eps + 1e-12))
    M = int(math.ceil(1 / resolution_eps - 1e-12))
    knots = np.linspace(-LR, LR, K + 1) if K > 0 else np.array([-LR, LR])
    levels = np.linspace(0.0, 1.0, M + 1)

    fixed = [constant_link(0.0, LR), constant_link(1.0, LR), affine_link(LR), logistic_link(LR)]
    seen = {link for link in fixed}
    out = list(fixed)

    def add(path):
        link = PiecewiseLinearLink(knots, levels[np.asarray(path)], lr=LR)
        if link not in seen:
            seen.add(link)
            out.append(link)

    room = cap - len(out)
    steps = max(K, 1)
    if K == 0:
        for v0 in range(M + 1):
            if len(out) >= cap:
                break
            add([v0, v0])
    elif _link_count(K, M) <= room + len(fixed):
        for v0 in range(M + 1):
            for inc in itertools.product((0, 1), repeat=K):
                if v0 + sum(inc) <= M:
                    add(np.concatenate([[v0], v0 + np.cumsum(inc)]))
    else:
        rng = philox(seed, GRID_STREAM)
        for _ in range(50 * cap):
            if len(out) >= cap:
                break
            v0 = int(rng.integers(M + 1))
            rate = rng.random()
            inc = (rng.random(steps) < rate).astype(np.int64)
            add(np.minimum(v0 + np.concatenate([[0], np.cumsum(inc)]), M))
    return out[:cap]


def build_weight_grid(d, R, seed=0, n_radii=8, sign=None):
    """Polar grid (64 directions) for d = 2, seeded random directions (256) for d > 2.

    For d = 1 the directions are just -1 and +1; ``sign`` keeps only one of
    them, which gives the increasing (+1) or decreasing (-1) comparators.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if sign is not None and (d != 1 or sign not in (1, -1)):
        raise ValueError("sign is only meaningful for d = 1 and must be +1 or -1")
    if d == 1:
        dirs = np.array([[float(sign)]]) if sign else np.array([[-1.0], [1.0]])
    elif d == 2:
        ang = 2 * np.pi * np.arange(64) / 64
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        g = philox(seed, GRID_STREAM + 1).standard_normal((256, d))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    radii = R * np.arange(1, n_radii + 1) / n_radii
    return (radii[:, None, None] * dirs[None]).reshape(-1, d)


def build_grid(d, beta, LR, R, resolution_eps, cap=DEFAULT_LINK_CAP, seed=0, sign=None):
    links = build_link_grid(beta, LR, resolution_eps, cap, seed)
    weights = build_weight_grid(d, R, seed, sign=sign)
    info = {"beta": beta, "LR": LR, "R": R, "resolution_eps": resolution_eps, "cap": cap, "seed": seed,
            "n_links": len(links), "n_weights": weights.shape[0]}
    return ComparatorGrid(links, weights, info)


# ---------------------------------------------------------------- evaluation


def head_matrix(predictor, X):
    """Predictions as an (H, n) array: one row per head."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if isinstance(predictor, MultiIndexModel):
        return predictor.head_predictions(X)
    if isinstance(predictor, StepPredictor):
        if X.shape[1] != 1:
            raise ValueError("step predictors take one feature")
        return predictor.predict(X[:, 0])[None, :]
    if isinstance(predictor, tuple) and len(predictor) == 2 and isinstance(predictor[0], PiecewiseLinearLink):
        link, w = predictor
        return eval_link(link, X @ np.asarray(w, dtype=np.float64))[None, :]
    if np.isscalar(predictor):
        return np.full((1, X.shape[0]), float(predictor))
    if callable(predictor):
        return np.atleast_2d(np.asarray(predictor(X), dtype=np.float64))
    raise TypeError(f"unsupported predictor {type(predictor).__name__}")


def comparator_losses(grid, dataset):
    """Mean matching loss of every comparator pair, shape (n_links, n_weights)."""
    S = dataset.features @ grid.weights.T
    y = dataset.labels[:, None]
    return np.array([np.mean(matching_loss(link, S, y), axis=0) for link in grid.links])


def omnigap_table(predictor, grid, dataset, comparator=None):
    """Omnigap and loss gap for every pair in the grid.

    For several heads the omnigap is averaged over heads and the loss gap
    uses the averaged inverse as the action.
    """
    X, y = dataset.features, dataset.labels
    if grid.weights.shape[1] != X.shape[1]:
        raise ValueError("grid weights and data have different dimensions")
    P = head_matrix(predictor, X)
    resid = P - y
    n = y.size
    proj = (resid.mean(axis=0) @ X) @ grid.weights.T / n  # mean over heads of E[(p - y) w.x]
    if comparator is None:
        comparator = comparator_losses(grid, dataset)
    og = np.empty(grid.shape)
    pl = np.empty(grid.shape)
    for i, link in enumerate(grid.links):
        U = invert_link(link, P)
        og[i] = np.mean(resid * U) - proj
        pl[i] = np.mean(matching_loss(link, U.mean(axis=0), y)) - comparator[i]
    return og, pl


def max_omnigap(predictor, grid, dataset):
    """Largest grid omnigap and its (link index, weight index); ties go to the first."""
    og, _ = omnigap_table(predictor, grid, dataset)
    flat = int(np.argmax(og))
    return float(og.flat[flat]), np.unravel_index(flat, og.shape)


def omniprediction_gap(predictor, link, w, dataset):
    """``E[loss of the post-processed prediction] - E[ml(w.x, y)]``."""
    X, y = dataset.features, dataset.labels
    P = head_matrix(predictor, X)
    action = invert_link(link, P).mean(axis=0)
    return float(np.mean(matching_loss(link, action, y)) - np.mean(matching_loss(link, X @ np.asarray(w), y)))


def predictor_omnigap(predictor, link, w, dataset):
    """Head-averaged omnigap against a single pair."""
    X, y = dataset.features, dataset.labels
    P = head_matrix(predictor, X)
    s = X @ np.asarray(w, dtype=np.float64)
    return float(np.mean([empirical_omnigap(p, invert_link(link, p), s, y) for p in P]))


# ---------------------------------------------------------------- linear counterexample


@dataclass(frozen=True)
class CounterexampleReport:
    ml_at_wstar: float
    min_pl_over_w: float
    argmin_w: float
    gap: float

    @property
    def checks(self):
        return {
            "ml_at_wstar <= -0.02": self.ml_at_wstar <= -0.02,
            "min_pl_over_w >= 0.01": self.min_pl_over_w >= 0.01,
            "gap >= 0.03": self.gap >= 0.03,
        }

    @property
    def passed(self):
        return all(self.checks.values())


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def counterexample_fixture(n_grid=10_000):
    """Sigmoid link, x uniform on {0.3, 0.5}, E[y | x] = sigmoid(x), w_star = 1.

    Losses are taken in expectation over y exactly. The proper loss of a
    linear prediction ``w x`` needs ``w x`` in (0, 1), so ``w`` ranges over
    the open interval (0, 2).
    """
    xs = np.array([0.3, 0.5])
    q = _sigmoid(xs)
    ml = -math.log(2) + 0.5 * np.sum(np.log1p(np.exp(xs)) - q * xs)
    w = np.linspace(0.0, 2.0, n_grid + 2)[1:-1]
    v = w[:, None] * xs[None, :]
    pl = -math.log(2) + 0.5 * np.sum(-q * np.log(v) - (1 - q) * np.log1p(-v), axis=1)
    k = int(np.argmin(pl))
    return CounterexampleReport(float(ml), float(pl[k]), float(w[k]), float(pl[k] - ml))
