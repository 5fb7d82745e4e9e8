"""Isotron-style learners and the multi-index predictor they produce."""

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .bir import BIRInstance, solve_bir
from .data_io import ORDER_STREAM, PREDICT_STREAM, Dataset, philox
from .links import PiecewiseLinearLink, eval_link, invert_link, link_from_values, smooth_link


class StreamExhaustedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Learner settings.

    ``T`` and ``eta`` left as None are filled from the target accuracy
    ``eps`` by each learner's preset; ``alpha_smooth`` left as None becomes
    ``eps / (6 L^2 R^2)``.
    """

    T: int = None
    eta: float = None
    beta: float = 1.0
    R: float = 1.0
    alpha_smooth: float = None
    seed: int = 0
    eps: float = 0.1

    def __post_init__(self):
        if self.T is not None and (int(self.T) != self.T or self.T < 0):
            raise ValueError("T must be a non-negative integer")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.beta > 0 or not self.R > 0:
            raise ValueError("beta and R must be positive")
        if self.alpha_smooth is not None and self.alpha_smooth < 0:
            raise ValueError("alpha_smooth must be non-negative")
        if not 0 < self.eps:
            raise ValueError("eps must be positive")
        if int(self.seed) != self.seed:
            raise ValueError("seed must be an integer")

    def smoothing(self, L):
        if self.alpha_smooth is not None:
            alpha = self.alpha_smooth
        else:
            alpha = self.eps / (6 * L**2 * self.R**2)
        if alpha >= 1 / (2 * L * self.R):
            raise ValueError("alpha_smooth must be below 1 / (2 L R)")
        return alpha


def isotron_preset(config, L):
    """Squared-loss preset: eta = 1/(beta L^2), T = ceil(beta^2 L^2 R^2 / eps)."""
    T = config.T if config.T is not None else math.ceil(config.beta**2 * L**2 * config.R**2 / config.eps)
    eta = config.eta if config.eta is not None else 1.0 / (config.beta * L**2)
    return replace(config, T=int(T), eta=eta)


def omnitron_preset(config, L):
    """Full-gradient preset: T = ceil(L^2 R^2 / eps^2), eta = R / (L sqrt(T))."""
    T = config.T if config.T is not None else math.ceil(L**2 * config.R**2 / config.eps**2)
    eta = config.eta if config.eta is not None else config.R / (L * math.sqrt(max(T, 1)))
    return replace(config, T=int(T), eta=eta)


def stochastic_preset(config, L):
    """Stochastic preset: T as above, eta = sqrt(2 / (5 T)) R / L."""
    T = config.T if config.T is not None else math.ceil(L**2 * config.R**2 / config.eps**2)
    eta = config.eta if config.eta is not None else math.sqrt(2.0 / (5 * max(T, 1))) * config.R / L
    return replace(config, T=int(T), eta=eta)


# ---------------------------------------------------------------- primitives


def project_ball(w, R):
    w = np.asarray(w, dtype=np.float64)
    norm = np.linalg.norm(w)
    return w * (R / norm) if norm > R else w.copy()


def empirical_gradient(link, w, dataset):
    X, y = dataset.features, dataset.labels
    resid = eval_link(link, X @ np.asarray(w, dtype=np.float64)) - y
    return resid @ X / X.shape[0]


def squared_loss(link, w, dataset):
    p = eval_link(link, dataset.features @ np.asarray(w, dtype=np.float64))
    return float(np.mean((p - dataset.labels) ** 2))


@dataclass(frozen=True, eq=False)
class OracleFit:
    link: PiecewiseLinearLink
    z: np.ndarray  # sorted scores
    y: np.ndarray  # labels in score order
    solution: object


def approx_bir_fit(w, dataset, beta, lr=None):
    """Best beta-Lipschitz monotone link for scores ``X w`` in squared loss.

    Equal scores are tied together by zero-width difference bounds, so they
    share one fitted value.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    lr = dataset.L if lr is None else float(lr)
    z = dataset.features @ np.asarray(w, dtype=np.float64)
    order = np.argsort(z, kind="stable")
    zs, ys = z[order], dataset.labels[order]
    inst = BIRInstance(ys, np.zeros(zs.size - 1), beta * np.diff(zs))
    sol = solve_bir(inst)
    uz, first = np.unique(zs, return_index=True)
    counts = np.diff(np.append(first, zs.size))
    uv = np.add.reduceat(sol.v, first) / counts
    link = link_from_values(uz, uv, lr, beta)
    return OracleFit(link=link, z=zs, y=ys, solution=sol)


def approx_bir_oracle(w, dataset, beta, lr=None):
    return approx_bir_fit(w, dataset, beta, lr).link


# ---------------------------------------------------------------- model


class MultiIndexModel:
    """Heads ``(link_t, w_t)``; a loss picks its action by averaging inverses."""

    def __init__(self, heads, R, L):
        heads = tuple((link, np.array(w, dtype=np.float64).ravel()) for link, w in heads)
        if not heads:
            raise ValueError("model needs at least one head")
        d = heads[0][1].size
        for link, w in heads:
            if w.size != d:
                raise ValueError("all head weights must have the same length")
            if np.linalg.norm(w) > R + 1e-9:
                raise ValueError(f"head weight norm {np.linalg.norm(w):.6g} exceeds R = {R:g}")
            if abs(link.lr - L * R) > 1e-9 * max(1.0, L * R):
                raise ValueError("head link domain must be [-L R, L R]")
            w.flags.writeable = False
        self.heads, self.R, self.L = heads, float(R), float(L)

    @property
    def T(self):
        return len(self.heads)

    @property
    def d(self):
        return self.heads[0][1].size

    def head_predictions(self, X):
        """Array of shape (T, n) with ``link_t(w_t . x)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise ValueError(f"model expects {self.d} features, got {X.shape[1]}")
        return np.stack([eval_link(link, X @ w) for link, w in self.heads])

    def to_dict(self):
        return {"L": self.L, "R": self.R,
                "heads": [{"link": link.to_dict(), "w": w.tolist()} for link, w in self.heads]}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        heads = [(PiecewiseLinearLink.from_dict(h["link"]), h["w"]) for h in obj["heads"]]
        return cls(heads, R=obj["R"], L=obj["L"])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def predict_unlinked(model, x, test_link):
    """Action for the matching loss of ``test_link``: mean inverse of head outputs."""
    x = np.asarray(x, dtype=np.float64)
    preds = model.head_predictions(x)
    out = np.mean(invert_link(test_link, preds), axis=0)
    return float(out[0]) if x.ndim == 1 else out


def predict_randomized_proper(model, x, rng):
    """Output of one head drawn uniformly at random."""
    link, w = model.heads[int(rng.integers(model.T))]
    return eval_link(link, np.asarray(x, dtype=np.float64) @ w)


def mean_predictor(dataset):
    return float(np.mean(dataset.labels))


# ---------------------------------------------------------------- learners


@dataclass(frozen=True, eq=False)
class IsotronStep:
    t: int
    link: PiecewiseLinearLink
    w: np.ndarray
    sq_loss: float
    grad_norm: float


def isotron_fit(dataset, config=TrainConfig(), preset=isotron_preset):
    """Full-batch Isotron; returns the iterates ``t = 0..T`` with their losses."""
    cfg = preset(config, dataset.L)
    lr = dataset.L * cfg.R
    w = np.zeros(dataset.d)
    trace = []
    for t in range(cfg.T + 1):
        link = approx_bir_oracle(w, dataset, cfg.beta, lr)
        resid = eval_link(link, dataset.features @ w) - dataset.labels
        grad = resid @ dataset.features / dataset.n
        trace.append(IsotronStep(t, link, w, float(np.mean(resid**2)), float(np.linalg.norm(grad))))
        if t < cfg.T:
            w = project_ball(w - cfg.eta * grad, cfg.R)
    return trace


def _package(trace, config, L):
    alpha = config.smoothing(L)
    heads = [(smooth_link(step.link, alpha), step.w) for step in trace]
    return MultiIndexModel(heads, R=config.R, L=L)


def ideal_omnitron_fit(dataset, config=TrainConfig(), return_trace=False):
    """Isotron on the empirical distribution, packaged as T heads."""
    cfg = omnitron_preset(config, dataset.L)
    if cfg.T < 1:
        raise ValueError("need T >= 1 heads")
    trace = isotron_fit(dataset, cfg, preset=lambda c, L: c)
    model = _package(trace[: cfg.T], cfg, dataset.L)
    return (model, trace) if return_trace else model


def _iter_stream(stream):
    if isinstance(stream, Dataset):
        return zip(stream.features, stream.labels)
    return iter(stream)


def omnitron_fit(oracle_dataset, gradient_stream, config=TrainConfig(), return_trace=False):
    """Stochastic Omnitron: oracle links from a fixed sample, one fresh point per step."""
    L = oracle_dataset.L
    cfg = stochastic_preset(config, L)
    if cfg.T < 1:
        raise ValueError("need T >= 1 heads")
    lr = L * cfg.R
    stream = _iter_stream(gradient_stream)
    w = np.zeros(oracle_dataset.d)
    trace = []
    for t in range(cfg.T):
        link = approx_bir_oracle(w, oracle_dataset, cfg.beta, lr)
        try:
            x_t, y_t = next(stream)
        except StopIteration:
            raise StreamExhaustedError(f"gradient stream ran out after {t} of {cfg.T} samples") from None
        x_t = np.asarray(x_t, dtype=np.float64)
        g = (eval_link(link, x_t @ w) - float(y_t)) * x_t
        trace.append(IsotronStep(t, link, w, squared_loss(link, w, oracle_dataset), float(np.linalg.norm(g))))
        w = project_ball(w - cfg.eta * g, cfg.R)
    model = _package(trace, cfg, L)
    return (model, trace) if return_trace else model


def split_for_omnitron(dataset, T, seed):
    """Shuffle with the order stream; first T rows feed gradients, the rest the oracle."""
    if dataset.n <= T:
        raise StreamExhaustedError(f"need more than T = {T} rows to split off a gradient stream, got {dataset.n}")
    perm = philox(seed, ORDER_STREAM).permutation(dataset.n)
    shuffled = dataset.subset(perm)
    stream, oracle = shuffled.split(T)
    return oracle, stream


# ---------------------------------------------------------------- estimators


def _as_dataset(X, y, L):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if L is None:
        L = float(np.linalg.norm(X, axis=1).max()) or 1.0
    return Dataset(X, y, L=L)


class IsotronRegressor(RegressorMixin, BaseEstimator):
    """Single-index regressor: keeps the Isotron iterate with the lowest training loss."""

    def __init__(self, T=100, eta=None, beta=1.0, R=1.0, L=None):
        self.T, self.eta, self.beta, self.R, self.L = T, eta, beta, R, L

    def fit(self, X, y):
        data = _as_dataset(X, y, self.L)
        cfg = TrainConfig(T=self.T, eta=self.eta, beta=self.beta, R=self.R)
        self.trace_ = isotron_fit(data, cfg)
        best = min(self.trace_, key=lambda s: s.sq_loss)
        self.link_, self.coef_ = best.link, best.w
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        return eval_link(self.link_, X @ self.coef_)


class OmnitronRegressor(RegressorMixin, BaseEstimator):
    """Multi-index omnipredictor.

    ``predict`` returns the average head output; ``predict_unlinked`` gives
    the loss-specific action for a chosen link.
    """

    def __init__(self, T=None, eta=None, beta=1.0, R=1.0, L=None, eps=0.1, alpha_smooth=None,
                 stochastic=False, seed=0):
        self.T, self.eta, self.beta, self.R, self.L = T, eta, beta, R, L
        self.eps, self.alpha_smooth, self.stochastic, self.seed = eps, alpha_smooth, stochastic, seed

    def fit(self, X, y):
        data = _as_dataset(X, y, self.L)
        cfg = TrainConfig(T=self.T, eta=self.eta, beta=self.beta, R=self.R, eps=self.eps,
                          alpha_smooth=self.alpha_smooth, seed=self.seed)
        if self.stochastic:
            cfg = stochastic_preset(cfg, data.L)
            oracle, stream = split_for_omnitron(data, cfg.T, cfg.seed)
            self.model_ = omnitron_fit(oracle, stream, cfg)
        else:
            self.model_ = ideal_omnitron_fit(data, cfg)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.head_predictions(_features(X)).mean(axis=0)

    def predict_unlinked(self, X, link):
        check_is_fitted(self, "model_")
        return predict_unlinked(self.model_, _features(X), link)

    def sample_proper(self, X, seed=None):
        check_is_fitted(self, "model_")
        rng = philox(self.seed if seed is None else seed, PREDICT_STREAM)
        return predict_randomized_proper(self.model_, _features(X), rng)


def _features(X):
    X = np.asarray(X, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X
