"""Synthetic data generators, dataset CSV files and metadata sidecars."""

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .links import PiecewiseLinearLink, eval_link, logistic_link

NORM_TOL = 1e-9

# stream ids for the counter-based generator
FEATURE_STREAM, LABEL_STREAM, CORRUPT_STREAM, ORDER_STREAM, PREDICT_STREAM, GRID_STREAM = range(6)


def philox(seed, stream=0):
    """Philox generator for one named stream of a seed; identical on every platform."""
    seq = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    L: float = 1.0
    seed: int = None
    generator: str = None

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.labels, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("features must be n x d with one label per row")
        if X.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if np.any(y < 0) or np.any(y > 1):
            raise ValueError("labels must lie in [0, 1]")
        norms = np.linalg.norm(X, axis=1)
        if norms.max() > self.L + NORM_TOL:
            raise ValueError(f"feature norm {norms.max():.6g} exceeds L = {self.L:g}")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "L", float(self.L))

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx):
        return replace(self, features=self.features[idx], labels=self.labels[idx])

    def split(self, n_first):
        return self.subset(slice(0, n_first)), self.subset(slice(n_first, None))

    def metadata(self):
        return {"L": self.L, "d": self.d, "n": self.n, "seed": self.seed, "generator": self.generator}


# ---------------------------------------------------------------- generators


def sample_features(rng, n, d, L=1.0):
    """Uniform on the sphere of radius L for d >= 2, uniform on [-L, L] for d = 1."""
    if d == 1:
        return rng.uniform(-L, L, size=(n, 1))
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    X = L * g
    # guard against the last ulp pushing a row outside the ball
    over = np.linalg.norm(X, axis=1) > L
    X[over] *= L / np.linalg.norm(X[over], axis=1, keepdims=True) * (1 - 1e-15)
    return X


def _check_weight(link, w_star, L):
    w_star = np.asarray(w_star, dtype=np.float64).ravel()
    if L * np.linalg.norm(w_star) > link.lr + NORM_TOL:
        raise ValueError(f"L * |w_star| = {L * np.linalg.norm(w_star):.6g} leaves the link domain [-{link.lr:g}, {link.lr:g}]")
    return w_star


def _draw_labels(rng, mean, label_mode):
    if label_mode == "expected":
        return mean.copy()
    if label_mode == "bernoulli":
        return (rng.random(mean.shape[0]) < mean).astype(np.float64)
    raise ValueError(f"unknown label mode {label_mode!r}")


def gen_realizable(d, n, link, w_star, seed, label_mode="expected", L=1.0):
    """Data with ``E[y | x] = link(w_star . x)``."""
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    w_star = _check_weight(link, w_star, L)
    if w_star.size != d:
        raise ValueError("w_star must have length d")
    X = sample_features(philox(seed, FEATURE_STREAM), n, d, L)
    mean = eval_link(link, X @ w_star)
    y = _draw_labels(philox(seed, LABEL_STREAM), mean, label_mode)
    return Dataset(X, y, L=L, seed=int(seed), generator=f"realizable-{label_mode}")


@dataclass(frozen=True)
class AgnosticSpec:
    """Recipe for agnostic data.

    Labels start from a single-index model, then optional pieces break
    realizability: random label flips, a non-monotone XOR component on the
    first two coordinates, heavy-tailed noise inside the link, and
    heavy-tailed feature radii.
    """

    link: PiecewiseLinearLink = field(default_factory=lambda: logistic_link(1.0, scale=4.0))
    w_star: tuple = None  # None: unit vector along the all-ones direction
    flip_rate: float = 0.0
    xor_weight: float = 0.0
    score_noise_df: float = None
    heavy_tail_features: bool = False
    label_mode: str = "bernoulli"


PRESETS = {
    "flip10": AgnosticSpec(flip_rate=0.10),
    "xor2d": AgnosticSpec(xor_weight=0.8),
    "heavytail": AgnosticSpec(score_noise_df=2.0, heavy_tail_features=True, flip_rate=0.05),
}


def resolve_spec(spec):
    if isinstance(spec, AgnosticSpec):
        return spec
    try:
        return PRESETS[spec]
    except (KeyError, TypeError):
        raise ValueError(f"unknown agnostic preset {spec!r}; choose from {sorted(PRESETS)}") from None


def gen_agnostic(d, n, seed, spec="flip10", L=1.0):
    name = spec if isinstance(spec, str) else "custom"
    spec = resolve_spec(spec)
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    if spec.xor_weight and d < 2:
        raise ValueError("the XOR component needs d >= 2")
    if spec.w_star is None:
        w_star = np.full(d, 1.0 / np.sqrt(d)) * min(1.0, spec.link.lr / L)
    else:
        w_star = np.asarray(spec.w_star, dtype=np.float64)
    w_star = _check_weight(spec.link, w_star, L)
    if w_star.size != d:
        raise ValueError("w_star must have length d")
    frng = philox(seed, FEATURE_STREAM)
    X = sample_features(frng, n, d, L)
    crng = philox(seed, CORRUPT_STREAM)
    if spec.heavy_tail_features:
        # pull radii toward the origin with a Pareto-tailed law, keeping |x| <= L
        r = 1.0 / (1.0 + crng.pareto(1.5, size=n))
        X *= r[:, None]
    score = X @ w_star
    if spec.score_noise_df is not None:
        score = score + 0.25 * crng.standard_t(spec.score_noise_df, size=n)
    mean = eval_link(spec.link, score)
    if spec.xor_weight:
        xor = np.where(X[:, 0] * X[:, 1] > 0, 0.9, 0.1)
        mean = (1 - spec.xor_weight) * mean + spec.xor_weight * xor
    y = _draw_labels(philox(seed, LABEL_STREAM), mean, spec.label_mode)
    if spec.flip_rate:
        flip = crng.random(n) < spec.flip_rate
        y[flip] = 1.0 - y[flip]
    return Dataset(X, y, L=L, seed=int(seed), generator=f"agnostic-{name}")


# ---------------------------------------------------------------- files


def sidecar_path(path):
    root, _ = os.path.splitext(os.fspath(path))
    return root + ".json"


def save_dataset_csv(dataset, path, sidecar=True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(dataset.d)] + ["y"])
        for row, label in zip(dataset.features, dataset.labels):
            w.writerow([f"{v:.17g}" for v in row] + [f"{label:.17g}"])
    if sidecar:
        with open(sidecar_path(path), "w") as fh:
            json.dump(dataset.metadata(), fh, indent=2)
            fh.write("\n")


def load_dataset_csv(path, L=None):
    """Read a dataset; L comes from the argument, then the sidecar, then the data."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if not header or header[-1] != "y":
            raise DataFormatError(f"{path}:1: last column must be 'y'")
        d = len(header) - 1
        if d < 1 or header[:-1] != [f"x{j + 1}" for j in range(d)]:
            raise DataFormatError(f"{path}:1: expected header x1,...,xd,y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise DataFormatError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    arr = np.array(rows)
    meta = {}
    side = sidecar_path(path)
    if os.path.exists(side):
        with open(side) as fh:
            meta = json.load(fh)
    if L is None:
        L = meta.get("L")
    if L is None:
        L = float(np.linalg.norm(arr[:, :-1], axis=1).max())
    try:
        return Dataset(arr[:, :-1], arr[:, -1], L=L, seed=meta.get("seed"), generator=meta.get("generator"))
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
