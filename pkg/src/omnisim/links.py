"""Monotone piecewise-linear links, their inverses, and the induced losses."""

import json
import math

import numpy as np

SLOPE_TOL = 1e-9


class MalformedLinkError(ValueError):
    pass


class PiecewiseLinearLink:
    """Non-decreasing map ``[-lr, lr] -> [0, 1]`` given by sorted breakpoints.

    Evaluation clamps its argument to the domain, so the link is constant
    outside ``[-lr, lr]``. ``beta`` is a declared Lipschitz bound; when
    omitted it is taken as the steepest segment slope (or 1 for a flat link).
    """

    def __init__(self, t, v, lr=None, beta=None):
        t = np.array(t, dtype=np.float64).ravel()
        v = np.array(v, dtype=np.float64).ravel()
        if t.size == 0:
            raise MalformedLinkError("link has no breakpoints")
        if t.size != v.size:
            raise MalformedLinkError("breakpoint coordinates differ in length")
        if t.size < 2:
            raise MalformedLinkError("link needs at least two breakpoints")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise MalformedLinkError("breakpoints must be finite")
        lr = float(t[-1]) if lr is None else float(lr)
        if not lr > 0:
            raise MalformedLinkError("domain radius must be positive")
        if np.any(np.diff(t) <= 0):
            raise MalformedLinkError("breakpoints must be strictly increasing")
        if not (math.isclose(t[0], -lr, abs_tol=1e-12) and math.isclose(t[-1], lr, abs_tol=1e-12)):
            raise MalformedLinkError(f"breakpoints must span [-{lr}, {lr}]")
        if np.any(v < 0) or np.any(v > 1):
            raise MalformedLinkError("link values must lie in [0, 1]")
        slopes = np.diff(v) / np.diff(t)
        if np.any(slopes < 0):
            raise MalformedLinkError("link must be non-decreasing")
        steepest = float(slopes.max())
        if beta is None:
            beta = steepest if steepest > 0 else 1.0
        beta = float(beta)
        if not beta > 0:
            raise MalformedLinkError("Lipschitz bound must be positive")
        if steepest > beta + SLOPE_TOL:
            raise MalformedLinkError(f"segment slope {steepest:.6g} exceeds bound {beta:.6g}")
        t[0], t[-1] = -lr, lr
        t.flags.writeable = False
        v.flags.writeable = False
        self.t, self.v, self.lr, self.beta = t, v, lr, beta
        # integral of the link from -lr up to each breakpoint
        self._area = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
        self._area.flags.writeable = False

    @property
    def breakpoints(self):
        return list(zip(self.t.tolist(), self.v.tolist()))

    @property
    def strictly_increasing(self):
        return bool(np.all(np.diff(self.v) > 0))

    def __call__(self, t):
        return eval_link(self, t)

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearLink):
            return NotImplemented
        return (self.lr == other.lr and self.beta == other.beta
                and np.array_equal(self.t, other.t) and np.array_equal(self.v, other.v))

    def __hash__(self):
        return hash((self.lr, self.beta, self.t.tobytes(), self.v.tobytes()))

    def __repr__(self):
        return f"PiecewiseLinearLink(n_breakpoints={self.t.size}, lr={self.lr:g}, beta={self.beta:g})"

    def to_dict(self):
        return {"lr": self.lr, "beta": self.beta, "breakpoints": [[a, b] for a, b in self.breakpoints]}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        try:
            pts = np.asarray(obj["breakpoints"], dtype=np.float64)
            lr, beta = obj["lr"], obj["beta"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLinkError(f"bad link record: {exc}") from exc
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise MalformedLinkError("breakpoints must be [t, v] pairs")
        return cls(pts[:, 0], pts[:, 1], lr=lr, beta=beta)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _scalar_or_array(x, out):
    return float(np.ravel(out)[0]) if np.ndim(x) == 0 else out


def eval_link(link, t):
    t_arr = np.asarray(t, dtype=np.float64)
    return _scalar_or_array(t, np.interp(t_arr, link.t, link.v))


def invert_link(link, v):
    """Generalized inverse.

    Returns the midpoint of ``{t : link(t) = v}``; values outside the range
    of the link map to the nearer domain endpoint.
    """
    v_arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    t, vals = link.t, link.v
    m = t.size
    out = np.empty_like(v_arr)
    below = v_arr < vals[0]
    above = v_arr > vals[-1]
    out[below] = -link.lr
    out[above] = link.lr
    mid = ~(below | above)
    q = v_arr[mid]
    # leftmost preimage: first breakpoint with value >= q, interpolated back
    j = np.searchsorted(vals, q, side="left")
    jl = np.clip(j, 1, m - 1)
    rise = vals[jl] - vals[jl - 1]
    frac = np.where(rise > 0, (q - vals[jl - 1]) / np.where(rise > 0, rise, 1.0), 1.0)
    lo = np.where(j == 0, t[0], t[jl - 1] + frac * (t[jl] - t[jl - 1]))
    # rightmost preimage: last breakpoint with value <= q, interpolated forward
    k = np.searchsorted(vals, q, side="right") - 1
    kr = np.clip(k, 0, m - 2)
    rise = vals[kr + 1] - vals[kr]
    frac = np.where(rise > 0, (q - vals[kr]) / np.where(rise > 0, rise, 1.0), 0.0)
    hi = np.where(k == m - 1, t[-1], t[kr] + frac * (t[kr + 1] - t[kr]))
    out[mid] = 0.5 * (lo + hi)
    return _scalar_or_array(v, out)


def _antiderivative(link, t):
    # integral of the (clamped) link from -lr to t; linear beyond the domain
    t = np.asarray(t, dtype=np.float64)
    lr = link.lr
    tc = np.clip(t, -lr, lr)
    j = np.clip(np.searchsorted(link.t, tc, side="right") - 1, 0, link.t.size - 2)
    vt = np.interp(tc, link.t, link.v)
    inside = link._area[j] + 0.5 * (link.v[j] + vt) * (tc - link.t[j])
    return inside + np.maximum(t - lr, 0.0) * link.v[-1] + np.minimum(t + lr, 0.0) * link.v[0]


def matching_loss(link, t, y):
    """``integral_0^t (link(s) - y) ds`` in closed form."""
    t_arr = np.asarray(t, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    out = _antiderivative(link, t_arr) - _antiderivative(link, 0.0) - y_arr * t_arr
    return float(out) if out.ndim == 0 else out


def proper_loss(link, v, y):
    return matching_loss(link, invert_link(link, v), y)


def smooth_link(link, alpha):
    """Blend with a line of slope ``alpha`` so the result is strictly increasing.

    The output is ``(1 - 2 alpha lr) link(t) + alpha (t + lr)``, which has
    slopes in ``[alpha, alpha + (1 - 2 alpha lr) beta]`` and range in [0, 1].
    """
    alpha = float(alpha)
    if not 0 <= alpha < 1 / (2 * link.lr):
        raise ValueError(f"alpha must lie in [0, {1 / (2 * link.lr):.6g})")
    if alpha == 0:
        return link
    shrink = 1 - 2 * alpha * link.lr
    v = shrink * link.v + alpha * (link.t + link.lr)
    v = np.clip(v, 0.0, 1.0)
    # the bound can trail the recomputed slopes by an ulp
    steepest = float(np.max(np.diff(v) / np.diff(link.t)))
    return PiecewiseLinearLink(link.t, v, lr=link.lr, beta=max(alpha + shrink * link.beta, steepest))


# ---------------------------------------------------------------- constructors


def affine_link(lr=1.0):
    """The line from (-lr, 0) to (lr, 1)."""
    return PiecewiseLinearLink([-lr, lr], [0.0, 1.0], lr=lr, beta=1 / (2 * lr))


def logistic_link(lr=1.0, n_points=512, scale=1.0):
    """Sigmoid ``1 / (1 + exp(-scale t))`` sampled on a uniform grid."""
    t = np.linspace(-lr, lr, n_points)
    return PiecewiseLinearLink(t, 1.0 / (1.0 + np.exp(-scale * t)), lr=lr, beta=scale / 4)


def clipped_relu_link(lr=1.0, slope=1.0, knee=0.0):
    """``min(1, max(0, slope (t - knee)))``."""
    top = knee + 1.0 / slope
    inner = [p for p in (knee, top) if -lr < p < lr]
    t = np.array([-lr, *inner, lr])
    v = np.clip(slope * (t - knee), 0.0, 1.0)
    return PiecewiseLinearLink(t, v, lr=lr, beta=slope)


def constant_link(value, lr=1.0):
    return PiecewiseLinearLink([-lr, lr], [value, value], lr=lr, beta=1.0)


def link_from_values(t, v, lr, beta=None):
    """Interpolate sorted nodes ``(t, v)`` and extend flat to ``[-lr, lr]``.

    Nodes on or outside the domain boundary are folded into the endpoints.
    """
    t = np.asarray(t, dtype=np.float64)
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    keep = (t > -lr) & (t < lr)
    tt = np.concatenate([[-lr], t[keep], [lr]])
    vv = np.concatenate([[v[0]], v[keep], [v[-1]]])
    vv = np.maximum.accumulate(vv)
    if beta is not None:
        steepest = float(np.max(np.diff(vv) / np.diff(tt)))
        beta = max(float(beta), steepest)
    return PiecewiseLinearLink(tt, vv, lr=lr, beta=beta)
