"""Bounded isotonic regression (BIR).

Minimize ``sum (v_i - y_i)**2`` over ``v`` in ``[0, 1]**n`` subject to
``a_i <= v[i+1] - v[i] <= b_i``. The exact solver runs a dynamic program
over the dual, whose partial minima are convex piecewise-quadratic
functions kept in a lazy segment tree. A slow iterative solver is provided
as an independent reference.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import _kernels as K
from .maintainer import DEFAULT_TAU0

FEAS_TOL = 1e-9


class InfeasibleError(ValueError):
    """No point of the box satisfies the difference constraints."""


@dataclass(frozen=True)
class BIRInstance:
    y: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).ravel()
        n = y.shape[0]
        a = np.zeros(max(n - 1, 0)) if self.a is None else np.asarray(self.a, dtype=np.float64).ravel()
        b = np.asarray(self.b, dtype=np.float64).ravel()
        if n < 1:
            raise ValueError("need at least one target")
        if a.shape[0] != n - 1 or b.shape[0] != n - 1:
            raise ValueError(f"a and b must have length {n - 1}")
        if not np.all(np.isfinite(y)) or np.any(y < 0) or np.any(y > 1):
            raise ValueError("targets must lie in [0, 1]")
        if np.any(np.isnan(a)) or np.any(np.isnan(b)):
            raise ValueError("gaps must not be NaN")
        if np.any(a < 0) or np.any(a > b):
            raise ValueError("need 0 <= a_i <= b_i")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.y.shape[0]

    @classmethod
    def lipschitz(cls, y, z, beta):
        """Instance with ``a = 0`` and ``b_i = beta (z[i+1] - z[i])`` for sorted ``z``."""
        z = np.asarray(z, dtype=np.float64)
        return cls(y, np.zeros(len(z) - 1), beta * np.diff(z))


@dataclass(frozen=True)
class BIRSolution:
    v: np.ndarray
    objective: float
    instance: BIRInstance = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class DualCoefficients:
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray


def objective(instance, v):
    return float(np.sum((np.asarray(v) - instance.y) ** 2))


def max_violation(instance, v):
    """Largest violation of the box or chain constraints (0 when feasible)."""
    v = np.asarray(v, dtype=np.float64)
    worst = max(0.0, -v.min(), v.max() - 1.0)
    if v.shape[0] > 1:
        dv = np.diff(v)
        worst = max(worst, float(np.max(instance.a - dv)), float(np.max(dv - instance.b)))
    return worst


def check_feasible(instance):
    # a >= 0 makes every feasible v non-decreasing, so the tightest packing
    # starts at 0 and climbs by a_i; it fits iff the total climb is <= 1
    total = float(np.sum(instance.a))
    if total > 1.0 + 1e-12:
        raise InfeasibleError(f"lower gaps sum to {total:.6g} > 1")


def _effective_upper(instance):
    # differences of points in [0, 1] never exceed 1, so larger b_i are inert
    return np.minimum(instance.b, 1.0)


def dualize(instance, b=None):
    if instance.n < 2:
        raise ValueError("dual form needs n >= 2")
    y, a = instance.y, instance.a
    b = instance.b if b is None else b
    c = 2.0 * (y[1:] - y[:-1]) - (a + b)
    return DualCoefficients(c=c, d=b - a, e=2.0 * y - 1.0)


def _solve_pair(y0, y1, a, b):
    # in (mean, gap) coordinates the box becomes |mean - 1/2| <= 1/2 - gap/2
    mean = 0.5 * (y0 + y1)
    diff = y1 - y0
    room = min(mean, 1.0 - mean)
    gap = diff if diff <= 2.0 * room else 0.5 * (diff + 2.0 * room)
    gap = min(max(gap, a), min(b, 1.0))
    mid = min(max(mean, 0.5 * gap), 1.0 - 0.5 * gap)
    return np.array([mid - 0.5 * gap, mid + 0.5 * gap])


def primal_from_dual(instance, f):
    """Recover v from the dual vector (length n - 1)."""
    e = 2.0 * instance.y - 1.0
    ff = np.concatenate([[0.0], f, [0.0]])
    return instance.y - 0.5 * np.clip(np.diff(ff), e - 1.0, e + 1.0)


def solve_dual(instance, b=None, tau0=DEFAULT_TAU0):
    """Run the dual DP; returns ``(f, peak_piece_count)``."""
    dual = dualize(instance, b)
    rows = K.dp_capacity(instance.n)
    ints = np.zeros((rows, K.N_INT), dtype=np.int64)
    flts = np.zeros((rows, K.N_FLT), dtype=np.float64)
    return K.bir_dual_dp(dual.c, dual.d, dual.e, tau0, ints, flts)


def _finish(instance, v):
    v = np.clip(v, 0.0, 1.0)
    if v.shape[0] > 1 and max_violation(instance, v) > 0:
        K.chain_repair(v, instance.a, _effective_upper(instance))
        np.clip(v, 0.0, 1.0, out=v)
    return BIRSolution(v=v, objective=objective(instance, v), instance=instance)


def solve_bir(instance):
    """Exact BIR solution in O(n log^2 n) time."""
    check_feasible(instance)
    n = instance.n
    if n == 1:
        v = np.clip(instance.y, 0.0, 1.0)
    elif n == 2:
        v = _solve_pair(instance.y[0], instance.y[1], instance.a[0], instance.b[0])
    else:
        f, _ = solve_dual(instance, _effective_upper(instance))
        v = primal_from_dual(instance, f)
    return _finish(instance, v)


# ---------------------------------------------------------------- reference


FREE, AT_LOWER, AT_UPPER, EQUAL = 0, 1, 2, 3
BOX_FREE, BOX_ZERO, BOX_ONE = 0, 1, 2


def _solve_active_set(y, a, b, links, box):
    """Minimize over v with the guessed constraints held as equalities.

    Tight links glue neighbours into blocks with fixed offsets; a block is
    either free (its level is a mean) or pinned by one box constraint.
    Returns ``(v, link_mult, box_mult)`` or None when a block carries more
    than one pin. Multiplier signs: a link at its lower bound needs
    ``link_mult >= 0``, at its upper bound ``<= 0``; a pin at 0 needs
    ``box_mult <= 0``, at 1 ``>= 0``.
    """
    n = y.size
    tight = links != FREE
    step = np.where((links == AT_LOWER) | (links == EQUAL), a, b) * tight
    bid = np.concatenate([[0], np.cumsum(~tight)])
    n_blocks = bid[-1] + 1
    cum = np.concatenate([[0.0], np.cumsum(step)])
    starts = np.flatnonzero(np.concatenate([[True], ~tight]))
    off = cum - cum[starts][bid]
    pinned = box != BOX_FREE
    pins = np.bincount(bid, weights=pinned, minlength=n_blocks)
    if np.any(pins > 1):
        return None
    level = np.bincount(bid, weights=y - off, minlength=n_blocks) / np.bincount(bid, minlength=n_blocks)
    pin_at = np.full(n_blocks, n, dtype=np.int64)
    idx = np.flatnonzero(pinned)
    pin_at[bid[idx]] = idx
    target = np.where(box[idx] == BOX_ONE, 1.0, 0.0)
    level[bid[idx]] = target - off[idx]
    v = level[bid] + off
    r = v - y
    cr = np.cumsum(r)
    before = np.concatenate([[0.0], cr])[starts][bid]
    prefix = cr - before
    total = np.bincount(bid, weights=r, minlength=n_blocks)
    j = np.arange(n)
    flow = np.where(j >= pin_at[bid], total[bid] - prefix, -prefix)
    link_mult = np.where(tight, flow[:-1], 0.0)
    box_mult = np.where(pinned, -total[bid], 0.0)
    return v, link_mult, box_mult


def _active_set_from(instance, b, x, slack):
    a = instance.a
    dv = np.diff(x)
    links = np.full(instance.n - 1, FREE, dtype=np.int8)
    links[dv <= a + slack] = AT_LOWER
    links[dv >= b - slack] = AT_UPPER
    links[b - a <= 0] = EQUAL
    box = np.full(instance.n, BOX_FREE, dtype=np.int8)
    box[x <= slack] = BOX_ZERO
    box[x >= 1 - slack] = BOX_ONE
    return links, box


def _polish(instance, b, x, slack, max_rounds=None, tol=1e-11):
    """Active-set refinement started from an approximate solution.

    Violated constraints are added first; once the candidate is feasible,
    the tight link with the most wrong-signed multiplier in each block is
    released (releasing all of them at once tends to cycle). Returns an
    exact KKT point or None.
    """
    y, a = instance.y, instance.a
    links, box = _active_set_from(instance, b, x, slack)
    if max_rounds is None:
        max_rounds = 4 * instance.n + 200
    for _ in range(max_rounds):
        sol = _solve_active_set(y, a, b, links, box)
        if sol is None:
            return None
        v, lm, bm = sol
        dv = np.diff(v)
        lo = (links == FREE) & (dv < a - tol)
        hi = (links == FREE) & (dv > b + tol)
        zlo = (box == BOX_FREE) & (v < -tol)
        zhi = (box == BOX_FREE) & (v > 1 + tol)
        if lo.any() or hi.any() or zlo.any() or zhi.any():
            links[lo] = AT_LOWER
            links[hi] = AT_UPPER
            box[zlo] = BOX_ZERO
            box[zhi] = BOX_ONE
            continue
        wrong = np.where(links == AT_LOWER, -lm, np.where(links == AT_UPPER, lm, -np.inf))
        wrong_box = np.where(box == BOX_ZERO, bm, np.where(box == BOX_ONE, -bm, -np.inf))
        if not (wrong > tol).any() and not (wrong_box > tol).any():
            return v
        block = np.concatenate([[0], np.cumsum(links == FREE)])[:-1]
        order = np.lexsort((-wrong, block))
        lead = np.ones(order.size, dtype=bool)
        lead[1:] = block[order][1:] != block[order][:-1]
        pick = order[lead]
        links[pick[wrong[pick] > tol]] = FREE
        box[wrong_box > tol] = BOX_FREE
    return None


def solve_bir_reference(instance, tol=1e-12, max_sweeps=2_000_000):
    """Independent solver: Dykstra alternating projections, then active-set polish.

    The projections give an approximate point; the polish identifies the
    active constraints and returns the point satisfying the KKT conditions
    (feasible, stationary, multipliers of the right sign) to ``tol``.
    """
    check_feasible(instance)
    n = instance.n
    if n == 1:
        v = np.clip(instance.y, 0.0, 1.0)
        return BIRSolution(v=v, objective=objective(instance, v), instance=instance)
    b = _effective_upper(instance)
    x = np.empty(n)
    stage_tol = 1e-4
    while True:
        sweeps, converged = K.dykstra_bir(instance.y, instance.a, b, x, stage_tol, max_sweeps)
        for slack in (1e-6, 1e-9):
            cand = _polish(instance, b, x, slack)
            if cand is not None and max_violation(instance, cand) <= 1e-10:
                return BIRSolution(v=cand, objective=objective(instance, cand), instance=instance)
        if not converged:
            raise RuntimeError(f"reference solver did not converge within {max_sweeps} sweeps")
        if stage_tol <= tol:
            return BIRSolution(v=x.copy(), objective=objective(instance, x), instance=instance)
        stage_tol = max(tol, stage_tol * 1e-2)


# ---------------------------------------------------------------- certificate


def check_bir_optimality_certificate(solution, z, beta, links, y=None):
    """Minimum over admissible links of ``sum (v_i - y_i)(z_i - f(v_i))``.

    ``f`` is the generalized inverse of each link; a link is admissible when
    ``v[i+1] - v[i] <= beta (f(v[i+1]) - f(v[i]))`` for all i. Returns +inf if
    no link is admissible.
    """
    from .links import invert_link

    v = np.asarray(solution.v, dtype=np.float64)
    if y is None:
        if solution.instance is None:
            raise ValueError("labels are needed: pass y or a solution that carries its instance")
        y = solution.instance.y
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    best = np.inf
    dv = np.diff(v)
    for link in links:
        fv = invert_link(link, v)
        if np.any(dv > beta * np.diff(fv) + 1e-12):
            continue
        best = min(best, float(np.sum((v - y) * (z - fv))))
    return best


class BoundedIsotonicRegressor(RegressorMixin, BaseEstimator):
    """Lipschitz isotonic regression on 1-D inputs.

    Fits ``v`` at the sorted training inputs with ``0 <= v[i+1] - v[i] <=
    slope * (x[i+1] - x[i])`` and predicts by linear interpolation.
    """

    def __init__(self, slope=1.0):
        self.slope = slope

    def fit(self, X, y):
        from sklearn.utils.validation import check_X_y

        X, y = check_X_y(X, y, ensure_2d=False)
        x = np.asarray(X, dtype=np.float64).reshape(len(y), -1)
        if x.shape[1] != 1:
            raise ValueError("expected a single feature")
        x = x[:, 0]
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], np.asarray(y, dtype=np.float64)[order]
        ux, inv, counts = np.unique(xs, return_inverse=True, return_counts=True)
        ym = np.bincount(inv, weights=ys) / counts
        sol = solve_bir(BIRInstance.lipschitz(ym, ux, self.slope))
        self.x_ = ux
        self.v_ = sol.v
        return self

    def predict(self, X):
        check_is_fitted(self, "v_")
        x = np.asarray(X, dtype=np.float64).reshape(-1)
        return np.interp(x, self.x_, self.v_)
