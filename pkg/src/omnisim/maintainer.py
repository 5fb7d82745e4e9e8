"""Lazy-semigroup segment tree and the piece-coefficient store built on it.

The heavy lifting lives in ``_kernels``; this module wraps it with a small,
checked Python API. All indices are 0-based and ranges are inclusive.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

DEFAULT_TAU0 = 1 << 32


@dataclass(frozen=True)
class SemigroupElem:
    """Deferred shift ``add_{t,s,p,l}``; ``t == 0`` is the identity."""

    t: int = 0
    s: float = 0.0
    p: float = 0.0
    l: float = 0.0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time stamp must be non-negative")
        if self.t == 0 and (self.s != 0 or self.p != 0 or self.l != 0):
            raise ValueError("identity element must have s = p = l = 0")

    @property
    def is_identity(self):
        return self.t == 0


IDENTITY = SemigroupElem()


@dataclass(frozen=True)
class LeafState:
    k: int
    h: float


def compose(g2, g1):
    """Composition of two elements (the operation is commutative)."""
    return SemigroupElem(*K.compose.py_func(g2.t, g2.s, g2.p, g2.l, g1.t, g1.s, g1.p, g1.l))


def apply_elem(g, leaf):
    return LeafState(leaf.k, K.apply_h.py_func(g.t, g.s, g.p, g.l, leaf.k, leaf.h))


class _Storage:
    # node arrays with doubling growth; node ids stay valid across growth

    def __init__(self, capacity):
        self.ints, self.flts, self.free, self.meta, self.path = K.new_tree(max(int(capacity), 4))

    @property
    def size(self):
        return int(K.tree_size(self.ints, self.meta))

    @property
    def depth(self):
        return int(K.tree_height(self.ints, self.meta))

    def reserve(self, extra=1):
        rows = self.ints.shape[0]
        if self.size + extra < rows - 1:
            return
        new_rows = 2 * rows + extra
        ints = np.zeros((new_rows, K.N_INT), dtype=np.int64)
        flts = np.zeros((new_rows, K.N_FLT), dtype=np.float64)
        free = np.zeros(new_rows, dtype=np.int64)
        ints[:rows] = self.ints
        flts[:rows] = self.flts
        free[:rows] = self.free
        self.ints, self.flts, self.free = ints, flts, free

    def check_index(self, j, upper):
        if not 0 <= j < upper:
            raise IndexError(f"index {j} out of range for size {self.size}")


class SegmentTree:
    """Sequence of semigroup elements supporting lazy range composition.

    Backed by an AVL tree keyed by subtree size, so positions shift on
    insert and delete. Every operation touches O(log n) nodes.
    """

    def __init__(self, capacity=64):
        self._st = _Storage(capacity)

    def __len__(self):
        return self._st.size

    @property
    def depth(self):
        return self._st.depth

    def access(self, j):
        j = int(j)
        self._st.check_index(j, len(self))
        t, s, p, l, _, _ = K.tree_access(self._st.ints, self._st.flts, self._st.meta, j)
        return SemigroupElem(int(t), s, p, l) if t else IDENTITY

    def apply_range(self, g, l, r):
        l, r = int(l), int(r)
        if l > r:
            return
        self._st.check_index(l, len(self))
        self._st.check_index(r, len(self))
        if g.is_identity:
            return
        st = self._st
        K.tree_apply_range(st.ints, st.flts, st.meta, st.path, l, r, g.t, g.s, g.p, g.l)

    def insert(self, j, g=IDENTITY):
        j = int(j)
        self._st.check_index(j, len(self) + 1)
        self._st.reserve()
        st = self._st
        K.tree_insert(st.ints, st.flts, st.free, st.meta, st.path, j, g.t, g.s, g.p, g.l, 0, 0.0)

    def delete(self, j):
        j = int(j)
        self._st.check_index(j, len(self))
        st = self._st
        K.tree_delete(st.ints, st.flts, st.free, st.meta, st.path, j)

    def to_list(self):
        return [self.access(j) for j in range(len(self))]


class BIRPartialMaintainer:
    """Coefficient store for the pieces of a convex piecewise-quadratic function.

    Each piece ``alpha * f**2 + beta * f`` is kept as a leaf state ``(k, h)``
    with ``alpha = 1 / (2 m)``, ``beta = h / m`` and ``m = tau + 1 - k``;
    ``k = 0`` marks a linear piece with ``beta = h``. The global update
    ``(alpha, beta) -> (alpha, beta) / (2 alpha + 1)`` is then a counter bump.
    """

    def __init__(self, tau0=DEFAULT_TAU0, capacity=64):
        if tau0 < 1:
            raise ValueError("tau0 must be positive")
        self._st = _Storage(capacity)
        self.tau = int(tau0)

    def __len__(self):
        return self._st.size

    @property
    def depth(self):
        return self._st.depth

    def state(self, j):
        j = int(j)
        self._st.check_index(j, len(self))
        k, h = K.leaf_state(self._st.ints, self._st.flts, self._st.meta, j)
        return LeafState(int(k), float(h))

    def query(self, j):
        """Return ``(alpha, beta)`` of piece j."""
        leaf = self.state(j)
        if leaf.k == 0:
            return 0.0, leaf.h
        m = self.tau + 1 - leaf.k
        if m <= 0:
            raise ValueError(f"piece {j} has no finite coefficients at this time")
        return 1.0 / (2 * m), leaf.h / m

    def add(self, l, r, delta):
        """Shift beta by ``delta`` on pieces l..r."""
        l, r = int(l), int(r)
        if l > r or delta == 0:
            return
        self._st.check_index(l, len(self))
        self._st.check_index(r, len(self))
        st = self._st
        K.tree_apply_range(st.ints, st.flts, st.meta, st.path, l, r, self.tau, delta, 0.0, delta)

    def insert_piece(self, j, alpha, beta):
        j = int(j)
        self._st.check_index(j, len(self) + 1)
        if alpha == 0:
            k, h = 0, float(beta)
        else:
            if not alpha > 0 or not math.isfinite(alpha):
                raise ValueError(f"alpha must be 0 or 1/(2m), got {alpha}")
            m_real = 1.0 / (2.0 * alpha)
            m = int(round(m_real))
            if m < 1 or abs(1.0 / (2 * m) - alpha) > 1e-9 * alpha:
                raise ValueError(f"alpha must be 0 or 1/(2m) for a positive integer m, got {alpha}")
            k = self.tau + 1 - m
            if k < 1:
                raise ValueError("piece too flat for the current time counter")
            h = float(beta) * m
        self._st.reserve()
        st = self._st
        K.tree_insert(st.ints, st.flts, st.free, st.meta, st.path, j, 0, 0.0, 0.0, 0.0, k, h)

    def delete_piece(self, j):
        j = int(j)
        self._st.check_index(j, len(self))
        st = self._st
        K.tree_delete(st.ints, st.flts, st.free, st.meta, st.path, j)

    def update_all(self):
        self.tau += 1

    def inv_update_all(self):
        self.tau -= 1

    def coefficients(self):
        return [self.query(j) for j in range(len(self))]

    def dump_json(self):
        rows = [{"index": j, "alpha": a, "beta": b} for j, (a, b) in enumerate(self.coefficients())]
        return json.dumps(rows)
