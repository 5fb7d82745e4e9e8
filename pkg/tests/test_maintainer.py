import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omnisim.maintainer import (IDENTITY, BIRPartialMaintainer, LeafState, SegmentTree, SemigroupElem,
                                apply_elem, compose)


def rand_elem(rng, integer=False):
    if rng.random() < 0.1:
        return IDENTITY
    t = int(rng.integers(1, 60))
    if integer:
        s, p, l = (float(v) for v in rng.integers(-9, 10, size=3))
    else:
        s, p, l = rng.normal(size=3)
    return SemigroupElem(t, s, p, l)


def assert_elem_close(a, b, tol=1e-8):
    assert a.t == b.t
    assert abs(a.s - b.s) <= tol and abs(a.p - b.p) <= tol and abs(a.l - b.l) <= tol


def depth_bound(n):
    return 2 * math.log2(max(n, 1)) + 2


# ---------------------------------------------------------------- semigroup


def test_compose_examples():
    g = SemigroupElem(3, 2.0, 0.0, 2.0)
    assert compose(IDENTITY, g) == g
    assert compose(g, IDENTITY) == g
    assert compose(g, SemigroupElem(2, 1.0, 0.0, 1.0)) == SemigroupElem(2, 3.0, 2.0, 3.0)


def test_apply_examples():
    g = SemigroupElem(2, 1.0, 0.0, 5.0)
    assert apply_elem(IDENTITY, LeafState(2, 3.0)) == LeafState(2, 3.0)
    assert apply_elem(g, LeafState(0, 3.0)) == LeafState(0, 8.0)
    assert apply_elem(g, LeafState(2, 3.0)) == LeafState(2, 4.0)


def test_identity_invariant_enforced():
    with pytest.raises(ValueError):
        SemigroupElem(0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        SemigroupElem(-1)


def test_semigroup_laws_on_random_triples():
    rng = np.random.default_rng(0)
    for _ in range(100_000):
        a, b, c = (rand_elem(rng, integer=True) for _ in range(3))
        assert compose(compose(a, b), c) == compose(a, compose(b, c))
        assert compose(a, b) == compose(b, a)
        assert compose(a, IDENTITY) == a


def test_composition_acts_like_sequential_application():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        g1, g2 = rand_elem(rng, True), rand_elem(rng, True)
        leaf = LeafState(int(rng.integers(0, 5)), float(rng.integers(-9, 10)))
        assert apply_elem(compose(g2, g1), leaf) == apply_elem(g2, apply_elem(g1, leaf))


# ---------------------------------------------------------------- segment tree


def test_segment_tree_examples():
    tree = SegmentTree()
    g = SemigroupElem(4, 1.5, -2.0, 0.5)
    for j in range(5):
        tree.insert(j, IDENTITY)
    tree.insert(2, g)
    assert tree.access(2) == g
    before = tree.to_list()
    tree.apply_range(IDENTITY, 0, len(tree) - 1)
    assert tree.to_list() == before


def test_segment_tree_index_errors():
    tree = SegmentTree()
    tree.insert(0)
    with pytest.raises(IndexError):
        tree.access(1)
    with pytest.raises(IndexError):
        tree.insert(3)
    with pytest.raises(IndexError):
        tree.delete(-1)
    with pytest.raises(IndexError):
        tree.apply_range(SemigroupElem(1, 1.0), 0, 1)


def run_tree_sequence(rng, max_size=256):
    tree, naive = SegmentTree(), []
    size0 = int(min(max_size, rng.geometric(0.05)))
    for j in range(size0):
        g = rand_elem(rng)
        tree.insert(j, g)
        naive.insert(j, g)
    for _ in range(int(rng.integers(1, 30))):
        op = rng.random()
        n = len(naive)
        if op < 0.3 and n < max_size:
            j = int(rng.integers(0, n + 1))
            g = rand_elem(rng)
            tree.insert(j, g)
            naive.insert(j, g)
        elif op < 0.5 and n > 0:
            j = int(rng.integers(0, n))
            tree.delete(j)
            del naive[j]
        elif op < 0.85 and n > 0:
            l, r = sorted(int(v) for v in rng.integers(0, n, size=2))
            g = rand_elem(rng)
            tree.apply_range(g, l, r)
            naive[l:r + 1] = [compose(g, e) for e in naive[l:r + 1]]
        elif n > 0:
            j = int(rng.integers(0, n))
            assert_elem_close(tree.access(j), naive[j])
    assert len(tree) == len(naive)
    assert tree.depth <= depth_bound(len(tree))
    for a, b in zip(tree.to_list(), naive):
        assert_elem_close(a, b)


def test_segment_tree_matches_naive():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        run_tree_sequence(rng)


def test_segment_tree_depth_large():
    tree = SegmentTree()
    for j in range(5000):
        tree.insert(j // 2)
    assert tree.depth <= depth_bound(len(tree))
    for _ in range(2500):
        tree.delete(0)
    assert tree.depth <= depth_bound(len(tree))


# ---------------------------------------------------------------- maintainer


class NaiveStore:
    """Eager reference: applies every transform to every stored coefficient pair."""

    def __init__(self):
        self.pieces = []

    def insert(self, j, alpha, beta):
        self.pieces.insert(j, [alpha, beta])

    def delete(self, j):
        del self.pieces[j]

    def add(self, l, r, delta):
        for piece in self.pieces[l:r + 1]:
            piece[1] += delta

    def update(self):
        self.pieces = [[a / (2 * a + 1), b / (2 * a + 1)] for a, b in self.pieces]

    def inv_update(self):
        self.pieces = [[a / (1 - 2 * a), b / (1 - 2 * a)] for a, b in self.pieces]


def rand_alpha(rng):
    return 0.0 if rng.random() < 0.3 else 1.0 / (2 * int(rng.integers(2, 40)))


def assert_store_close(store, naive, tol=1e-8):
    got = store.coefficients()
    assert len(got) == len(naive.pieces)
    for (a, b), (na, nb) in zip(got, naive.pieces):
        assert abs(a - na) <= tol and abs(b - nb) <= tol


def run_store_sequence(rng, max_size=256):
    store, naive = BIRPartialMaintainer(tau0=1000), NaiveStore()
    size0 = int(min(max_size, rng.geometric(0.05)))
    for j in range(size0):
        a, b = rand_alpha(rng), float(rng.normal())
        store.insert_piece(j, a, b)
        naive.insert(j, a, b)
    for _ in range(int(rng.integers(1, 30))):
        op = rng.random()
        n = len(naive.pieces)
        if op < 0.2 and n < max_size:
            j = int(rng.integers(0, n + 1))
            a, b = rand_alpha(rng), float(rng.normal())
            store.insert_piece(j, a, b)
            naive.insert(j, a, b)
        elif op < 0.35 and n > 0:
            j = int(rng.integers(0, n))
            store.delete_piece(j)
            naive.delete(j)
        elif op < 0.6 and n > 0:
            l, r = sorted(int(v) for v in rng.integers(0, n, size=2))
            delta = float(rng.normal())
            store.add(l, r, delta)
            naive.add(l, r, delta)
        elif op < 0.85:
            store.update_all()
            naive.update()
        elif all(a < 0.25 for a, _ in naive.pieces):
            store.inv_update_all()
            naive.inv_update()
    assert store.depth <= depth_bound(len(store))
    assert_store_close(store, naive)


def test_maintainer_matches_naive():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        run_store_sequence(rng)


def test_maintainer_examples():
    store = BIRPartialMaintainer()
    store.insert_piece(0, 0.5, 1.0)
    store.insert_piece(1, 0.0, 2.5)
    store.update_all()
    assert store.query(0) == pytest.approx((0.25, 0.5))
    assert store.query(1) == (0.0, 2.5)
    store.inv_update_all()
    assert store.query(0) == (0.5, 1.0)


def test_update_round_trip_is_exact():
    rng = np.random.default_rng(4)
    store = BIRPartialMaintainer(tau0=500)
    for j in range(100):
        store.insert_piece(j, rand_alpha(rng), float(rng.normal()))
    store.add(10, 60, 0.37)
    before = store.coefficients()
    for _ in range(7):
        store.update_all()
    for _ in range(7):
        store.inv_update_all()
    assert store.coefficients() == before
    store.inv_update_all()
    store.update_all()
    assert store.coefficients() == before


@given(st.integers(1, 10_000))
def test_alpha_form_enforced(m):
    store = BIRPartialMaintainer()
    store.insert_piece(0, 1.0 / (2 * m), 0.0)
    a, _ = store.query(0)
    assert abs(a - 1.0 / (2 * m)) <= 1e-9 * a
    with pytest.raises(ValueError):
        store.insert_piece(0, 1.0 / (2 * m + 0.5), 0.0)


def test_dump_json():
    store = BIRPartialMaintainer()
    store.insert_piece(0, 0.25, 1.0)
    rows = json.loads(store.dump_json())
    assert rows == [{"index": 0, "alpha": 0.25, "beta": 1.0}]
