"""Compiled kernels: lazy-semigroup AVL tree and the bounded isotonic regression DP.

Tree storage is a pair of 2-D arrays indexed by node id (0 is the nil node):
``ints[node, field]`` and ``flts[node, field]``. Positions are 0-based.

A semigroup element is ``(t, s, p, l)`` with ``t = 0`` meaning identity. A leaf
state is ``(k, h)``; ``k = 0`` marks a linear piece, otherwise the piece has
quadratic coefficient ``1 / (2 m)`` with ``m = tau + 1 - k`` and linear
coefficient ``h / m``. ``m = 0`` encodes a vertical piece of the derivative
graph, which turns into the ``f**2 / 2`` piece after one update.
"""

import numpy as np
from numba import njit
from numba.core import cgutils
from numba.extending import intrinsic

# integer fields
LEFT, RIGHT, HEIGHT, SIZE, ET, TT, BK, LMK, RMK = range(9)
N_INT = 9
# float fields
ES, EP, EL, TS, TP, TL, BH, LMH, RMH = range(9)
N_FLT = 9
# meta fields
ROOT, NEXT, FREE_TOP = range(3)
N_META = 3

MAX_DEPTH = 96


@njit(cache=True)
def compose(t1, s1, p1, l1, t2, s2, p2, l2):
    if t1 == 0:
        return t2, s2, p2, l2
    if t2 == 0:
        return t1, s1, p1, l1
    if t1 <= t2:
        return t1, s1 + s2, p1 + p2 + (t2 - t1) * s2, l1 + l2
    return t2, s1 + s2, p1 + p2 + (t1 - t2) * s1, l1 + l2


@njit(cache=True)
def apply_h(t, s, p, l, k, h):
    if t == 0:
        return h
    if k == 0:
        return h + l
    return (t + 1 - k) * s + p + h


@intrinsic
def _borrow(typingctx, arr):
    # view without a meminfo: helper calls then skip atomic refcounting.
    # The caller must keep the owning array alive.
    def codegen(context, builder, sig, args):
        src = context.make_array(sig.args[0])(context, builder, args[0])
        dst = context.make_array(sig.return_type)(context, builder)
        for name in ("nitems", "itemsize", "data", "shape", "strides"):
            setattr(dst, name, getattr(src, name))
        dst.meminfo = cgutils.get_null_value(dst.meminfo.type)
        dst.parent = cgutils.get_null_value(dst.parent.type)
        return dst._getvalue()
    return arr(arr), codegen


# ---------------------------------------------------------------- tree


def new_tree(capacity):
    cap = int(capacity) + 1
    ints = np.zeros((cap, N_INT), dtype=np.int64)
    flts = np.zeros((cap, N_FLT), dtype=np.float64)
    free = np.zeros(cap, dtype=np.int64)
    meta = np.zeros(N_META, dtype=np.int64)
    meta[NEXT] = 1
    path = np.zeros((3, 4 * MAX_DEPTH), dtype=np.int64)
    return ints, flts, free, meta, path


@njit(cache=True)
def _apply_node(ints, flts, x, t, s, p, l):
    a, b, c, d = compose(t, s, p, l, ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL])
    ints[x, ET] = a
    flts[x, ES] = b
    flts[x, EP] = c
    flts[x, EL] = d
    a, b, c, d = compose(t, s, p, l, ints[x, TT], flts[x, TS], flts[x, TP], flts[x, TL])
    ints[x, TT] = a
    flts[x, TS] = b
    flts[x, TP] = c
    flts[x, TL] = d
    flts[x, LMH] = apply_h(t, s, p, l, ints[x, LMK], flts[x, LMH])
    flts[x, RMH] = apply_h(t, s, p, l, ints[x, RMK], flts[x, RMH])


@njit(cache=True)
def _push(ints, flts, x):
    t = ints[x, TT]
    if t != 0:
        _push_tag(ints, flts, x, t)


@njit(cache=True)
def _push_tag(ints, flts, x, t):
    s = flts[x, TS]
    p = flts[x, TP]
    l = flts[x, TL]
    c = ints[x, LEFT]
    if c != 0:
        _apply_node(ints, flts, c, t, s, p, l)
    c = ints[x, RIGHT]
    if c != 0:
        _apply_node(ints, flts, c, t, s, p, l)
    ints[x, TT] = 0
    flts[x, TS] = 0.0
    flts[x, TP] = 0.0
    flts[x, TL] = 0.0


@njit(cache=True)
def _pull(ints, flts, x):
    # requires the tag of x to be the identity
    lc = ints[x, LEFT]
    rc = ints[x, RIGHT]
    hl = ints[lc, HEIGHT]
    hr = ints[rc, HEIGHT]
    ints[x, HEIGHT] = 1 + (hl if hl > hr else hr)
    ints[x, SIZE] = 1 + ints[lc, SIZE] + ints[rc, SIZE]
    if lc != 0:
        ints[x, LMK] = ints[lc, LMK]
        flts[x, LMH] = flts[lc, LMH]
    else:
        ints[x, LMK] = ints[x, BK]
        flts[x, LMH] = apply_h(ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL],
                               ints[x, BK], flts[x, BH])
    if rc != 0:
        ints[x, RMK] = ints[rc, RMK]
        flts[x, RMH] = flts[rc, RMH]
    else:
        ints[x, RMK] = ints[x, BK]
        flts[x, RMH] = apply_h(ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL],
                               ints[x, BK], flts[x, BH])


@njit(cache=True)
def _rot_right(ints, flts, x):
    y = ints[x, LEFT]
    _push(ints, flts, x)
    _push(ints, flts, y)
    ints[x, LEFT] = ints[y, RIGHT]
    ints[y, RIGHT] = x
    _pull(ints, flts, x)
    _pull(ints, flts, y)
    return y


@njit(cache=True)
def _rot_left(ints, flts, x):
    y = ints[x, RIGHT]
    _push(ints, flts, x)
    _push(ints, flts, y)
    ints[x, RIGHT] = ints[y, LEFT]
    ints[y, LEFT] = x
    _pull(ints, flts, x)
    _pull(ints, flts, y)
    return y


@njit(cache=True)
def _rotate(ints, flts, x, bal):
    lc = ints[x, LEFT]
    rc = ints[x, RIGHT]
    if bal > 1:
        if ints[ints[lc, LEFT], HEIGHT] < ints[ints[lc, RIGHT], HEIGHT]:
            ints[x, LEFT] = _rot_left(ints, flts, lc)
        return _rot_right(ints, flts, x)
    if ints[ints[rc, RIGHT], HEIGHT] < ints[ints[rc, LEFT], HEIGHT]:
        ints[x, RIGHT] = _rot_right(ints, flts, rc)
    return _rot_left(ints, flts, x)


@njit(cache=True)
def _alloc(ints, flts, free, meta):
    if meta[FREE_TOP] > 0:
        meta[FREE_TOP] -= 1
        x = free[meta[FREE_TOP]]
    else:
        x = meta[NEXT]
        if x >= ints.shape[0]:
            raise IndexError("tree capacity exhausted")
        meta[NEXT] += 1
    return x


@njit(cache=True)
def _release(ints, flts, free, meta, x):
    ints[x, :] = 0
    flts[x, :] = 0.0
    free[meta[FREE_TOP]] = x
    meta[FREE_TOP] += 1


@njit(cache=True)
def tree_size(ints, meta):
    return ints[meta[ROOT], SIZE]


@njit(cache=True)
def tree_height(ints, meta):
    return ints[meta[ROOT], HEIGHT]


@njit(cache=True)
def tree_insert(ints, flts, free, meta, path, pos, t, s, p, l, k, h):
    """Insert a node so that it ends up at position ``pos``."""
    x = meta[ROOT]
    depth = 0
    while x != 0:
        if ints[x, TT] != 0:
            _push_tag(ints, flts, x, ints[x, TT])
        lc = ints[x, LEFT]
        ls = ints[lc, SIZE]
        path[0, depth] = x
        if pos <= ls:
            path[1, depth] = 0
            x = lc
        else:
            pos -= ls + 1
            path[1, depth] = 1
            x = ints[x, RIGHT]
        depth += 1
    n = _alloc(ints, flts, free, meta)
    eh = apply_h(t, s, p, l, k, h)
    ints[n, ET] = t
    flts[n, ES] = s
    flts[n, EP] = p
    flts[n, EL] = l
    ints[n, BK] = k
    flts[n, BH] = h
    ints[n, HEIGHT] = 1
    ints[n, SIZE] = 1
    ints[n, LMK] = k
    ints[n, RMK] = k
    flts[n, LMH] = eh
    flts[n, RMH] = eh
    child = n
    for i in range(depth - 1, -1, -1):
        q = path[0, i]
        # q carries no tag here, so child aggregates are already in its frame
        if path[1, i] == 0:
            ints[q, LEFT] = child
            ints[q, LMK] = ints[child, LMK]
            flts[q, LMH] = flts[child, LMH]
        else:
            ints[q, RIGHT] = child
            ints[q, RMK] = ints[child, RMK]
            flts[q, RMH] = flts[child, RMH]
        ints[q, SIZE] += 1
        hl = ints[ints[q, LEFT], HEIGHT]
        hr = ints[ints[q, RIGHT], HEIGHT]
        ints[q, HEIGHT] = 1 + (hl if hl > hr else hr)
        bal = hl - hr
        if bal > 1 or bal < -1:
            child = _rotate(ints, flts, q, bal)
        else:
            child = q
    meta[ROOT] = child


@njit(cache=True)
def tree_delete(ints, flts, free, meta, path, pos):
    x = meta[ROOT]
    depth = 0
    while True:
        if ints[x, TT] != 0:
            _push_tag(ints, flts, x, ints[x, TT])
        ls = ints[ints[x, LEFT], SIZE]
        path[0, depth] = x
        if pos < ls:
            path[1, depth] = 0
            x = ints[x, LEFT]
        elif pos > ls:
            pos -= ls + 1
            path[1, depth] = 1
            x = ints[x, RIGHT]
        else:
            break
        depth += 1
    target = x
    if ints[x, LEFT] == 0 or ints[x, RIGHT] == 0:
        child = ints[x, LEFT] if ints[x, LEFT] != 0 else ints[x, RIGHT]
        _release(ints, flts, free, meta, x)
        start = depth - 1
    else:
        path[1, depth] = 1
        depth += 1
        y = ints[x, RIGHT]
        while True:
            if ints[y, TT] != 0:
                _push_tag(ints, flts, y, ints[y, TT])
            path[0, depth] = y
            if ints[y, LEFT] == 0:
                break
            path[1, depth] = 0
            depth += 1
            y = ints[y, LEFT]
        ints[target, ET] = ints[y, ET]
        flts[target, ES] = flts[y, ES]
        flts[target, EP] = flts[y, EP]
        flts[target, EL] = flts[y, EL]
        ints[target, BK] = ints[y, BK]
        flts[target, BH] = flts[y, BH]
        child = ints[y, RIGHT]
        _release(ints, flts, free, meta, y)
        start = depth - 1
    for i in range(start, -1, -1):
        q = path[0, i]
        if path[1, i] == 0:
            ints[q, LEFT] = child
        else:
            ints[q, RIGHT] = child
        _pull(ints, flts, q)
        bal = ints[ints[q, LEFT], HEIGHT] - ints[ints[q, RIGHT], HEIGHT]
        if bal > 1 or bal < -1:
            child = _rotate(ints, flts, q, bal)
        else:
            child = q
    meta[ROOT] = child


@njit(cache=True)
def tree_apply_suffix(ints, flts, meta, path, l, t, s, p, q):
    """Compose ``(t, s, p, q)`` onto every element at positions ``l`` and beyond."""
    x = meta[ROOT]
    if x == 0 or t == 0:
        return
    if l <= 0:
        _apply_node(ints, flts, x, t, s, p, q)
        return
    depth = 0
    while x != 0:
        if ints[x, TT] != 0:
            _push_tag(ints, flts, x, ints[x, TT])
        path[0, depth] = x
        depth += 1
        lc = ints[x, LEFT]
        ls = ints[lc, SIZE]
        if l <= ls:
            a, b, c, d = compose(t, s, p, q, ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL])
            ints[x, ET] = a
            flts[x, ES] = b
            flts[x, EP] = c
            flts[x, EL] = d
            rc = ints[x, RIGHT]
            if rc != 0:
                _apply_node(ints, flts, rc, t, s, p, q)
            if l == ls:
                break
            x = lc
        else:
            l -= ls + 1
            x = ints[x, RIGHT]
    for i in range(depth - 1, -1, -1):
        _pull(ints, flts, path[0, i])


@njit(cache=True)
def tree_apply_range(ints, flts, meta, path, l, r, t, s, p, q):
    """Compose ``(t, s, p, q)`` onto every element at positions ``l..r``."""
    if l > r or t == 0 or meta[ROOT] == 0:
        return
    if l <= 0 and r >= ints[meta[ROOT], SIZE] - 1:
        _apply_node(ints, flts, meta[ROOT], t, s, p, q)
        return
    stack_x = path[0]
    stack_lo = path[1]
    seen = path[2]
    top = 1
    n_seen = 0
    stack_x[0] = meta[ROOT]
    stack_lo[0] = 0
    while top > 0:
        top -= 1
        x = stack_x[top]
        lo = stack_lo[top]
        hi = lo + ints[x, SIZE] - 1
        if r < lo or l > hi:
            continue
        if l <= lo and hi <= r:
            _apply_node(ints, flts, x, t, s, p, q)
            continue
        _push(ints, flts, x)
        seen[n_seen] = x
        n_seen += 1
        mid = lo + ints[ints[x, LEFT], SIZE]
        if l <= mid and mid <= r:
            a, b, c, d = compose(t, s, p, q, ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL])
            ints[x, ET] = a
            flts[x, ES] = b
            flts[x, EP] = c
            flts[x, EL] = d
        if ints[x, LEFT] != 0:
            stack_x[top] = ints[x, LEFT]
            stack_lo[top] = lo
            top += 1
        if ints[x, RIGHT] != 0:
            stack_x[top] = ints[x, RIGHT]
            stack_lo[top] = mid + 1
            top += 1
    # children were seen after their parents
    for i in range(n_seen - 1, -1, -1):
        _pull(ints, flts, seen[i])


@njit(cache=True)
def tree_access(ints, flts, meta, pos):
    """Return ``(t, s, p, l, k, h)``: the effective element at ``pos`` and its base state."""
    x = meta[ROOT]
    gt = 0
    gs = 0.0
    gp = 0.0
    gl = 0.0
    while True:
        ls = ints[ints[x, LEFT], SIZE]
        if pos == ls:
            a, b, c, d = compose(gt, gs, gp, gl, ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL])
            return a, b, c, d, ints[x, BK], flts[x, BH]
        gt, gs, gp, gl = compose(gt, gs, gp, gl, ints[x, TT], flts[x, TS], flts[x, TP], flts[x, TL])
        if pos < ls:
            x = ints[x, LEFT]
        else:
            pos -= ls + 1
            x = ints[x, RIGHT]


@njit(cache=True)
def leaf_state(ints, flts, meta, pos):
    t, s, p, l, k, h = tree_access(ints, flts, meta, pos)
    return k, apply_h(t, s, p, l, k, h)


@njit(cache=True)
def tree_collect(ints, flts, meta, out_t, out_s, out_p, out_l, out_k, out_h):
    """In-order dump of effective elements and base states."""
    root = meta[ROOT]
    if root == 0:
        return 0
    nodes = np.empty(MAX_DEPTH, dtype=np.int64)
    gts = np.empty(MAX_DEPTH, dtype=np.int64)
    gss = np.empty(MAX_DEPTH, dtype=np.float64)
    gps = np.empty(MAX_DEPTH, dtype=np.float64)
    gls = np.empty(MAX_DEPTH, dtype=np.float64)
    top = 0
    x = root
    gt = 0
    gs = 0.0
    gp = 0.0
    gl = 0.0
    idx = 0
    while True:
        while x != 0:
            nodes[top] = x
            gts[top] = gt
            gss[top] = gs
            gps[top] = gp
            gls[top] = gl
            top += 1
            gt, gs, gp, gl = compose(gt, gs, gp, gl, ints[x, TT], flts[x, TS], flts[x, TP], flts[x, TL])
            x = ints[x, LEFT]
        if top == 0:
            break
        top -= 1
        x = nodes[top]
        gt = gts[top]
        gs = gss[top]
        gp = gps[top]
        gl = gls[top]
        a, b, c, d = compose(gt, gs, gp, gl, ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL])
        out_t[idx] = a
        out_s[idx] = b
        out_p[idx] = c
        out_l[idx] = d
        out_k[idx] = ints[x, BK]
        out_h[idx] = flts[x, BH]
        idx += 1
        gt, gs, gp, gl = compose(gt, gs, gp, gl, ints[x, TT], flts[x, TS], flts[x, TP], flts[x, TL])
        x = ints[x, RIGHT]
    return idx


# ---------------------------------------------------------------- pieces


@njit(cache=True)
def junction(ka, ha, kb, hb, tau):
    """Position and derivative where piece a hands over to piece b."""
    if ka != 0:
        ma = tau + 1 - ka
        if kb != 0:
            mb = tau + 1 - kb
            den = mb - ma
            if den == 0:
                # twins around the zero vertex
                return 0.0, ha / ma if ma != 0 else 0.0
            return (hb * ma - ha * mb) / den, (hb - ha) / den
        return hb * ma - ha, hb
    if kb != 0:
        mb = tau + 1 - kb
        return ha * mb - hb, ha
    return 0.0, ha


@njit(cache=True)
def search_position(ints, flts, meta, tau, xq):
    """First piece index j whose right junction lies at or beyond ``xq``.

    Returns ``(j, k, h)`` with the state of piece j.
    """
    x = meta[ROOT]
    n = ints[x, SIZE]
    ans = n - 1
    off = 0
    gt = 0
    gs = 0.0
    gp = 0.0
    gl = 0.0
    has_succ = False
    sk = 0
    sh = 0.0
    ans_k = ints[x, RMK]
    ans_h = flts[x, RMH]
    while x != 0:
        ls = ints[ints[x, LEFT], SIZE]
        r = off + ls
        a, b, c, d = compose(gt, gs, gp, gl, ints[x, ET], flts[x, ES], flts[x, EP], flts[x, EL])
        ak = ints[x, BK]
        ah = apply_h(a, b, c, d, ak, flts[x, BH])
        gt, gs, gp, gl = compose(gt, gs, gp, gl, ints[x, TT], flts[x, TS], flts[x, TP], flts[x, TL])
        rc = ints[x, RIGHT]
        if rc != 0:
            bk = ints[rc, LMK]
            bh = apply_h(gt, gs, gp, gl, bk, flts[rc, LMH])
            pos, _ = junction(ak, ah, bk, bh, tau)
            ok = pos >= xq
        elif has_succ:
            pos, _ = junction(ak, ah, sk, sh, tau)
            ok = pos >= xq
        else:
            ok = True
        if ok:
            ans = r
            ans_k = ak
            ans_h = ah
            has_succ = True
            sk = ak
            sh = ah
            x = ints[x, LEFT]
        else:
            off = r + 1
            x = rc
    return ans, ans_k, ans_h


# ---------------------------------------------------------------- BIR dynamic program


@njit(cache=True)
def _clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@njit(cache=True)
def _piece_slope(k, h, tau, f):
    if k == 0:
        return h
    return (f + h) / (tau + 1 - k)


@njit(cache=True)
def _terminal_root(ints, flts, meta, tau, c, d, e_last):
    """Zero of the subgradient of the last dual function.

    The subgradient is continuous and affine between consecutive breakpoints,
    so we walk outward from zero until it changes sign.
    """
    n = tree_size(ints, meta)
    ot = np.empty(n, dtype=np.int64)
    os_ = np.empty(n, dtype=np.float64)
    op = np.empty(n, dtype=np.float64)
    ol = np.empty(n, dtype=np.float64)
    ks = np.empty(n, dtype=np.int64)
    hs = np.empty(n, dtype=np.float64)
    tree_collect(ints, flts, meta, ot, os_, op, ol, ks, hs)
    for j in range(n):
        hs[j] = apply_h(ot[j], os_[j], op[j], ol[j], ks[j], hs[j])
    pos = np.empty(max(n - 1, 0), dtype=np.float64)
    for j in range(n - 1):
        pos[j], _ = junction(ks[j], hs[j], ks[j + 1], hs[j + 1], tau)
    lo2 = -e_last - 1.0
    hi2 = -e_last + 1.0

    j = 0
    while j < n - 1 and pos[j] < 0.0:
        j += 1
    a0 = _piece_slope(ks[j], hs[j], tau, 0.0)
    if a0 + c - d <= 0.0 <= a0 + c + d:
        return 0.0
    step = 1 if a0 + c + d < 0.0 else -1
    off = c + d if step == 1 else c - d
    x0 = 0.0
    g0 = a0 + off
    while True:
        # next breakpoint in the walking direction
        if step == 1:
            x1 = pos[j] if j < n - 1 else np.inf
            if x0 < lo2 < x1:
                x1 = lo2
            if x0 < hi2 < x1:
                x1 = hi2
        else:
            x1 = pos[j - 1] if j > 0 else -np.inf
            if x1 < lo2 < x0:
                x1 = lo2
            if x1 < hi2 < x0:
                x1 = hi2
        if np.isinf(x1):
            slope = 0.0
            if ks[j] != 0:
                slope += 1.0 / (tau + 1 - ks[j])
            if lo2 <= x0 < hi2 if step == 1 else lo2 < x0 <= hi2:
                slope += 1.0
            if slope <= 0.0:
                raise ValueError("dual problem is unbounded; instance is infeasible")
            return x0 - g0 / slope
        g1 = _piece_slope(ks[j], hs[j], tau, x1) + off + _clamp(x1, lo2, hi2)
        if g1 * step >= 0.0:
            if g1 == g0:
                return x1
            return x0 - g0 * (x1 - x0) / (g1 - g0)
        x0 = x1
        g0 = g1
        if step == 1:
            while j < n - 1 and pos[j] <= x0:
                j += 1
        else:
            while j > 0 and pos[j - 1] >= x0:
                j -= 1


def dp_capacity(n):
    return 2 * n + 17


@njit(cache=True)
def _keep_alive(*arrays):
    pass


@njit(cache=True)
def _split_and_add(ints, flts, free, meta, path, tau, c, d):
    j, k, h = search_position(ints, flts, meta, tau, 0.0)
    tree_insert(ints, flts, free, meta, path, j + 1, 0, 0.0, 0.0, 0.0, k, h)
    n = tree_size(ints, meta)
    # c - d on the prefix and c + d on the suffix
    _apply_node(ints, flts, meta[ROOT], tau, c - d, 0.0, c - d)
    tree_apply_suffix(ints, flts, meta, path, j + 1, tau, 2.0 * d, 0.0, 2.0 * d)
    return j


@njit(cache=True)
def _first_pair(ints, flts, meta, tau):
    r = meta[ROOT]
    ak = ints[r, LMK]
    ah = flts[r, LMH]
    bk, bh = leaf_state(ints, flts, meta, 1)
    _, der = junction(ak, ah, bk, bh, tau)
    return ak, ah, der


@njit(cache=True)
def _last_pair(ints, flts, meta, tau):
    r = meta[ROOT]
    bk = ints[r, RMK]
    bh = flts[r, RMH]
    ak, ah = leaf_state(ints, flts, meta, ints[r, SIZE] - 2)
    _, der = junction(ak, ah, bk, bh, tau)
    return bk, bh, der


@njit(cache=True)
def bir_dual_dp(c, d, e, tau0, own_ints, own_flts):
    """Minimize the dual objective; returns the f-vector (length n - 1) and peak piece count.

    ``own_ints`` and ``own_flts`` are zeroed node storage with at least
    ``dp_capacity(n)`` rows.
    """
    n = e.shape[0]
    m = n - 1
    f = np.zeros(m, dtype=np.float64)
    cap = own_ints.shape[0] - 1
    own_free = np.zeros(cap + 1, dtype=np.int64)
    own_meta = np.zeros(N_META, dtype=np.int64)
    own_path = np.zeros((3, 4 * MAX_DEPTH), dtype=np.int64)
    ints = _borrow(own_ints)
    flts = _borrow(own_flts)
    free = _borrow(own_free)
    meta = _borrow(own_meta)
    path = _borrow(own_path)
    meta[NEXT] = 1

    z = np.zeros(m, dtype=np.int64)
    n_left = np.zeros(m, dtype=np.int64)
    n_right = np.zeros(m, dtype=np.int64)
    ray_left = np.zeros(m, dtype=np.bool_)
    ray_right = np.zeros(m, dtype=np.bool_)
    log_start = np.zeros(m + 1, dtype=np.int64)
    log_k = np.zeros(4 * n + 8, dtype=np.int64)
    log_h = np.zeros(4 * n + 8, dtype=np.float64)
    n_log = 0
    peak = 0

    tau = tau0
    # first dual function, already in sheared form
    tree_insert(ints, flts, free, meta, path, 0, 0, 0.0, 0.0, 0.0, 0, e[0] - 1.0)
    tree_insert(ints, flts, free, meta, path, 1, 0, 0.0, 0.0, 0.0, tau, 0.0)
    tree_insert(ints, flts, free, meta, path, 2, 0, 0.0, 0.0, 0.0, 0, e[0] + 1.0)
    peak = 3
    if m > 1:
        z[0] = _split_and_add(ints, flts, free, meta, path, tau, c[0], d[0])
        peak = tree_size(ints, meta)

    for j in range(1, m):
        lo = e[j] - 1.0
        hi = e[j] + 1.0
        log_start[j] = n_log
        # vertical piece at the zero vertex of the previous function
        tree_insert(ints, flts, free, meta, path, z[j - 1] + 1, 0, 0.0, 0.0, 0.0, tau + 1, 0.0)
        cnt = 0
        while tree_size(ints, meta) >= 2:
            ak, ah, der = _first_pair(ints, flts, meta, tau)
            if der > lo:
                break
            log_k[n_log] = ak
            log_h[n_log] = ah
            n_log += 1
            tree_delete(ints, flts, free, meta, path, 0)
            cnt += 1
        n_left[j] = cnt
        if cnt > 0 and ints[meta[ROOT], LMK] != 0:
            tree_insert(ints, flts, free, meta, path, 0, 0, 0.0, 0.0, 0.0, 0, lo)
            ray_left[j] = True
        cnt = 0
        while tree_size(ints, meta) >= 2:
            bk, bh, der = _last_pair(ints, flts, meta, tau)
            if der < hi:
                break
            log_k[n_log] = bk
            log_h[n_log] = bh
            n_log += 1
            tree_delete(ints, flts, free, meta, path, tree_size(ints, meta) - 1)
            cnt += 1
        n_right[j] = cnt
        if cnt > 0 and ints[meta[ROOT], RMK] != 0:
            tree_insert(ints, flts, free, meta, path, tree_size(ints, meta), 0, 0.0, 0.0, 0.0, 0, hi)
            ray_right[j] = True
        tau += 1
        if j == m - 1:
            break
        z[j] = _split_and_add(ints, flts, free, meta, path, tau, c[j], d[j])
        sz = tree_size(ints, meta)
        if sz > peak:
            peak = sz
        if sz > 2 * (j + 1) + 2:
            raise RuntimeError("piece count bound violated")
    log_start[m] = n_log if m > 0 else 0

    f[m - 1] = _terminal_root(ints, flts, meta, tau, c[m - 1], d[m - 1], e[n - 1])

    for j in range(m - 1, 0, -1):
        if j < m - 1:
            sz = tree_size(ints, meta)
            cj = c[j]
            dj = d[j]
            _apply_node(ints, flts, meta[ROOT], tau, dj - cj, 0.0, dj - cj)
            tree_apply_suffix(ints, flts, meta, path, z[j] + 1, tau, -2.0 * dj, 0.0, -2.0 * dj)
            tree_delete(ints, flts, free, meta, path, z[j] + 1)
        # recover the previous coordinate from the sheared function
        x = f[j]
        sz = tree_size(ints, meta)
        idx, ak, ah = search_position(ints, flts, meta, tau, x)
        if ray_left[j] and idx == 0:
            bk, bh = leaf_state(ints, flts, meta, 1)
            pos, _ = junction(ak, ah, bk, bh, tau)
            f[j - 1] = pos - (e[j] - 1.0)
        elif ray_right[j] and idx == sz - 1:
            pk, ph = leaf_state(ints, flts, meta, sz - 2)
            pos, _ = junction(pk, ph, ak, ah, tau)
            f[j - 1] = pos - (e[j] + 1.0)
        elif ak == 0:
            f[j - 1] = x - ah
        else:
            f[j - 1] = x - (x + ah) / (tau + 1 - ak)
        if j == 1:
            break
        # rewind to the previous function
        tau -= 1
        if ray_right[j]:
            tree_delete(ints, flts, free, meta, path, tree_size(ints, meta) - 1)
        base = log_start[j]
        nl = n_left[j]
        nr = n_right[j]
        for q in range(base + nl + nr - 1, base + nl - 1, -1):
            tree_insert(ints, flts, free, meta, path, tree_size(ints, meta), 0, 0.0, 0.0, 0.0,
                        log_k[q], log_h[q])
        if ray_left[j]:
            tree_delete(ints, flts, free, meta, path, 0)
        for q in range(base + nl - 1, base - 1, -1):
            tree_insert(ints, flts, free, meta, path, 0, 0, 0.0, 0.0, 0.0, log_k[q], log_h[q])
        tree_delete(ints, flts, free, meta, path, z[j - 1] + 1)
    # keep the owners alive until here; the borrowed views do not hold references
    _keep_alive(own_ints, own_flts, own_free, own_meta, own_path)
    return f, peak


@njit(cache=True)
def chain_repair(v, a, b):
    """Push ``v`` forward into the chain constraints; used to absorb roundoff."""
    for i in range(v.shape[0] - 1):
        lo = v[i] + a[i]
        hi = v[i] + b[i]
        if v[i + 1] < lo:
            v[i + 1] = lo
        elif v[i + 1] > hi:
            v[i + 1] = hi


# ---------------------------------------------------------------- reference solver


@njit(cache=True)
def dykstra_bir(y, a, b, x, tol, max_sweeps):
    """Dykstra alternating projections onto the box and the two pair families.

    ``x`` is the starting point and is overwritten. Returns ``(sweeps, converged)``.
    """
    n = y.shape[0]
    for i in range(n):
        x[i] = y[i]
    q_box = np.zeros(n)
    q_even = np.zeros(n)
    q_odd = np.zeros(n)
    prev = x.copy()
    for sweep in range(max_sweeps):
        for i in range(n):
            z = x[i] + q_box[i]
            w = _clamp(z, 0.0, 1.0)
            q_box[i] = z - w
            x[i] = w
        for parity in range(2):
            q = q_even if parity == 0 else q_odd
            for i in range(parity, n - 1, 2):
                z0 = x[i] + q[i]
                z1 = x[i + 1] + q[i + 1]
                gap = z1 - z0
                shift = 0.5 * (_clamp(gap, a[i], b[i]) - gap)
                q[i] = shift
                q[i + 1] = -shift
                x[i] = z0 - shift
                x[i + 1] = z1 + shift
        change = 0.0
        for i in range(n):
            dv = abs(x[i] - prev[i])
            if dv > change:
                change = dv
            prev[i] = x[i]
        if change < tol:
            return sweep + 1, True
    return max_sweeps, False
