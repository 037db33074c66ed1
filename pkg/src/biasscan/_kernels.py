"""Compiled inner loops for scoring and the single-feature scan step.

Everything is expressed in t = log(q). With odds_inv = (1 - p) / p the
first-order condition of the bias score is

    H(t) = pos - sum_i w_i / (1 + odds_inv_i * exp(-t)) = 0

H is strictly decreasing in t, and the score
G(t) = pos * t - sum_i w_i * log1p(p_i * expm1(t)) is concave with G(0) = 0.
"""

import math

import numpy as np
from numba import njit

UNDER = 1
OVER = -1

T_TOL = 1e-12
MAX_ITER = 200
T_BRACKET = math.log(1e6)
T_EXPAND = math.log(1e3)
T_LIMIT = 700.0


@njit(cache=True)
def _h(t, pos, oinv, w, n):
    e = math.exp(-t)
    s = 0.0
    d = 0.0
    for i in range(n):
        sig = 1.0 / (1.0 + oinv[i] * e)
        s += w[i] * sig
        d += w[i] * sig * (1.0 - sig)
    return pos - s, -d


@njit(cache=True)
def _g(t, pos, p, w, n):
    em = math.expm1(t)
    s = 0.0
    for i in range(n):
        s += w[i] * math.log1p(p[i] * em)
    return pos * t - s


@njit(cache=True)
def _gh(t, pos, p, oinv, w, n):
    # G(t) and H(t) = G'(t) in one pass
    em = math.expm1(t)
    e = math.exp(-t)
    g = 0.0
    s = 0.0
    for i in range(n):
        g += w[i] * math.log1p(p[i] * em)
        s += w[i] / (1.0 + oinv[i] * e)
    return pos * t - g, pos - s


@njit(cache=True)
def _solve_h(pos, oinv, w, n, lo, hi, t):
    """Safeguarded Newton on H over a bracket with H(lo) > 0 > H(hi)."""
    if not (lo < t < hi):
        t = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        h, dh = _h(t, pos, oinv, w, n)
        if h > 0.0:
            lo = t
        elif h < 0.0:
            hi = t
        else:
            return t
        nt = t - h / dh if dh < 0.0 else 0.5 * (lo + hi)
        if not (lo < nt < hi):
            nt = 0.5 * (lo + hi)
        if abs(nt - t) < T_TOL or hi - lo < T_TOL:
            return nt
        t = nt
    return t


@njit(cache=True)
def _guess(pos, sp, wsum):
    # exact root when all predictions are equal
    return math.log(pos * (wsum - sp) / (sp * (wsum - pos)))


@njit(cache=True)
def optimal_t(p, oinv, w, n, pos, direction):
    """Maximize G over the direction's half-line.

    Returns (score, t, flag); flag is 1 when the supremum is only reached in
    the limit t -> +inf (UNDER) or t -> -inf (OVER).
    """
    wsum = 0.0
    sp = 0.0
    for i in range(n):
        wsum += w[i]
        sp += w[i] * p[i]
    if wsum <= 0.0:
        return 0.0, 0.0, 0
    if direction == UNDER:
        if pos >= wsum:
            s = 0.0
            for i in range(n):
                s -= w[i] * math.log(p[i])
            return s, math.inf, 1
        if pos <= sp:
            return 0.0, 0.0, 0
        lo = 0.0
        hi = T_BRACKET
        while hi < T_LIMIT and _h(hi, pos, oinv, w, n)[0] > 0.0:
            lo = hi
            hi += T_EXPAND
    else:
        if pos <= 0.0:
            s = 0.0
            for i in range(n):
                s -= w[i] * math.log1p(-p[i])
            return s, -math.inf, 1
        if pos >= sp:
            return 0.0, 0.0, 0
        hi = 0.0
        lo = -T_BRACKET
        while lo > -T_LIMIT and _h(lo, pos, oinv, w, n)[0] < 0.0:
            hi = lo
            lo -= T_EXPAND
    t = _solve_h(pos, oinv, w, n, lo, hi, _guess(pos, sp, wsum))
    score = _g(t, pos, p, w, n)
    if score < 0.0:
        score = 0.0
    return score, t, 0


@njit(cache=True)
def _solve_g(target, pos, p, oinv, w, n, inside, outside):
    """Root of G(t) = target between a point with G > target and one below."""
    t = outside
    for _ in range(MAX_ITER):
        gv, dg = _gh(t, pos, p, oinv, w, n)
        gv -= target
        if gv > 0.0:
            inside = t
        else:
            outside = t
        nt = t - gv / dg if dg != 0.0 else 0.5 * (inside + outside)
        a = min(inside, outside)
        b = max(inside, outside)
        if not (a < nt < b):
            nt = 0.5 * (inside + outside)
        if abs(nt - t) < T_TOL or b - a < T_TOL:
            return nt
        t = nt
    return t


@njit(cache=True)
def _outward(target, pos, p, w, n, start, step):
    # walk from start until G drops to target; G decreases linearly far out
    t = start + step
    while abs(t) < T_LIMIT and _g(t, pos, p, w, n) > target:
        step *= 2.0
        t = start + step
    return t


@njit(cache=True)
def positive_interval(p, oinv, w, n, pos, theta):
    """Open interval of t on which G(t) > theta, as (lo, hi, nonempty)."""
    wsum = 0.0
    sp = 0.0
    for i in range(n):
        wsum += w[i]
        sp += w[i] * p[i]
    if wsum <= 0.0:
        return 0.0, 0.0, False
    if pos >= wsum:
        if theta == 0.0:
            return 0.0, math.inf, True
        sup = 0.0
        for i in range(n):
            sup -= w[i] * math.log(p[i])
        if sup <= theta:
            return 0.0, 0.0, False
        hi = 1.0
        while hi < T_LIMIT and _g(hi, pos, p, w, n) <= theta:
            hi *= 2.0
        return _solve_g(theta, pos, p, oinv, w, n, hi, 0.0), math.inf, True
    if pos <= 0.0:
        if theta == 0.0:
            return -math.inf, 0.0, True
        # G falls monotonically from -sum log(1 - p) at t = -inf to 0
        sup = 0.0
        for i in range(n):
            sup -= w[i] * math.log1p(-p[i])
        if sup <= theta:
            return 0.0, 0.0, False
        lo = -1.0
        while lo > -T_LIMIT and _g(lo, pos, p, w, n) <= theta:
            lo *= 2.0
        return -math.inf, _solve_g(theta, pos, p, oinv, w, n, lo, 0.0), True
    h0 = pos - sp
    if theta == 0.0:
        # G(0) = 0 is one root; Newton from outside a concave function never
        # crosses the other one, so 0 is a safe inner bound
        if h0 > 0.0:
            out = _outward(0.0, pos, p, w, n, 0.0, 1.0)
            return 0.0, _solve_g(0.0, pos, p, oinv, w, n, 0.0, out), True
        if h0 < 0.0:
            out = _outward(0.0, pos, p, w, n, 0.0, -1.0)
            return _solve_g(0.0, pos, p, oinv, w, n, 0.0, out), 0.0, True
        return 0.0, 0.0, False
    tp = _peak(pos, sp, wsum, oinv, w, n)
    if _g(tp, pos, p, w, n) <= theta:
        return 0.0, 0.0, False
    lo_out = _outward(theta, pos, p, w, n, tp, -1.0)
    hi_out = _outward(theta, pos, p, w, n, tp, 1.0)
    lo = _solve_g(theta, pos, p, oinv, w, n, tp, lo_out)
    hi = _solve_g(theta, pos, p, oinv, w, n, tp, hi_out)
    return lo, hi, True


@njit(cache=True)
def _peak(pos, sp, wsum, oinv, w, n):
    # unconstrained maximizer of G (root of H) for 0 < pos < wsum
    g0 = _guess(pos, sp, wsum)
    lo = g0 - 1.0
    while _h(lo, pos, oinv, w, n)[0] <= 0.0:
        lo -= 2.0 * (g0 - lo)
    hi = g0 + 1.0
    while _h(hi, pos, oinv, w, n)[0] >= 0.0:
        hi += 2.0 * (hi - g0)
    return _solve_h(pos, oinv, w, n, lo, hi, g0)


@njit(cache=True)
def feature_penalty(k, arity, theta):
    if k <= 1 or k >= arity:
        return 0.0
    return theta * (k - 1)


@njit(cache=True)
def total_penalty(member, arities, theta):
    s = 0.0
    for f in range(arities.shape[0]):
        k = 0
        for v in range(arities[f]):
            k += member[f, v]
        s += feature_penalty(k, arities[f], theta)
    return s


@njit(cache=True)
def pooled_score(codes, p, oinv, w, pos, member, direction, buf_p, buf_o, buf_w):
    """Score of the subgroup given by a membership matrix, in cell order."""
    m = codes.shape[1]
    n = 0
    tot = 0.0
    for c in range(codes.shape[0]):
        ok = True
        for f in range(m):
            if member[f, codes[c, f]] == 0:
                ok = False
                break
        if ok:
            buf_p[n] = p[c]
            buf_o[n] = oinv[c]
            buf_w[n] = w[c]
            tot += pos[c]
            n += 1
    score, t, flag = optimal_t(buf_p, buf_o, buf_w, n, tot, direction)
    return score, t, flag, n


@njit(cache=True)
def scan_feature(codes, p, oinv, w, pos, member, arities, j, direction, theta, scratch_p, scratch_o, scratch_w, pool_p, pool_o, pool_w):
    """Exact best value subset for feature j given the other constraints.

    Fills and returns a membership row for feature j, with the unpenalized
    score, log-q, limit flag and subset size of the winner. A winner with
    zero pooled rows is never returned while any non-empty subset exists.
    """
    m = codes.shape[1]
    a = arities[j]
    counts = np.zeros(a + 1, dtype=np.int64)
    sel = np.empty(codes.shape[0], dtype=np.int64)
    ns = 0
    for c in range(codes.shape[0]):
        ok = True
        for f in range(m):
            if f != j and member[f, codes[c, f]] == 0:
                ok = False
                break
        if ok:
            sel[ns] = c
            ns += 1
            counts[codes[c, j] + 1] += 1
    for v in range(a):
        counts[v + 1] += counts[v]
    fill = counts[:a].copy()
    posv = np.zeros(a)
    for s in range(ns):
        c = sel[s]
        v = codes[c, j]
        k = fill[v]
        scratch_p[k] = p[c]
        scratch_o[k] = oinv[c]
        scratch_w[k] = w[c]
        posv[v] += pos[c]
        fill[v] += 1

    lo = np.zeros(a)
    hi = np.zeros(a)
    live = np.zeros(a, dtype=np.bool_)
    ends = np.empty(2 * a + 1)
    ne = 0
    ends[ne] = 0.0
    ne += 1
    for v in range(a):
        st = counts[v]
        cnt = counts[v + 1] - st
        if cnt == 0:
            continue
        l, h, ok = positive_interval(scratch_p[st:], scratch_o[st:], scratch_w[st:], cnt, posv[v], theta)
        if not ok:
            continue
        if direction == UNDER:
            l = max(l, 0.0)
        else:
            h = min(h, 0.0)
        if not l < h:
            continue
        live[v] = True
        lo[v] = l
        hi[v] = h
        if math.isfinite(l):
            ends[ne] = l
            ne += 1
        if math.isfinite(h):
            ends[ne] = h
            ne += 1
    ends = np.unique(ends[:ne])
    ne = ends.shape[0]

    # candidate evaluation points between consecutive interval endpoints
    pts = np.empty(ne + 1)
    npts = 0
    for e in range(ne - 1):
        pts[npts] = 0.5 * (ends[e] + ends[e + 1])
        npts += 1
    if direction == UNDER:
        pts[npts] = ends[ne - 1] + 1.0
    else:
        pts[npts] = ends[0] - 1.0
    npts += 1

    best_row = np.ones(a, dtype=np.uint8)
    best_val = -math.inf
    best_score = 0.0
    best_t = 0.0
    best_flag = 0
    best_k = a
    best_keff = a + 1
    seen = np.zeros((npts + a + 1, a), dtype=np.uint8)
    nseen = 0
    row = np.zeros(a, dtype=np.uint8)
    ncand = npts + a + 1
    for ci in range(ncand):
        row[:] = 0
        if ci < npts:
            t = pts[ci]
            if direction == UNDER and t <= 0.0:
                continue
            if direction == OVER and t >= 0.0:
                continue
            for v in range(a):
                if live[v] and lo[v] < t < hi[v]:
                    row[v] = 1
        elif ci < npts + a:
            v = ci - npts
            if theta == 0.0 or counts[v + 1] == counts[v]:
                continue
            row[v] = 1
        else:
            row[:] = 1
        k = 0
        for v in range(a):
            k += row[v]
        if k == 0:
            continue
        dup = False
        for s in range(nseen):
            same = True
            for v in range(a):
                if seen[s, v] != row[v]:
                    same = False
                    break
            if same:
                dup = True
                break
        if dup:
            continue
        seen[nseen, :] = row
        nseen += 1
        n = 0
        tot = 0.0
        for v in range(a):
            if row[v]:
                for q in range(counts[v], counts[v + 1]):
                    pool_p[n] = scratch_p[q]
                    pool_o[n] = scratch_o[q]
                    pool_w[n] = scratch_w[q]
                    n += 1
                tot += posv[v]
        if n == 0:
            continue
        score, tt, flag = optimal_t(pool_p, pool_o, pool_w, n, tot, direction)
        val = score - feature_penalty(k, a, theta)
        # ties go to the simpler constraint; keeping every value is no constraint
        keff = 0 if k == a else k
        if val > best_val + 1e-12 or (val >= best_val - 1e-12 and keff < best_keff):
            best_val = val
            best_score = score
            best_t = tt
            best_flag = flag
            best_k = k
            best_keff = keff
            best_row[:] = row
    return best_row, best_score, best_t, best_flag, best_k


@njit(cache=True)
def run_restart(codes, p, oinv, w, pos, member, arities, orders, direction, theta, tol):
    """Coordinate ascent from the given membership matrix (modified in place).

    Returns (penalized score, sweeps used).
    """
    k = codes.shape[0]
    bp = np.empty(k)
    bo = np.empty(k)
    bw = np.empty(k)
    pp = np.empty(k)
    po = np.empty(k)
    pw = np.empty(k)
    score = pooled_score(codes, p, oinv, w, pos, member, direction, bp, bo, bw)[0]
    cur = score - total_penalty(member, arities, theta)
    sweeps = 0
    for s in range(orders.shape[0]):
        start = cur
        sweeps += 1
        for jj in range(orders.shape[1]):
            j = orders[s, jj]
            row, sc, _, _, _ = scan_feature(codes, p, oinv, w, pos, member, arities, j, direction, theta, bp, bo, bw, pp, po, pw)
            for v in range(arities[j]):
                member[j, v] = row[v]
            cur = sc - total_penalty(member, arities, theta)
        if abs(cur - start) <= tol:
            break
    return cur, sweeps


@njit(cache=True)
def count_rows(codes, w, member):
    tot = 0.0
    for c in range(codes.shape[0]):
        ok = True
        for f in range(codes.shape[1]):
            if member[f, codes[c, f]] == 0:
                ok = False
                break
        if ok:
            tot += w[c]
    return tot
