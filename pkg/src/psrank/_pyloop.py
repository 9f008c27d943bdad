"""NumPy implementation of the streaming passes (fallback for ``_kernels``).

Same signatures and semantics as the compiled module. The two linear
recurrences of the inverse step run through :func:`scipy.signal.lfilter`
so the per-instance cost stays in C even without the extension.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter

from .dp import DEGENERATE_EPS, ENVELOPE_SLACK, MASS_SLACK, REFRESH_TOL, ROTATION_EPS, TAIL_FLUSH, prefers_reverse


def _round(v: np.ndarray, hi: int, p: float) -> None:
    w = v[:hi]
    tail = w[:-1] * p
    w *= 1.0 - p
    w[1:] += tail


def _adjust_fwd(v: np.ndarray, hi: int, a: float) -> None:
    q = 1.0 - a
    v[:hi] = lfilter([1.0 / q], [1.0, a / q], v[:hi])


def _adjust_rev(v: np.ndarray, hi: int, a: float) -> None:
    # out[i-1] = (cur[i] - (1-a) out[i]) / a, seeded with out[hi-1] = cur[hi-1]
    w = v[:hi][::-1]
    x = np.empty(hi)
    x[0] = a * w[0]
    x[1:] = w[:-1]
    v[:hi] = lfilter([1.0 / a], [1.0, (1.0 - a) / a], x)[::-1]


def _adjust_ls(v: np.ndarray, t: int, a: float) -> float:
    # least squares over the t + 1 equations of a zero-top vector (Givens
    # rotations of the bidiagonal system); see the compiled kernel. Returns
    # the magnitude of the residual.
    q = 1.0 - a
    cur = v[:t + 1]
    r = np.empty(t)
    y = np.empty(t)
    d, w, j = q, float(cur[0]), 0
    while j < t:
        h = math.sqrt(d * d + a * a)
        c, s = d / h, a / h
        y[j] = (c * w + s * cur[j + 1]) / h
        r[j] = s * q / h
        w = c * cur[j + 1] - s * w
        j += 1
        done = c < ROTATION_EPS or abs(c * q - d) <= ROTATION_EPS * d
        d = c * q
        if done:
            break
    out = np.empty(t)
    nxt = 0.0
    if j < t:
        # fixed point reached: constant coefficients turn both recurrences into filters
        h = math.sqrt(d * d + a * a)
        c, s = d / h, a / h
        ws = lfilter([c], [1.0, s], cur[j + 1:], zi=[-s * w])[0]
        y[j:] = (c * np.concatenate(([w], ws[:-1])) + s * cur[j + 1:]) / h
        w = float(ws[-1])
        rr = s * q / h
        out[j:] = lfilter([1.0], [1.0, rr], y[j:][::-1])[::-1]
        nxt = float(out[j])
    for i in range(j - 1, -1, -1):
        nxt = y[i] - r[i] * nxt
        out[i] = nxt
    v[:t] = out
    v[t] = 0.0
    return abs(w)


BOTTOM_UP, TOP_DOWN, ZERO_TOP = 0, 1, 2


def _adjust(v: np.ndarray, hi: int, a: float, K: int) -> tuple[int, float]:
    # flush the top below TAIL_FLUSH; with a zero top bottom-up for a <= 1/2
    # and least squares above, else one direction as chosen by
    # prefers_reverse. Returns the kind of solve and, for the overdetermined
    # zero-top solve, the size of its residual (exactly 0 for exact input).
    w = v[:hi]
    big = np.flatnonzero(w[1:] > TAIL_FLUSH)
    t = int(big[-1]) + 1 if len(big) else 0
    w[t + 1:] = 0.0
    if t + 1 < hi:
        if a <= 0.5:
            _adjust_fwd(v, t + 1, a)
            resid = abs(float(v[t]))
            v[t] = 0.0
        else:
            resid = _adjust_ls(v, t + 1, a)
        return ZERO_TOP, resid
    if prefers_reverse(a, K):
        _adjust_rev(v, hi, a)
        return TOP_DOWN, 0.0
    _adjust_fwd(v, hi, a)
    return BOTTOM_UP, 0.0


def _accumulate(a: float, p: float, left: int) -> float:
    m = a + p
    if m > 1.0 or (left == 0 and m >= 1.0 - MASS_SLACK):
        return 1.0
    return m


def _support(v: np.ndarray, n_seen: int, K: int) -> None:
    # after removing o_Y only n_seen - 2 objects remain: index n_seen - 1 is exactly 0
    if n_seen - 1 < K:
        v[n_seen - 1] = 0.0


def _envelope(v: np.ndarray, hi: int, c: int, mu: float, n: int) -> None:
    # N = c + S, S a sum of n Bernoullis with mean mu: Chernoff bound below
    # the mean, Hoeffding bound above it, exact zeros outside [c, c + n]
    c = min(c, hi)
    v[:c] = 0.0
    v[c + n + 1:hi] = 0.0
    if n == 0 or mu <= 0.0:
        return
    m = mu * (1.0 - ENVELOPE_SLACK)
    top = min(hi, c + math.ceil(m))
    if top > c:
        t = m - np.arange(top - c)
        np.minimum(v[c:top], np.exp(-t * t / (2.0 * m)), out=v[c:top])
    m = mu * (1.0 + ENVELOPE_SLACK)
    nn = n * (1.0 + ENVELOPE_SLACK)
    lo = c + math.ceil(m)
    top = min(hi, c + n + 1)
    if lo < top:
        t = np.arange(lo - c, top - c) - m
        np.minimum(v[lo:top], np.exp(-2.0 * t * t / nn), out=v[lo:top])


def _recompute(v: np.ndarray, seen: np.ndarray, seen_list: list[int], exclude: int) -> None:
    v[:] = 0.0
    v[0] = 1.0
    hi = 1
    for o in seen_list:
        if o == exclude:
            continue
        hi = min(hi + 1, len(v))
        _round(v, hi, seen[o])


def _refresh(v: np.ndarray, seen: np.ndarray, seen_list: list[int], exclude: int) -> None:
    # exact state: the c certain objects shift the DP over the uncertain ones,
    # so only its first K - c entries are needed; entries at either end that
    # fall to TAIL_FLUSH are dropped (see the compiled kernel)
    others = [seen[o] for o in seen_list if o != exclude]
    c = sum(m == 1.0 for m in others)
    v[:] = 0.0
    if c >= len(v):
        return
    w = v[c:]
    w[0] = 1.0
    lo, hi = 0, 1
    for m in others:
        if m == 1.0:
            continue
        hi = min(hi + 1, len(w))
        _round(w[lo:], hi - lo, m)
        live = np.flatnonzero(w[lo:hi] > TAIL_FLUSH)
        if len(live):
            top = lo + int(live[-1]) + 1
            w[top:hi] = 0.0
            w[lo:lo + int(live[0])] = 0.0
            lo, hi = lo + int(live[0]), top
        else:
            w[lo:hi - 1] = 0.0
            lo = hi - 1


def psr_pass(obj, prob, counts, k, guard, early_stop, stable, rows, obj_dist):
    n = len(obj)
    K = k + guard if stable else k
    v = np.zeros(K)
    seen = np.zeros(len(counts))
    remaining = np.array(counts, dtype=np.int64)
    seen_list: list[int] = []
    n1 = n2 = n3 = n_rev = n_fb = active = certain = uncertain = 0
    mu = 0.0  # total seen mass of the uncertain seen objects
    aol_sum = 0.0
    n_rows = 0
    prev = -1
    for t in range(n):
        if t > 0 and early_stop and not v[:k].any():
            break
        o = int(obj[t])
        p = float(prob[t])
        a = float(seen[o])
        if t == 0:
            v[0] = 1.0
        elif o == prev:
            n1 += 1
        else:
            hi = min(len(seen_list) + 1, K)
            b = float(seen[prev])
            if a == 0.0:
                n2 += 1
                _round(v, hi, b)
            else:
                n3 += 1
                n_seen = len(seen_list)
                if stable:
                    solve, resid = _adjust(v, hi, a, K)
                    if solve == TOP_DOWN:
                        n_rev += 1
                    _support(v, n_seen, K)
                    _round(v, hi, b)
                    # noise left in the guard band of a truncated vector is
                    # expected; with a zero top any noise can grow, and the
                    # residual of the solve measures it directly
                    low = float(v[:hi if solve == ZERO_TOP else min(hi, k)].min())
                    np.clip(v[:hi], 0.0, 1.0, out=v[:hi])
                    if low < -REFRESH_TOL or resid > REFRESH_TOL:
                        n_fb += 1
                        _refresh(v, seen, seen_list, o)
                elif 1.0 - a < DEGENERATE_EPS:
                    n_fb += 1
                    _recompute(v, seen, seen_list, o)
                else:
                    _adjust_fwd(v, min(hi, n_seen), a)
                    _round(v, hi, b)
            if stable:
                if a == 1.0:
                    _envelope(v, hi, certain - 1, mu, uncertain)
                elif a > 0.0:
                    _envelope(v, hi, certain, mu - a, uncertain - 1)
                else:
                    _envelope(v, hi, certain, mu, uncertain)
        if a == 0.0:
            seen_list.append(o)
            active += 1
        remaining[o] -= 1
        m = _accumulate(a, p, int(remaining[o]))
        if a < 1.0:
            mu -= a
            if a > 0.0:
                uncertain -= 1
            if m == 1.0:
                certain += 1
            else:
                mu += m
                uncertain += 1
        seen[o] = m
        if remaining[o] == 0:
            active -= 1
        aol_sum += active
        if rows is not None:
            rows[t] = v[:k]
        obj_dist[o] += p * v[:k]
        prev = o
        n_rows += 1
    return n_rows, n1, n2, n3, n_rev, n_fb, aol_sum


def ylks_pass(obj, prob, counts, k, early_stop, rows, obj_dist):
    n = len(obj)
    v = np.zeros(k)
    seen = np.zeros(len(counts))
    remaining = np.array(counts, dtype=np.int64)
    seen_list: list[int] = []
    active = 0
    aol_sum = 0.0
    n_rows = 0
    for t in range(n):
        if t > 0 and early_stop and not v.any():
            break
        o = int(obj[t])
        p = float(prob[t])
        a = float(seen[o])
        if a == 0.0:
            seen_list.append(o)
            active += 1
        remaining[o] -= 1
        seen[o] = _accumulate(a, p, int(remaining[o]))
        if remaining[o] == 0:
            active -= 1
        aol_sum += active
        _recompute(v, seen, seen_list, o)
        if rows is not None:
            rows[t] = v
        obj_dist[o] += p * v
        n_rows += 1
    return n_rows, aol_sum
