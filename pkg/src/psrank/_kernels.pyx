# cython: language_level=3
"""Compiled streaming passes for the PSR and YLKS rank-probability engines.

Both functions consume a browsing stream already reduced to dense object
indices and probabilities, write instance rows (optional) and object
distributions into caller-provided buffers, and return pass statistics.
Semantics mirror :mod:`psrank._pyloop` line for line.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, exp, fabs, log, sqrt
from libc.stdint cimport int64_t

cnp.import_array()

cdef double DEGENERATE_EPS = 1e-12
cdef double MASS_SLACK = 1e-12
cdef double ENVELOPE_SLACK = 1e-9
cdef double CONDITION_BUDGET = 53 * 0.6931471805599453
cdef double TAIL_FLUSH = 1e-40
cdef double REFRESH_TOL = 1e-13
cdef double ROTATION_EPS = 1e-17

cdef enum:
    BOTTOM_UP = 0
    TOP_DOWN = 1
    ZERO_TOP = 2


cdef inline bint _all_zero(double* v, Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(k):
        if v[i] != 0.0:
            return False
    return True


cdef inline void _round(double* v, Py_ssize_t hi, double p) noexcept nogil:
    # in place; hi = number of live entries to update
    cdef Py_ssize_t i
    cdef double q = 1.0 - p
    for i in range(hi - 1, 0, -1):
        v[i] = v[i] * q + v[i - 1] * p
    v[0] = v[0] * q


cdef inline void _rec_up(double* y, Py_ssize_t n, double g, double r, double y0) noexcept nogil:
    # in place y[i] <- g y[i] - r y[i-1] for i = 0..n-1, with y[-1] = y0.
    # Unrolled as y[i] = u[i] + r^4 y[i-4]: u is a short filter over the input
    # and the four interleaved chains keep the recurrence off the latency path.
    # A growing recurrence (r > 1) is left serial: u would cancel terms of size r^3.
    cdef Py_ssize_t i
    cdef double r2 = r * r, r3 = r2 * r, r4 = r2 * r2, prev = y0
    if n < 8 or r > 1.0:
        for i in range(n):
            prev = g * y[i] - r * prev
            y[i] = prev
        return
    for i in range(n - 1, 2, -1):
        y[i] = g * (y[i] - r * y[i - 1] + r2 * y[i - 2] - r3 * y[i - 3])
    for i in range(3):
        prev = g * y[i] - r * prev
        y[i] = prev
    y[3] += r4 * y0
    for i in range(4, n):
        y[i] += r4 * y[i - 4]


cdef inline void _rec_down(double* y, Py_ssize_t n, double g, double r, double y0) noexcept nogil:
    # mirror of _rec_up walking down from y[0]: y[-i] <- g y[-i] - r y[-i+1], y[1] = y0
    cdef Py_ssize_t i
    cdef double r2 = r * r, r3 = r2 * r, r4 = r2 * r2, prev = y0
    if n < 8 or r > 1.0:
        for i in range(n):
            prev = g * y[-i] - r * prev
            y[-i] = prev
        return
    for i in range(n - 1, 2, -1):
        y[-i] = g * (y[-i] - r * y[1 - i] + r2 * y[2 - i] - r3 * y[3 - i])
    for i in range(3):
        prev = g * y[-i] - r * prev
        y[-i] = prev
    y[-3] += r4 * y0
    for i in range(4, n):
        y[-i] += r4 * y[4 - i]


cdef inline void _adjust_fwd(double* v, Py_ssize_t hi, double a) noexcept nogil:
    # out[i] = (cur[i] - a out[i-1]) / (1-a), from the bottom
    cdef double inv_q = 1.0 / (1.0 - a)
    _rec_up(v, hi, inv_q, a * inv_q, 0.0)


cdef inline void _adjust_rev(double* v, Py_ssize_t hi, double a) noexcept nogil:
    # out[i-1] = (cur[i] - (1-a) out[i]) / a, seeded with out[hi-1] = cur[hi-1]
    cdef Py_ssize_t i
    cdef double inv_a = 1.0 / a
    if hi < 2:
        return
    for i in range(hi - 1):
        v[i] = v[i + 1]
    _rec_down(v + hi - 2, hi - 1, inv_a, (1.0 - a) * inv_a, v[hi - 1])


cdef inline void _support(double* v, Py_ssize_t n_seen, Py_ssize_t K) noexcept nogil:
    # after removing o_Y only n_seen - 2 objects remain: index n_seen - 1 is exactly 0
    if n_seen - 1 < K:
        v[n_seen - 1] = 0.0


cdef inline double _clamp(double* v, Py_ssize_t hi, Py_ssize_t watch) noexcept nogil:
    # clips v[:hi] to [0, 1]; returns the most negative entry below watch (0 if none)
    cdef Py_ssize_t i
    cdef double low = 0.0
    for i in range(hi):
        if v[i] < 0.0:
            if v[i] < low and i < watch:
                low = v[i]
            v[i] = 0.0
        elif v[i] > 1.0:
            v[i] = 1.0
    return low


cdef inline bint _prefers_reverse(double a, Py_ssize_t length) noexcept nogil:
    if a <= 0.5:
        return False
    if a >= 1.0:
        return True
    return log(a / (1.0 - a)) * length > CONDITION_BUDGET


cdef double _adjust_ls(double* v, Py_ssize_t t, double a, double* r) noexcept nogil:
    # v[0..t] holds a vector whose top is exactly zero, so the t + 1 equations
    # cur[i] = (1-a) out[i] + a out[i-1] overdetermine out[0..t-1]. Least
    # squares through Givens rotations of the bidiagonal system: the residual
    # of noisy input is spread instead of piling up where a recurrence stops,
    # and for a > 1/2 the factorisation turns into the top-down solve.
    # The rotated right-hand side overwrites v (v[j] is consumed before it is
    # written); r holds the superdiagonal until the rotations settle.
    # Returns the magnitude of the residual.
    cdef Py_ssize_t i, j = 0, settled
    cdef double q = 1.0 - a, d = 1.0 - a, w = v[0], h, c, s, ih, rr = 0.0, nxt = 0.0, x
    while j < t:
        h = sqrt(d * d + a * a)
        c = d / h
        s = a / h
        x = v[j + 1]
        v[j] = (c * w + s * x) / h
        r[j] = s * q / h
        w = c * x - s * w
        j += 1
        if c < ROTATION_EPS or fabs(c * q - d) <= ROTATION_EPS * d:
            d = c * q
            break
        d = c * q
    settled = j
    j = t - 1
    if settled < t:
        # fixed point reached (to rounding): constant coefficients
        h = sqrt(d * d + a * a)
        c = d / h
        s = a / h
        ih = 1.0 / h
        rr = s * q * ih
        if c < ROTATION_EPS:
            # the rotations have become plain swaps: what is left is the
            # top-down recurrence, done in one sweep (w keeps its size)
            for i in range(settled, t):
                v[i] = v[i + 1]
            _rec_down(v + t - 1, t - settled, s * ih, rr, 0.0)
        else:
            i = settled
            while i < t:
                x = v[i + 1]
                v[i] = (c * w + s * x) * ih
                w = c * x - s * w
                i += 1
            _rec_down(v + t - 1, t - settled, 1.0, rr, 0.0)
        nxt = v[settled]
        j = settled - 1
    while j >= 0:
        nxt = v[j] - r[j] * nxt
        v[j] = nxt
        j -= 1
    v[t] = 0.0
    return fabs(w)


cdef inline int _adjust(double* v, Py_ssize_t hi, double a, Py_ssize_t K,
                        double* r, double* resid) noexcept nogil:
    # Entries at the top that are at most TAIL_FLUSH are set to zero. With a
    # zero top the system is overdetermined: bottom-up for a <= 1/2, whose
    # residual lands on the known zero at the top, least squares above.
    # A truncated vector is solved in one direction, top-down only when the
    # error of its approximate seed dies out across K entries.
    # Returns ZERO_TOP, TOP_DOWN or BOTTOM_UP; for ZERO_TOP the size of the
    # residual (exactly 0 for exact input) is stored in resid.
    cdef Py_ssize_t t = hi - 1
    while t > 0 and v[t] <= TAIL_FLUSH:
        v[t] = 0.0
        t -= 1
    if t + 1 < hi:
        if a <= 0.5:
            _adjust_fwd(v, t + 1, a)
            resid[0] = fabs(v[t])
            v[t] = 0.0
        else:
            resid[0] = _adjust_ls(v, t + 1, a, r)
        return ZERO_TOP
    if _prefers_reverse(a, K):
        _adjust_rev(v, hi, a)
        return TOP_DOWN
    _adjust_fwd(v, hi, a)
    return BOTTOM_UP


cdef void _envelope(double* v, Py_ssize_t hi, Py_ssize_t c, double mu, Py_ssize_t n) noexcept nogil:
    # N = c + S, S a sum of n Bernoullis with mean mu. Lower tail (Chernoff):
    # v[i] <= exp(-(mu - j)^2 / (2 mu)) for j = i - c < mu. Upper tail
    # (Hoeffding): v[i] <= exp(-2 (j - mu)^2 / n) for j > mu, and 0 past j = n.
    cdef Py_ssize_t i, top
    cdef double t, e, rho, step, m, nn
    if c > hi:
        c = hi
    for i in range(c):
        v[i] = 0.0
    for i in range(c + n + 1, hi):
        v[i] = 0.0
    if n == 0 or mu <= 0.0:
        return
    # walk down from the top: bound(t+1) = bound(t) * rho(t), rho(t+1) = rho(t) * step
    m = mu * (1.0 - ENVELOPE_SLACK)
    top = c + <Py_ssize_t> ceil(m)
    if top > hi:
        top = hi
    if top > c:
        t = m - (top - 1 - c)
        e = exp(-t * t / (2.0 * m))
        rho = exp(-(2.0 * t + 1.0) / (2.0 * m))
        step = exp(-1.0 / m)
        i = top - 1
        while i >= c:
            if v[i] > e:
                v[i] = e
            e *= rho
            rho *= step
            i -= 1
    # walk up from the mean with the same recurrence
    m = mu * (1.0 + ENVELOPE_SLACK)
    nn = n * (1.0 + ENVELOPE_SLACK)
    i = c + <Py_ssize_t> ceil(m)
    top = c + n + 1
    if top > hi:
        top = hi
    if i < top:
        t = (i - c) - m
        e = exp(-2.0 * t * t / nn)
        rho = exp(-2.0 * (2.0 * t + 1.0) / nn)
        step = exp(-4.0 / nn)
        while i < top:
            if v[i] > e:
                v[i] = e
            e *= rho
            rho *= step
            i += 1


cdef inline double _accumulate(double a, double p, int64_t left) noexcept nogil:
    # seen mass after adding p; capped at 1, snapped to 1 once complete
    cdef double m = a + p
    if m > 1.0 or (left == 0 and m >= 1.0 - MASS_SLACK):
        return 1.0
    return m


cdef void _recompute(double* v, Py_ssize_t K, const double* seen, const int64_t* seen_list,
                     Py_ssize_t n_seen, int64_t exclude) noexcept nogil:
    cdef Py_ssize_t i, j, hi = 1
    for i in range(K):
        v[i] = 0.0
    v[0] = 1.0
    for j in range(n_seen):
        if seen_list[j] == exclude:
            continue
        if hi < K:
            hi += 1
        _round(v, hi, seen[seen_list[j]])


cdef inline void _round2(double* v, Py_ssize_t hi, double p1, double p2) noexcept nogil:
    # two rounds in one sweep: multiply by (q1 + p1 x)(q2 + p2 x)
    cdef Py_ssize_t i
    cdef double q1 = 1.0 - p1, q2 = 1.0 - p2
    cdef double A = q1 * q2, B = q1 * p2 + p1 * q2, C = p1 * p2
    for i in range(hi - 1, 1, -1):
        v[i] = v[i] * A + v[i - 1] * B + v[i - 2] * C
    if hi > 1:
        v[1] = v[1] * A + v[0] * B
    v[0] = v[0] * A


cdef void _refresh(double* v, Py_ssize_t K, const double* seen, const int64_t* seen_list,
                   Py_ssize_t n_seen, int64_t exclude) noexcept nogil:
    # exact state: the c certain objects shift the DP over the uncertain ones,
    # so only its first K - c entries are needed. Entries at either end of the
    # DP that fall to TAIL_FLUSH are dropped; each later factor only
    # redistributes their mass, so no final entry moves by more than that.
    cdef Py_ssize_t i, j, c = 0, lo = 0, hi = 1, grow
    cdef double m, held = -1.0
    cdef double* w
    for j in range(n_seen):
        if seen_list[j] != exclude and seen[seen_list[j]] == 1.0:
            c += 1
    for i in range(K):
        v[i] = 0.0
    if c >= K:
        return
    w = v + c
    w[0] = 1.0
    for j in range(n_seen + 1):
        if j < n_seen:
            m = seen[seen_list[j]]
            if seen_list[j] == exclude or m == 1.0:
                continue
            if held < 0.0:
                held = m
                continue
            grow = 2
        elif held >= 0.0:
            grow = 1
        else:
            break
        hi += grow
        if hi > K - c:
            hi = K - c
        if grow == 2:
            _round2(w + lo, hi - lo, held, m)
            held = -1.0
        else:
            _round(w + lo, hi - lo, held)
        while hi - lo > 1 and w[hi - 1] <= TAIL_FLUSH:
            hi -= 1
            w[hi] = 0.0
        while hi - lo > 1 and w[lo] <= TAIL_FLUSH:
            w[lo] = 0.0
            lo += 1


def psr_pass(const int64_t[::1] obj, const double[::1] prob, const int64_t[::1] counts,
             Py_ssize_t k, Py_ssize_t guard, bint early_stop, bint stable,
             double[:, ::1] rows, double[:, ::1] obj_dist):
    """Incremental O(k) per instance pass (Cases 1-3)."""
    cdef Py_ssize_t n = obj.shape[0]
    cdef Py_ssize_t n_obj = counts.shape[0]
    cdef Py_ssize_t K = k + guard if stable else k
    cdef bint keep_rows = rows is not None
    cdef cnp.ndarray[double, ndim=1] v_arr = np.zeros(K)
    cdef cnp.ndarray[double, ndim=1] seen_arr = np.zeros(n_obj)
    cdef cnp.ndarray[int64_t, ndim=1] remaining_arr = np.array(counts, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] seen_list_arr = np.zeros(n_obj, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] work_arr = np.zeros(K)
    cdef double* v = <double*> v_arr.data
    cdef double* seen = <double*> seen_arr.data
    cdef int64_t* remaining = <int64_t*> remaining_arr.data
    cdef int64_t* seen_list = <int64_t*> seen_list_arr.data
    cdef double* work = <double*> work_arr.data
    cdef Py_ssize_t t, i, hi, n_seen = 0, n_rows = 0
    cdef int64_t o, prev = -1
    cdef double p, a, b, m
    cdef int solve
    cdef double resid
    cdef Py_ssize_t n1 = 0, n2 = 0, n3 = 0, n_rev = 0, n_fb = 0, active = 0
    cdef Py_ssize_t certain = 0, uncertain = 0
    cdef double mu = 0.0  # total seen mass of the uncertain seen objects
    cdef double aol_sum = 0.0

    with nogil:
        for t in range(n):
            if t > 0 and early_stop and _all_zero(v, k):
                break
            o = obj[t]
            p = prob[t]
            a = seen[o]
            if t == 0:
                v[0] = 1.0
            elif o == prev:
                n1 += 1
            else:
                # live entries: support of any state is bounded by the seen count
                hi = n_seen + 1
                if hi > K:
                    hi = K
                b = seen[prev]
                if a == 0.0:
                    n2 += 1
                    _round(v, hi, b)
                else:
                    n3 += 1
                    if stable:
                        resid = 0.0
                        solve = _adjust(v, hi, a, K, work, &resid)
                        if solve == TOP_DOWN:
                            n_rev += 1
                        _support(v, n_seen, K)
                        _round(v, hi, b)
                        # noise left in the guard band of a truncated vector is
                        # expected; with a zero top any noise can grow, and the
                        # residual of the solve measures it directly
                        if (_clamp(v, hi, hi if solve == ZERO_TOP else k) < -REFRESH_TOL
                                or resid > REFRESH_TOL):
                            n_fb += 1
                            _refresh(v, K, seen, seen_list, n_seen, o)
                    elif 1.0 - a < DEGENERATE_EPS:
                        n_fb += 1
                        _recompute(v, K, seen, seen_list, n_seen, o)
                    else:
                        _adjust_fwd(v, hi - 1 if hi > n_seen else hi, a)
                        _round(v, hi, b)
                if stable:
                    # tail bounds: ranks far from the expected count are near impossible
                    if a == 1.0:
                        _envelope(v, hi, certain - 1, mu, uncertain)
                    elif a > 0.0:
                        _envelope(v, hi, certain, mu - a, uncertain - 1)
                    else:
                        _envelope(v, hi, certain, mu, uncertain)
            if a == 0.0:
                seen_list[n_seen] = o
                n_seen += 1
                active += 1
            remaining[o] -= 1
            m = _accumulate(a, p, remaining[o])
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
            if keep_rows:
                for i in range(k):
                    rows[t, i] = v[i]
            for i in range(k):
                obj_dist[o, i] += p * v[i]
            prev = o
            n_rows += 1

    return n_rows, n1, n2, n3, n_rev, n_fb, aol_sum


def ylks_pass(const int64_t[::1] obj, const double[::1] prob, const int64_t[::1] counts,
              Py_ssize_t k, bint early_stop, double[:, ::1] rows, double[:, ::1] obj_dist):
    """Quadratic baseline: re-evaluate the DP over all seen objects per instance."""
    cdef Py_ssize_t n = obj.shape[0]
    cdef Py_ssize_t n_obj = counts.shape[0]
    cdef bint keep_rows = rows is not None
    cdef cnp.ndarray[double, ndim=1] v_arr = np.zeros(k)
    cdef cnp.ndarray[double, ndim=1] seen_arr = np.zeros(n_obj)
    cdef cnp.ndarray[int64_t, ndim=1] remaining_arr = np.array(counts, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] seen_list_arr = np.zeros(n_obj, dtype=np.int64)
    cdef double* v = <double*> v_arr.data
    cdef double* seen = <double*> seen_arr.data
    cdef int64_t* remaining = <int64_t*> remaining_arr.data
    cdef int64_t* seen_list = <int64_t*> seen_list_arr.data
    cdef Py_ssize_t t, i, n_seen = 0, n_rows = 0, active = 0
    cdef int64_t o
    cdef double p, a, m
    cdef double aol_sum = 0.0

    with nogil:
        for t in range(n):
            if t > 0 and early_stop and _all_zero(v, k):
                break
            o = obj[t]
            p = prob[t]
            a = seen[o]
            if a == 0.0:
                seen_list[n_seen] = o
                n_seen += 1
                active += 1
            remaining[o] -= 1
            seen[o] = _accumulate(a, p, remaining[o])
            if remaining[o] == 0:
                active -= 1
            aol_sum += active
            _recompute(v, k, seen, seen_list, n_seen, o)
            if keep_rows:
                for i in range(k):
                    rows[t, i] = v[i]
            for i in range(k):
                obj_dist[o, i] += p * v[i]
            n_rows += 1

    return n_rows, aol_sum
