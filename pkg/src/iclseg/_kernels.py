"""Compiled kernels for segmentation DPs and the constrained-chain passes.

Everything here works on plain float64 arrays (prefix sums, shifted emission
tables) so the hot loops stay allocation-free. Family codes:

    0  normal, shared variance   (cost = RSS / 2, variance profiled out)
    1  normal, per-segment variance (full NLL at the floored MLE variance)
    2  poisson                   (drops the log x! constant)
    3  negbin at fixed phi       (drops the gammaln constants)

Costs are negative log-likelihoods up to those per-family constants, so
every kernel minimizes. seg_nll is the single source of truth for segment
costs: the exact DP, the pruned DP, and binary segmentation all call it, so
exactly tied optima tie bit-for-bit across methods.
"""

from __future__ import annotations

import numpy as np
from numba import njit

FAM_NORMAL_SHARED = 0
FAM_NORMAL_PERSEG = 1
FAM_POISSON = 2
FAM_NEGBIN = 3

LOG_2PI = float(np.log(2.0 * np.pi))


@njit(cache=True)
def seg_nll(fam, s1, s2, length, phi, eps_rate, eps_var):
    """Minimized segment cost from the sufficient statistics (s1, s2, length)."""
    if fam == FAM_NORMAL_SHARED:
        rss = s2 - s1 * s1 / length
        if rss < 0.0:
            rss = 0.0
        return 0.5 * rss
    if fam == FAM_NORMAL_PERSEG:
        rss = s2 - s1 * s1 / length
        if rss < 0.0:
            rss = 0.0
        v = rss / length
        if v < eps_var:
            v = eps_var
        return 0.5 * length * (LOG_2PI + np.log(v)) + 0.5 * rss / v
    if fam == FAM_POISSON:
        m = s1 / length
        if m < eps_rate:
            return length * eps_rate - s1 * np.log(eps_rate)
        return s1 - s1 * np.log(m)
    m = s1 / length
    if m < eps_rate:
        m = eps_rate
    return -(length * phi * np.log(phi / (phi + m)) + s1 * np.log(m / (phi + m)))


@njit(cache=True)
def dp_exact(fam, p1, p2, kmax, phi, eps_rate, eps_var):
    """Suffix DP over all split points: O(K_max n^2), all families.

    Returns (totals, splits): totals[k] is the optimal k-segment cost of the
    whole series; splits[k, a] is the end of the first segment in the optimal
    k-segment split of x[a:], choosing the smallest split among ties so that
    forward reconstruction yields the lexicographically smallest breakpoints.
    """
    n = p1.shape[0] - 1
    prev = np.full(n + 1, np.inf)
    cur = np.full(n + 1, np.inf)
    splits = np.zeros((kmax + 1, n + 1), np.int32)
    totals = np.full(kmax + 1, np.inf)
    for a in range(n):
        prev[a] = seg_nll(fam, p1[n] - p1[a], p2[n] - p2[a], n - a, phi, eps_rate, eps_var)
    totals[1] = prev[0]
    for k in range(2, kmax + 1):
        hi = n - k + 1
        for a in range(n - k + 1):
            best = np.inf
            arg = -1
            for b in range(a + 1, hi + 1):
                v = seg_nll(fam, p1[b] - p1[a], p2[b] - p2[a], b - a, phi, eps_rate, eps_var)
                v += prev[b]
                if v < best:
                    best = v
                    arg = b
            cur[a] = best
            splits[k, a] = arg
        for a in range(n - k + 1, n + 1):
            cur[a] = np.inf
        totals[k] = cur[0]
        tmp = prev
        prev = cur
        cur = tmp
    return totals, splits


@njit(cache=True)
def best_split(fam, p1, p2, a, b, phi, eps_rate, eps_var):
    """Best single split of the block [a, b): (position, combined cost).

    Scans left to right with a strict improvement test, so ties resolve to
    the leftmost position. Returns (-1, inf) for unsplittable blocks.
    """
    best = np.inf
    arg = -1
    for j in range(a + 1, b):
        v = seg_nll(fam, p1[j] - p1[a], p2[j] - p2[a], j - a, phi, eps_rate, eps_var)
        v += seg_nll(fam, p1[b] - p1[j], p2[b] - p2[j], b - j, phi, eps_rate, eps_var)
        if v < best:
            best = v
            arg = j
    return arg, best


@njit(cache=True)
def _push_piece(cand, rgt, m, c, r):
    """Append piece (c, right edge r), merging with an adjacent same-candidate piece."""
    if m > 0 and cand[m - 1] == c:
        rgt[m - 1] = r
        return m
    cand[m] = c
    rgt[m] = r
    return m + 1


@njit(cache=True)
def _left_root(c0, a, b, lo, hi):
    """Smallest root of c0 - a*lam + b*log(lam) on [lo, hi].

    Preconditions: the difference is < 0 at lo, >= 0 at hi, b > 0, and hi is
    at or below the peak b/a, so the function is increasing and concave on
    the bracket. Safeguarded Newton.
    """
    start = -c0 / b
    if start > 700.0:
        lam = hi
    else:
        lam = np.exp(start)
    if lam <= lo:
        lam = lo + 0.5 * (hi - lo)
    if lam >= hi:
        lam = lo + 0.5 * (hi - lo)
    for _ in range(100):
        d = c0 - a * lam + b * np.log(lam)
        if d < 0.0:
            lo = lam
        else:
            hi = lam
        slope = b / lam - a
        if slope != 0.0:
            nxt = lam - d / slope
        else:
            nxt = 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - lam) <= 1e-12 * lam + 1e-300:
            return nxt
        lam = nxt
    return lam


@njit(cache=True)
def _right_root(c0, a, b, lo, hi):
    """Largest root of c0 - a*lam + b*log(lam) on [lo, hi].

    Preconditions: >= 0 at lo, < 0 at hi, b > 0, lo at or above the peak, so
    the function is decreasing and concave on the bracket.
    """
    lam = 2.0 * lo if 2.0 * lo < hi else 0.5 * (lo + hi)
    for _ in range(100):
        d = c0 - a * lam + b * np.log(lam)
        if d >= 0.0:
            lo = lam
        else:
            hi = lam
        slope = b / lam - a
        if slope != 0.0:
            nxt = lam - d / slope
        else:
            nxt = 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - lam) <= 1e-12 * lam + 1e-300:
            return nxt
        lam = nxt
    return lam


@njit(cache=True)
def dp_pruned_poisson(p1, kmax, eps_rate, dom_hi, cap):
    """Functional-pruning DP for Poisson costs: same optimum as dp_exact.

    For each level k the minimal cost of ending the k-th segment at i with
    last breakpoint t, as a function of the last segment's rate lam, is

        f_t(lam) = G[k-1, t] + (i - t) * lam - (p1[i] - p1[t]) * log(lam)

    on lam in [eps_rate, dom_hi]. Advancing i adds the same increment to
    every candidate, so the lower envelope only changes when candidate t=i-1
    is inserted; each pairwise difference is concave in lam with at most two
    roots, which keeps the envelope a short list of pieces.

    Returns (G, bp, status): G[k, i] is the optimal cost of x[:i] in k
    segments, bp[k, i] the matching last breakpoint. status 1 means the
    piece buffer overflowed (caller should fall back to dp_exact).
    """
    n = p1.shape[0] - 1
    g = np.full((kmax + 1, n + 1), np.inf)
    bp = np.full((kmax + 1, n + 1), -1, np.int32)
    for i in range(1, n + 1):
        g[1, i] = seg_nll(FAM_POISSON, p1[i], 0.0, i, 0.0, eps_rate, 0.0)
        bp[1, i] = 0
    if kmax == 1:
        return g, bp, 0
    cand = np.empty(cap, np.int64)
    rgt = np.empty(cap)
    cand2 = np.empty(cap, np.int64)
    rgt2 = np.empty(cap)
    for k in range(2, kmax + 1):
        m = 1
        cand[0] = k - 1
        rgt[0] = dom_hi
        for i in range(k, n + 1):
            if i > k:
                u = i - 1
                du = g[k - 1, u]
                m2 = 0
                lo = eps_rate
                for j in range(m):
                    c = cand[j]
                    r = rgt[j]
                    if m2 + 3 > cap:
                        return g, bp, 1
                    # keep-interval [r1, r2] where candidate c still beats u
                    c0 = du - g[k - 1, c]
                    a = float(u - c)
                    b = p1[u] - p1[c]
                    if b <= 0.0:
                        r1 = eps_rate
                        r2 = c0 / a
                    else:
                        lp = b / a
                        peak = c0 - b + b * np.log(lp)
                        if peak <= 0.0:
                            r1 = dom_hi
                            r2 = eps_rate
                        else:
                            de = c0 - a * eps_rate + b * np.log(eps_rate)
                            r1 = eps_rate if de >= 0.0 else _left_root(c0, a, b, eps_rate, lp)
                            dh = c0 - a * dom_hi + b * np.log(dom_hi)
                            r2 = dom_hi if dh >= 0.0 else _right_root(c0, a, b, lp, dom_hi)
                    lo2 = r1 if r1 > lo else lo
                    hi2 = r2 if r2 < r else r
                    if lo2 < hi2:
                        if lo2 > lo:
                            m2 = _push_piece(cand2, rgt2, m2, u, lo2)
                        m2 = _push_piece(cand2, rgt2, m2, c, hi2)
                        if hi2 < r:
                            m2 = _push_piece(cand2, rgt2, m2, u, r)
                    else:
                        m2 = _push_piece(cand2, rgt2, m2, u, r)
                    lo = r
                m = m2
                tmp_c = cand
                cand = cand2
                cand2 = tmp_c
                tmp_r = rgt
                rgt = rgt2
                rgt2 = tmp_r
            # envelope minimum at position i
            best = np.inf
            argt = -1
            lo = eps_rate
            for j in range(m):
                c = cand[j]
                r = rgt[j]
                aa = i - c
                bb = p1[i] - p1[c]
                lhat = bb / aa
                if lhat < eps_rate:
                    lhat = eps_rate
                if lo <= lhat and lhat < r:
                    v = g[k - 1, c] + seg_nll(FAM_POISSON, bb, 0.0, aa, 0.0, eps_rate, 0.0)
                elif lhat < lo:
                    v = g[k - 1, c] + aa * lo - bb * np.log(lo)
                else:
                    v = g[k - 1, c] + aa * r - bb * np.log(r)
                if v < best:
                    best = v
                    argt = c
                lo = r
            g[k, i] = best
            bp[k, i] = argt
    return g, bp, 0


@njit(cache=True)
def _lae(a, b):
    """log(exp(a) + exp(b)) with -inf treated as an exact zero summand."""
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a < b:
        a, b = b, a
    return a + np.log1p(np.exp(b - a))


@njit(cache=True)
def forward_log(logg, eta):
    """Log-domain forward pass over the feasibility band.

    logg must be -inf outside the band. Returns the full table of
    log F_i(k) (-inf on infeasible cells) and a status: -1 on success, else
    the 0-based position whose entire column is -inf, which can only happen
    when every feasible emission density at that position is zero.

    Within a row the true values can span far more than the ~709 nats a
    float64 carries, so normalized linear recursions lose the small cells;
    the log recursion keeps every cell at full precision for the posteriors.
    """
    n, kk = logg.shape
    lf = np.full((n, kk), -np.inf)
    leta = np.log(eta)
    lstay = np.log1p(-eta)
    lf[0, 0] = logg[0, 0]
    if lf[0, 0] == -np.inf:
        return lf, 0
    for i in range(1, n):
        kmin = kk - 1 - (n - 1 - i)
        if kmin < 0:
            kmin = 0
        kmax = i if i < kk - 1 else kk - 1
        best = -np.inf
        for k in range(kmin, kmax + 1):
            v = lstay + lf[i - 1, k]
            if k > 0:
                v = _lae(v, leta + lf[i - 1, k - 1])
            v += logg[i, k]
            lf[i, k] = v
            if v > best:
                best = v
        if best == -np.inf:
            return lf, i
    return lf, -1


@njit(cache=True)
def backward_log(logg, eta):
    """Log-domain backward pass; log B_i(k), -inf on infeasible cells.

    The terminal row is log B_{n-1}(k) = 0 for k = K-1 (the conditioning
    state) and -inf elsewhere. status as in forward_log.
    """
    n, kk = logg.shape
    lb = np.full((n, kk), -np.inf)
    leta = np.log(eta)
    lstay = np.log1p(-eta)
    lb[n - 1, kk - 1] = 0.0
    for i in range(n - 2, -1, -1):
        kmin = kk - 1 - (n - 1 - i)
        if kmin < 0:
            kmin = 0
        kmax = i if i < kk - 1 else kk - 1
        best = -np.inf
        for k in range(kmin, kmax + 1):
            v = lstay + logg[i + 1, k] + lb[i + 1, k]
            if k + 1 < kk:
                v = _lae(v, leta + logg[i + 1, k + 1] + lb[i + 1, k + 1])
            lb[i, k] = v
            if v > best:
                best = v
        if best == -np.inf:
            return lb, i
    return lb, -1


@njit(cache=True)
def viterbi_kernel(logg):
    """Most probable path through the band; ties prefer the earlier jump.

    logg must be -inf outside the feasibility band. Returns the 0-based
    breakpoint positions (first index of each new segment).
    """
    n, kk = logg.shape
    w = np.full((n, kk), -np.inf)
    w[n - 1, kk - 1] = logg[n - 1, kk - 1]
    for i in range(n - 2, -1, -1):
        kmin = kk - 1 - (n - 1 - i)
        if kmin < 0:
            kmin = 0
        kmax = i if i < kk - 1 else kk - 1
        for k in range(kmin, kmax + 1):
            m = w[i + 1, k]
            if k + 1 < kk and w[i + 1, k + 1] > m:
                m = w[i + 1, k + 1]
            w[i, k] = logg[i, k] + m
    bps = np.empty(kk - 1, np.int64)
    nb = 0
    k = 0
    for i in range(n - 1):
        if k + 1 < kk and w[i + 1, k + 1] >= w[i + 1, k]:
            bps[nb] = i + 1
            nb += 1
            k += 1
    return bps[:nb]
