"""Independent reference computations used only by the tests.

Nothing here imports the estimator code paths it is compared against: IPW
terms are recomputed with scalar loops, candidate grids are rebuilt from
sorted values, and optima come from exhaustive enumeration.
"""
import itertools
import math

import numpy as np


def ipw_term(y, w, e, treat):
    """Scalar per-period welfare term."""
    if treat:
        return y * w / e
    return y * (1 - w) / (1 - e)


def welfare_scalar(ys, ws, es, treats, weights=None):
    if weights is None:
        weights = [1.0] * len(ys)
    num = 0.0
    den = 0.0
    for y, w, e, g, k in zip(ys, ws, es, treats, weights):
        num += k * ipw_term(y, w, e, g)
        den += k
    return num / den


def candidates(values):
    v = sorted(set(float(x) for x in values))
    return [-math.inf] + [(a + b) / 2 for a, b in zip(v[:-1], v[1:])] + [math.inf]


def inside(x, s, b):
    return s * (x - b) > 0


def brute_force_quadrant(X, y, w, e, weights=None):
    """Exhaustive max of weighted IPW welfare over quadrant rules on the candidate grid.

    Works for any dimension by enumerating per-dimension (sign, threshold)
    pairs; membership masks of the last dimension are vectorized.

    Returns
    -------
    best_value, list of (signs, thresholds) achieving it within 1e-12.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    e = np.broadcast_to(np.asarray(e, dtype=float), y.shape)
    k = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    treat_term = y * w / e
    ctrl_term = y * (1 - w) / (1 - e)
    den = k.sum()
    d = X.shape[1]
    per_dim = []
    for j in range(d):
        opts = []
        for s in (-1, 1):
            for b in candidates(X[:, j]):
                with np.errstate(invalid="ignore"):
                    opts.append((s, b, s * (X[:, j] - b) > 0))
        per_dim.append(opts)
    last = per_dim[-1]
    last_masks = np.array([m for _, _, m in last])  # (L, n)
    per_head = []
    for head in itertools.product(*per_dim[:-1]):
        hmask = np.ones(y.shape[0], dtype=bool)
        for _, _, m in head:
            hmask &= m
        G = hmask[None, :] & last_masks
        per_head.append((head, (np.where(G, treat_term, ctrl_term) * k).sum(axis=1) / den))
    best = max(float(v.max()) for _, v in per_head)
    cut = best - 1e-12 * (1 + abs(best))
    winners = []
    for head, vals in per_head:
        for i in np.flatnonzero(vals >= cut):
            s, b, _ = last[i]
            winners.append((tuple(h[0] for h in head) + (s,), tuple(h[1] for h in head) + (b,)))
    return best, winners


def logit_loglik(alpha, beta, x, w):
    eta = alpha + beta * np.asarray(x, dtype=float)
    return float(np.sum(np.asarray(w) * eta - np.logaddexp(0.0, eta)))


def grid_search_logit(x, w, lo=-5.0, hi=5.0, points=201, tol=1e-7):
    """2-D (alpha, beta) MLE by successively refined dense grids."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    a_lo, a_hi, b_lo, b_hi = lo, hi, lo, hi
    best = None
    while True:
        A = np.linspace(a_lo, a_hi, points)
        B = np.linspace(b_lo, b_hi, points)
        eta = A[:, None, None] + B[None, :, None] * x[None, None, :]
        ll = np.sum(w * eta - np.logaddexp(0.0, eta), axis=2)
        i, j = np.unravel_index(np.argmax(ll), ll.shape)
        best = (A[i], B[j])
        step_a = A[1] - A[0]
        step_b = B[1] - B[0]
        if max(step_a, step_b) < tol:
            return best
        a_lo, a_hi = best[0] - 3 * step_a, best[0] + 3 * step_a
        b_lo, b_hi = best[1] - 3 * step_b, best[1] + 3 * step_b


def two_period_enumeration(y, w, w_prev, e, state):
    """Max over all 16 (g1, g2) of the two-period sample welfare, by direct loops."""
    best = -math.inf
    for g1 in itertools.product((0, 1), repeat=2):
        for g2 in itertools.product((0, 1), repeat=2):
            s2 = g1[state]
            v = 0.0
            ok = True
            for s, g in ((state, g1), (s2, g2)):
                idx = [i for i in range(len(y)) if w_prev[i] == s]
                if not idx:
                    ok = False
                    break
                v += sum(ipw_term(y[i], w[i], e[i], g[s]) for i in idx) / len(idx)
            if ok:
                best = max(best, v)
    return best
