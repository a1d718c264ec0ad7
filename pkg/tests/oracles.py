"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it checks.
"""
from fractions import Fraction
from itertools import combinations

import numpy as np


def project_box_hyperplane(z, y, upper):
    """Euclidean projection of z onto {0 <= a <= upper, y.a = 0}.

    a(nu) = clip(z - nu*y, 0, upper) and y.a(nu) is piecewise linear and
    non-increasing in nu, so the root is found exactly between breakpoints.
    """
    bps = np.unique(np.concatenate([z * y, (z - upper) * y]))
    vals = np.clip(z[None, :] - bps[:, None] * y[None, :], 0.0, upper) @ y
    if vals[0] <= 0:
        nu = bps[0]
    elif vals[-1] >= 0:
        nu = bps[-1]
    else:
        k = np.flatnonzero(vals <= 0)[0]
        lo, hi = bps[k - 1], bps[k]
        hlo, hhi = vals[k - 1], vals[k]
        nu = lo + (hi - lo) * hlo / (hlo - hhi)
    return np.clip(z - nu * y, 0.0, upper)


def projected_gradient(Q, y, upper, iters=20000, tol=1e-12):
    """Accelerated projected-gradient ascent on sum(a) - a'Qa/2."""
    L = max(np.linalg.eigvalsh(Q)[-1], 1e-12)
    step = 1.0 / L
    a = np.zeros(len(y))
    v = a.copy()
    t = 1.0
    obj = lambda x: x.sum() - 0.5 * x @ Q @ x
    prev = obj(a)
    for _ in range(iters):
        a_new = project_box_hyperplane(v + step * (1.0 - Q @ v), y, upper)
        cur = obj(a_new)
        if cur < prev:
            t = 1.0
            v = a.copy()
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        v = a_new + ((t - 1) / t_new) * (a_new - a)
        moved = np.max(np.abs(a_new - a))
        a, t, prev = a_new, t_new, cur
        if moved < tol:
            break
    return a


def qp_oracle(K, y, upper, iters=20000, active_tol=1e-6):
    """Reference solution of the box-constrained SVM dual.

    Projected gradient locates the active set; the KKT system on that set
    is then solved exactly. Returns ``(alpha, b, unique)`` where ``unique``
    certifies a unique optimum (non-singular reduced KKT matrix and strict
    complementarity); ``b`` is None when no vector is free.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    upper = np.asarray(upper, dtype=float)
    Q = (y[:, None] * y[None, :]) * K
    a = projected_gradient(Q, y, upper, iters)
    free = (a > active_tol) & (a < upper - active_tol)
    top = a >= upper - active_tol
    a_fix = np.where(top, upper, 0.0)
    F = np.flatnonzero(free)
    nf = len(F)
    if nf == 0:
        return a_fix, None, False
    rhs = np.concatenate([1.0 - Q[F] @ a_fix, [-(y @ a_fix)]])
    M = np.zeros((nf + 1, nf + 1))
    M[:nf, :nf] = Q[np.ix_(F, F)]
    M[:nf, nf] = y[F]
    M[nf, :nf] = y[F]
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e10:
        return a, None, False
    sol = np.linalg.solve(M, rhs)
    alpha = a_fix.copy()
    alpha[F] = sol[:nf]
    b = sol[nf]
    grad = 1.0 - Q @ alpha - b * y
    bound = ~free
    ok = (np.all(alpha[F] > 0) and np.all(alpha[F] < upper[F])
          and np.all(grad[bound & ~top] < -1e-7) and np.all(grad[top] > 1e-7))
    return alpha, b, bool(ok)


def ap_exhaustive(relevance):
    """AP by definition, in exact rationals."""
    hits = 0
    total = Fraction(0)
    for k, r in enumerate(relevance, 1):
        if r:
            hits += 1
            total += Fraction(hits, k)
    return total / hits


def all_placements(n_pos, n):
    for pos in combinations(range(n), n_pos):
        yield [i in pos for i in range(n)]


def spectral_2x2(S):
    """Closed-form largest singular value of a 2x2 matrix."""
    (a, b), (c, d) = S
    # eigenvalues of S'S = [[p, q], [q, r]]
    p = a * a + c * c
    q = a * b + c * d
    r = b * b + d * d
    lam = (p + r) / 2 + np.sqrt(((p - r) / 2) ** 2 + q * q)
    return np.sqrt(lam)


def cosine_sparse(u, v):
    dot = sum(w * v.get(k, 0.0) for k, w in u.items())
    nu = sum(w * w for w in u.values()) ** 0.5
    nv = sum(w * w for w in v.values()) ** 0.5
    return dot / (nu * nv)
