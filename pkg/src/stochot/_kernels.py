"""Compiled inner loops shared by the solvers.

Every loop runs sequentially in a fixed order, so results are bitwise
reproducible. Weight vectors are passed in log form; ``-inf`` marks an atom
with zero mass, which is skipped.
"""

import numpy as np
from numba import njit

SQUARED = 0
POWER = 1


@njit(cache=True)
def row_softmin(C, shift, logw, eps, out):
    """``out[i] = -eps log sum_j exp(logw[j] - (C[i, j] - shift[j]) / eps)``."""
    n, m = C.shape
    for i in range(n):
        top = -np.inf
        for j in range(m):
            if logw[j] > -np.inf:
                z = logw[j] - (C[i, j] - shift[j]) / eps
                if z > top:
                    top = z
        acc = 0.0
        for j in range(m):
            if logw[j] > -np.inf:
                acc += np.exp(logw[j] - (C[i, j] - shift[j]) / eps - top)
        out[i] = -eps * (top + np.log(acc))


@njit(cache=True)
def rows_grad(C, rows, v, mu, nu, logw, eps, out):
    """Accumulate ``sum_{i in rows} mu_i (nu - chi_i)`` into ``out`` (overwritten).

    Returns ``sum_{i in rows} mu_i softmin_i`` so callers get the objective for free.
    """
    m = C.shape[1]
    z = np.empty(m)
    for j in range(m):
        out[j] = 0.0
    total = 0.0
    wsum = 0.0
    for t in range(rows.shape[0]):
        i = rows[t]
        w = mu[i]
        if w == 0.0:
            continue
        top = -np.inf
        for j in range(m):
            if logw[j] > -np.inf:
                z[j] = logw[j] - (C[i, j] - v[j]) / eps
                if z[j] > top:
                    top = z[j]
            else:
                z[j] = -np.inf
        acc = 0.0
        for j in range(m):
            if z[j] > -np.inf:
                z[j] = np.exp(z[j] - top)
                acc += z[j]
            else:
                z[j] = 0.0
        for j in range(m):
            out[j] -= w * (z[j] / acc)
        total += w * (-eps * (top + np.log(acc)))
        wsum += w
    for j in range(m):
        out[j] += wsum * nu[j]
    return total


@njit(cache=True)
def sag_steps(C, blocks, block_ptr, seq, mu, nu, logw, eps, step, v, G, d):
    """Run one SAG step per entry of ``seq`` (block indices).

    ``G[b]`` stores the last gradient of block ``b``; ``d`` is their running sum.
    """
    m = C.shape[1]
    g = np.empty(m)
    for s in range(seq.shape[0]):
        b = seq[s]
        rows = blocks[block_ptr[b]:block_ptr[b + 1]]
        rows_grad(C, rows, v, mu, nu, logw, eps, g)
        for j in range(m):
            d[j] += g[j] - G[b, j]
            G[b, j] = g[j]
        for j in range(m):
            v[j] += step * d[j]


@njit(cache=True)
def _cost(x, y, kind, p, scale):
    s = 0.0
    for a in range(x.shape[0]):
        z = x[a] - y[a]
        s += z * z
    if kind == POWER:
        s = np.sqrt(s) ** p
    return scale * s


@njit(cache=True)
def sgd_chunk(X, Y, nu, logw, eps, step_c, kind, p, scale, vt, va, k0):
    """Averaged SGD steps for the rows of ``X``; returns the new iteration count."""
    J = Y.shape[0]
    r = np.empty(J)
    for t in range(X.shape[0]):
        k = k0 + t + 1
        best = np.inf
        jbest = 0
        for j in range(J):
            r[j] = _cost(X[t], Y[j], kind, p, scale) - vt[j]
            if logw[j] > -np.inf and r[j] < best:
                best = r[j]
                jbest = j
        step = step_c / np.sqrt(k)
        if eps > 0:
            top = -np.inf
            for j in range(J):
                if logw[j] > -np.inf:
                    r[j] = logw[j] - r[j] / eps
                    if r[j] > top:
                        top = r[j]
                else:
                    r[j] = -np.inf
            acc = 0.0
            for j in range(J):
                if r[j] > -np.inf:
                    r[j] = np.exp(r[j] - top)
                    acc += r[j]
                else:
                    r[j] = 0.0
            for j in range(J):
                vt[j] += step * (nu[j] - r[j] / acc)
        else:
            for j in range(J):
                vt[j] += step * nu[j]
            vt[jbest] -= step
        inv = 1.0 / k
        for j in range(J):
            va[j] = inv * vt[j] + (k - 1.0) * inv * va[j]
    return k0 + X.shape[0]
