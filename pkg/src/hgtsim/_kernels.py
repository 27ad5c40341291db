"""Hot inner loops of the EM engine, optionally accelerated with Numba.

Pure-NumPy fallbacks keep the package functional without Numba; the JIT path
computes the same quantities with sequential accumulation (last-ulp float
differences from the vectorized fallback are possible, never anything more).
All kernels are deterministic; fastmath stays off.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly by environment
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _sweep_jit(q, log_pi, lt1, lt0, y, edge_of, partner, side, ptr, max_sweeps, tol_q):
    n, k = q.shape
    sweeps = 0
    score = np.empty(k)
    for _ in range(max_sweeps):
        sweeps += 1
        delta = 0.0
        for i in range(n):
            for a in range(k):
                score[a] = log_pi[a]
            for e in range(ptr[i], ptr[i + 1]):
                j = edge_of[e]
                p = partner[e]
                mat = lt1 if y[j] == 1 else lt0
                if side[e] == 0:
                    for a in range(k):
                        acc = 0.0
                        for b in range(k):
                            acc += mat[a, b] * q[p, b]
                        score[a] += acc
                else:
                    for a in range(k):
                        acc = 0.0
                        for b in range(k):
                            acc += mat[b, a] * q[p, b]
                        score[a] += acc
            mx = score[0]
            for a in range(1, k):
                if score[a] > mx:
                    mx = score[a]
            total = 0.0
            for a in range(k):
                score[a] = np.exp(score[a] - mx)
                total += score[a]
            for a in range(k):
                v = score[a] / total
                d = abs(v - q[i, a])
                if d > delta:
                    delta = d
                q[i, a] = v
        if delta < tol_q:
            break
    return sweeps


@njit(cache=True)
def _mstep_jit(q, i1, i2, y):
    m = i1.shape[0]
    k = q.shape[1]
    num = np.zeros((k, k))
    den = np.zeros((k, k))
    for j in range(m):
        yj = y[j]
        for a in range(k):
            qa = q[i1[j], a]
            if qa != 0.0:
                for b in range(k):
                    w = qa * q[i2[j], b]
                    den[a, b] += w
                    if yj == 1:
                        num[a, b] += w
    return num, den


@njit(cache=True)
def _elbo_edges_jit(q, lt1, lt0, y, i1, i2):
    m = i1.shape[0]
    k = q.shape[1]
    total = 0.0
    for j in range(m):
        mat = lt1 if y[j] == 1 else lt0
        for a in range(k):
            qa = q[i1[j], a]
            if qa != 0.0:
                acc = 0.0
                for b in range(k):
                    acc += mat[a, b] * q[i2[j], b]
                total += qa * acc
    return total


def sweep(q, log_pi, lt1, lt0, y, adjacency, max_sweeps, tol_q):
    """Gauss-Seidel sweeps over agents, in place; returns sweeps executed."""
    edge_of, partner, side, ptr = adjacency
    if HAVE_NUMBA:
        return _sweep_jit(q, log_pi, lt1, lt0, y, edge_of, partner, side, ptr, max_sweeps, tol_q)
    n = q.shape[0]
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        delta = 0.0
        for i in range(n):
            lo, hi = ptr[i], ptr[i + 1]
            s = log_pi.copy()
            for e in range(lo, hi):
                mat = lt1 if y[edge_of[e]] == 1 else lt0
                oriented = mat if side[e] == 0 else mat.T
                s = s + oriented @ q[partner[e]]
            s -= s.max()
            np.exp(s, out=s)
            row = s / s.sum()
            d = float(np.abs(row - q[i]).max())
            if d > delta:
                delta = d
            q[i] = row
        if delta < tol_q:
            break
    return sweeps


def mstep_sums(q, i1, i2, y):
    """Directed q-weighted success and exposure sums per type cell."""
    if HAVE_NUMBA:
        return _mstep_jit(q, i1, i2, y)
    if len(i1) == 0:
        k = q.shape[1]
        return np.zeros((k, k)), np.zeros((k, k))
    q1, q2 = q[i1], q[i2]
    num = np.einsum("ja,jb->ab", q1 * (y == 1)[:, None], q2)
    den = np.einsum("ja,jb->ab", q1, q2)
    return num, den


def elbo_edges(q, lt1, lt0, y, i1, i2):
    """Edge part of the clamped bound."""
    if len(i1) == 0:
        return 0.0
    if HAVE_NUMBA:
        return _elbo_edges_jit(q, lt1, lt0, y, i1, i2)
    L = np.where((y == 1)[:, None, None], lt1[None], lt0[None])
    return float(np.einsum("ja,jab,jb->", q[i1], L, q[i2]))
