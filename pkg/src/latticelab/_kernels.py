"""Compiled inner loops: LLL reduction and Fincke–Pohst enumeration.

Bases are ``float64`` arrays whose *columns* are the basis vectors.  All
functions here are plain numerical kernels; validation and bookkeeping live
in :mod:`latticelab.geom`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _gso_rows(B, mu, bn, start):
    """Recompute Gram–Schmidt data for basis vectors ``start..m-1``."""
    n, m = B.shape
    bstar = np.empty((n, m))
    # rebuild b*_j for all j (cheap at the sizes used here)
    for j in range(m):
        for r in range(n):
            bstar[r, j] = B[r, j]
        for l in range(j):
            if j >= start:
                s = 0.0
                for r in range(n):
                    s += B[r, j] * bstar[r, l]
                mu[j, l] = s / bn[l]
            c = mu[j, l]
            for r in range(n):
                bstar[r, j] -= c * bstar[r, l]
        if j >= start:
            s = 0.0
            for r in range(n):
                s += bstar[r, j] * bstar[r, j]
            bn[j] = s
        mu[j, j] = 1.0


@njit(cache=True)
def lll(B0, delta):
    """LLL-reduce the columns of ``B0``; returns ``(B, U)`` with ``B = B0 @ U``."""
    n, m = B0.shape
    B = B0.copy()
    U = np.zeros((m, m), dtype=np.int64)
    for i in range(m):
        U[i, i] = 1
    mu = np.zeros((m, m))
    bn = np.zeros(m)
    _gso_rows(B, mu, bn, 0)
    k = 1
    iters = 0
    while k < m:
        iters += 1
        if iters > 1000000:
            return B, U, False
        for j in range(k - 1, -1, -1):
            q = math.floor(mu[k, j] + 0.5)
            if q != 0.0:
                qi = np.int64(q)
                for r in range(n):
                    B[r, k] -= q * B[r, j]
                for r in range(m):
                    U[r, k] -= qi * U[r, j]
                for l in range(j):
                    mu[k, l] -= q * mu[j, l]
                mu[k, j] -= q
        if bn[k] >= (delta - mu[k, k - 1] * mu[k, k - 1]) * bn[k - 1]:
            k += 1
        else:
            for r in range(n):
                t = B[r, k]
                B[r, k] = B[r, k - 1]
                B[r, k - 1] = t
            for r in range(m):
                ti = U[r, k]
                U[r, k] = U[r, k - 1]
                U[r, k - 1] = ti
            _gso_rows(B, mu, bn, k - 1)
            if k > 1:
                k -= 1
    return B, U, True


@njit(cache=True)
def gso_norms(B):
    n, m = B.shape
    mu = np.zeros((m, m))
    bn = np.zeros(m)
    _gso_rows(B, mu, bn, 0)
    return bn, mu


@njit(cache=True)
def _cholesky_upper(G):
    """Upper triangular ``R`` with ``G = Rᵀ R``; returns (R, ok)."""
    m = G.shape[0]
    R = np.zeros((m, m))
    for i in range(m):
        s = G[i, i]
        for k in range(i):
            s -= R[k, i] * R[k, i]
        if s <= 0.0:
            return R, False
        R[i, i] = math.sqrt(s)
        for j in range(i + 1, m):
            s = G[i, j]
            for k in range(i):
                s -= R[k, i] * R[k, j]
            R[i, j] = s / R[i, i]
    return R, True


@njit(cache=True)
def _enum_core(B, R2, mode, t, store):
    """Enumerate nonzero ``c`` with ``|B c|^2 <= R2``.

    mode 0: store coefficient vectors (``store`` True) and exact norms;
    mode 1: return the sum of ``exp(-pi |v|^2 / t)`` over found vectors;
    mode 2: return the number of found vectors with ``|v|^2 < R2`` (strict).
    """
    n, m = B.shape
    G = B.T @ B
    R, ok = _cholesky_upper(G)
    cap = 64
    coeffs = np.zeros((cap, m), dtype=np.int64)
    norms = np.zeros(cap)
    count = 0
    acc = 0.0
    if not ok:
        return coeffs[:0], norms[:0], -1.0, False
    # q[i,j] = R[i,j]/R[i,i]
    q = np.zeros((m, m))
    d = np.zeros(m)
    for i in range(m):
        d[i] = R[i, i] * R[i, i]
        for j in range(i + 1, m):
            q[i, j] = R[i, j] / R[i, i]
    c = np.zeros(m, dtype=np.int64)
    center = np.zeros(m)
    partial = np.zeros(m + 1)  # partial[i] = sum over levels >= i
    upper = np.zeros(m, dtype=np.int64)
    slack = R2 * 1e-9 + 1e-300
    i = m - 1
    center[i] = 0.0
    r = math.sqrt((R2 + slack) / d[i])
    c[i] = np.int64(math.ceil(center[i] - r))
    upper[i] = np.int64(math.floor(center[i] + r))
    v = np.zeros(n)
    while True:
        if c[i] > upper[i]:
            i += 1
            if i == m:
                break
            c[i] += 1
            continue
        diff = c[i] - center[i]
        partial[i] = partial[i + 1] + d[i] * diff * diff
        if partial[i] > R2 + slack:
            # values further from the centre only grow; skip the rest of this level
            if c[i] > center[i]:
                c[i] = upper[i] + 1
            else:
                c[i] += 1
            continue
        if i == 0:
            nonzero = False
            for j in range(m):
                if c[j] != 0:
                    nonzero = True
                    break
            if nonzero:
                for rr in range(n):
                    s = 0.0
                    for j in range(m):
                        s += B[rr, j] * c[j]
                    v[rr] = s
                nrm = 0.0
                for rr in range(n):
                    nrm += v[rr] * v[rr]
                if mode == 0:
                    if nrm <= R2:
                        if count == cap:
                            cap *= 2
                            nc = np.zeros((cap, m), dtype=np.int64)
                            nn = np.zeros(cap)
                            nc[:count] = coeffs[:count]
                            nn[:count] = norms[:count]
                            coeffs = nc
                            norms = nn
                        for j in range(m):
                            coeffs[count, j] = c[j]
                        norms[count] = nrm
                        count += 1
                elif mode == 1:
                    if nrm <= R2:
                        acc += math.exp(-math.pi * nrm / t)
                        count += 1
                else:
                    if nrm < R2:
                        acc += 1.0
                        count += 1
            c[0] += 1
            continue
        # descend
        i -= 1
        s = 0.0
        for j in range(i + 1, m):
            s -= q[i, j] * c[j]
        center[i] = s
        rem = R2 + slack - partial[i + 1]
        if rem < 0.0:
            rem = 0.0
        r = math.sqrt(rem / d[i])
        c[i] = np.int64(math.ceil(center[i] - r))
        upper[i] = np.int64(math.floor(center[i] + r))
    return coeffs[:count], norms[:count], acc, True


@njit(cache=True)
def enumerate_coeffs(B, R2):
    coeffs, norms, _, ok = _enum_core(B, R2, 0, 1.0, True)
    return coeffs, norms, ok


@njit(cache=True)
def gaussian_sum(B, t, R2):
    """``Σ exp(-π|v|²/t)`` over nonzero ``v`` with ``|v|² <= R2``."""
    _, _, acc, ok = _enum_core(B, R2, 1, t, False)
    return acc, ok


@njit(cache=True)
def count_open_ball(B, R2):
    """Number of nonzero lattice vectors with ``|v|² < R2``."""
    _, _, acc, ok = _enum_core(B, R2, 2, 1.0, False)
    return acc, ok
