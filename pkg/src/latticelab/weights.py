"""Zeta values, the weight ``W(β)`` and the congruence identity over ``𝔚_m``.

Every infinite series over ``𝔚_m`` is truncated at ``det A <= Dmax``.  The
discarded part is bounded with the exact identity

    Σ_{A ∈ 𝔚_m} (det A)^{-s} = ζ(s) ζ(s-1) ··· ζ(s-m+1)

through ``Σ_{det A > D} (det A)^{-s} <= D^{-ε} Σ_{A} (det A)^{-(s-ε)}``,
which holds for every ``0 < ε < s - m``.  The bound is minimised over a
grid of ``ε`` values; each candidate is rigorous on its own.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

from . import intlin
from .errors import DomainError

__all__ = [
    "TruncatedValue",
    "zeta_val",
    "zeta_product",
    "w_tail_bound",
    "w_counts",
    "weight_W",
    "linalg_identity_check",
]


@dataclass(frozen=True)
class TruncatedValue:
    """A partial sum of a non-negative series with a bound on what was left out.

    The exact value lies in ``[value, value + tail_bound]``.  ``rigorous`` is
    False when the tail is an empirical (doubling) estimate rather than a
    proven bound.
    """

    value: float
    tail_bound: float
    cutoff: int
    rigorous: bool = True

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound

    def contains(self, x: float, slack: float = 1e-12) -> bool:
        pad = slack * max(1.0, abs(x))
        return self.value - pad <= x <= self.upper + pad


@lru_cache(maxsize=4096)
def _zeta_cached(s: float) -> float:
    return float(special.zeta(s, 1))


def zeta_val(s, eps: float = 1e-14) -> float:
    """Riemann zeta at a real argument ``s > 1`` (integers ``s >= 2`` in the usual use).

    Values come from ``scipy.special.zeta`` (accurate to a few ulps) and are
    cached.  ``eps`` below double precision is refused.  The test-suite
    checks the values against :func:`_zeta_series`.
    """
    if isinstance(s, (int, np.integer)) and s < 2:
        raise DomainError(f"zeta_val needs s >= 2, got {s}")
    if s <= 1:
        raise DomainError(f"zeta diverges at s = {s}")
    if eps <= 0:
        raise DomainError("eps must be positive")
    if eps < 1e-15:
        raise DomainError("requested accuracy beyond double precision")
    return _zeta_cached(float(s))


def _zeta_series(s: int, eps: float) -> float:
    """Partial sum plus the midpoint of the integral tail bracket.

    ``(K+1)^{1-s}/(s-1) <= Σ_{k>K} k^{-s} <= K^{1-s}/(s-1)``, so the error is
    at most ``K^{-s}/2 <= eps`` (up to rounding).
    """
    # half-width of the tail bracket is <= K^{-s}/2
    K = max(2, math.ceil((1.0 / (2.0 * eps)) ** (1.0 / s)))
    k = np.arange(1, K + 1, dtype=float)
    head = math.fsum((k[::-1]) ** (-float(s)))
    lo = (K + 1) ** (1.0 - s) / (s - 1)
    hi = K ** (1.0 - s) / (s - 1)
    return head + 0.5 * (lo + hi)


def zeta_product(n: int, m1: int) -> float:
    """``ζ(n) ζ(n-1) ··· ζ(n-m1+1)`` (empty product 1)."""
    out = 1.0
    for j in range(n - m1 + 1, n + 1):
        out *= zeta_val(j)
    return out


def w_tail_bound(s: float, m: int, D: int) -> float:
    """Rigorous bound for ``Σ_{A ∈ 𝔚_m, det A > D} (det A)^{-s}``.

    Requires ``s > m``; returns ``inf`` otherwise.
    """
    if m == 0:
        return 0.0
    room = s - m
    if room <= 0:
        return math.inf
    best = math.inf
    for frac in np.linspace(0.05, 0.95, 19):
        eps = frac * room
        prod = 1.0
        for j in range(m):
            prod *= _zeta_cached(float(s - eps - j))
        best = min(best, prod * D ** (-eps))
    if room > 1:
        prod = 1.0
        for j in range(m):
            prod *= _zeta_cached(float(s - 1 - j))
        best = min(best, prod / D)
    return float(best)


# ---------------------------------------------------------------------------
# enumeration of 𝔚_β


def w_counts(beta, Dmax: int) -> dict:
    """``{d: #{A ∈ 𝔚_{m1} : det A = d, β = Aᵀ g for an integer g}}`` for ``d <= Dmax``.

    Rows of ``βᵀ`` lying in the row lattice of ``A`` is the same as solving
    ``Aᵀ g = β`` in integers; ``Aᵀ`` is lower triangular so ``g`` is found by
    forward substitution column by column of ``A``.
    """
    beta = np.array(intlin.intmat(beta), dtype=object)
    m1, m2 = beta.shape
    counts: dict = {}
    big = any(abs(int(v)) > 2**40 for v in beta.flat)
    bint = beta if big else beta.astype(np.int64)

    def rec(i, g_rows, det_so_far):
        budget = Dmax // det_so_far
        if i == m1 - 1:
            # last column: count the admissible off-diagonal vectors directly
            for d in range(1, budget + 1):
                c = _count_last_column(bint[i], g_rows, d, big)
                if c:
                    dd = det_so_far * d
                    counts[dd] = counts.get(dd, 0) + c
            return
        for d in range(1, budget + 1):
            for a in _offdiag_vectors(i, d):
                resid = bint[i].copy()
                for j in range(i):
                    if a[j]:
                        resid = resid - a[j] * g_rows[j]
                if any(int(v) % d for v in resid):
                    continue
                g_i = resid // d
                rec(i + 1, g_rows + [g_i], det_so_far * d)

    if m1 == 0:
        return {1: 1}
    rec(0, [], 1)
    return counts


def _offdiag_vectors(i, d):
    if i == 0:
        yield ()
        return
    yield from itertools.product(range(d), repeat=i)


def _count_last_column(beta_row, g_rows, d, big):
    i = len(g_rows)
    if i == 0:
        return 1 if all(int(v) % d == 0 for v in beta_row) else 0
    if big:
        c = 0
        for a in itertools.product(range(d), repeat=i):
            resid = beta_row.copy()
            for j in range(i):
                resid = resid - a[j] * g_rows[j]
            if all(int(v) % d == 0 for v in resid):
                c += 1
        return c
    # vectorised: residues of β_i - Σ a_j g_j modulo d over the grid of a
    G = np.array([np.asarray(g, dtype=np.int64) % d for g in g_rows])  # i × m2
    target = np.asarray(beta_row, dtype=np.int64) % d
    grids = np.meshgrid(*([np.arange(d, dtype=np.int64)] * i), indexing="ij")
    A = np.stack([g.ravel() for g in grids], axis=1)  # d^i × i
    vals = (A @ G - target) % d
    return int(np.count_nonzero(np.all(vals == 0, axis=1)))


def _finite_support_bound(beta):
    """``∏ ε_i`` when ``rank β = m1`` (then ``det A`` divides it), else None."""
    beta = intlin.intmat(beta)
    m1, m2 = beta.shape
    if all(v == 0 for v in beta.flat):
        return None
    divs = intlin.smith(beta).divisors
    r = sum(1 for d in divs if d)
    if r < m1:
        return None
    out = 1
    for d in divs[:m1]:
        out *= d
    return out


def weight_W(beta, n: int, Dmax: int) -> TruncatedValue:
    """Truncated ``W(β) = Σ_{A ∈ 𝔚_β} (det A)^{m2-n} / ∏_{j=n-m1+1}^{n} ζ(j)``."""
    beta = intlin.intmat(beta)
    m1, m2 = beta.shape
    if Dmax < 1:
        raise DomainError("Dmax must be >= 1")
    if n <= m1 + m2:
        raise DomainError(f"W(β) diverges for n={n} <= m1+m2={m1 + m2}")
    counts = w_counts(beta, Dmax)
    s = n - m2
    value = math.fsum(c * float(d) ** (-s) for d, c in sorted(counts.items()))
    norm = zeta_product(n, m1)
    fin = _finite_support_bound(beta)
    if fin is not None and Dmax >= fin:
        tail = 0.0
    else:
        tail = w_tail_bound(s, m1, Dmax)
    return TruncatedValue(value / norm, tail / norm, Dmax)


# ---------------------------------------------------------------------------
# the congruence identity


def _wform_congruence_counts(theta, q: int, Dmax: int) -> dict:
    """``{d: #{A ∈ 𝔚_m : det A = d, A θ ≡ 0 mod q}}``."""
    theta = np.asarray(intlin.intmat(theta), dtype=np.int64) % q
    return dict(_wform_counts_cached(theta.tobytes(), theta.shape, q, Dmax))


@lru_cache(maxsize=4096)
def _wform_counts_cached(key: bytes, shape: tuple, q: int, Dmax: int) -> tuple:
    # the counts depend on θ only through θ mod q
    theta = np.frombuffer(key, dtype=np.int64).reshape(shape)
    m1 = theta.shape[0]
    counts: dict = {}
    for diag in intlin.w_diagonals(m1, Dmax):
        slots = [(i, j) for j in range(m1) for i in range(j)]
        if slots:
            # entries only matter modulo q; each residue r carries the number
            # of x in [0, d_j) with x ≡ r (mod q)
            residues, mults = [], []
            for (i, j) in slots:
                d = diag[j]
                r = np.arange(min(d, q), dtype=np.int64)
                residues.append(r)
                mults.append(d // q + (r < d % q).astype(np.int64))
            grids = np.meshgrid(*residues, indexing="ij")
            mgrids = np.meshgrid(*mults, indexing="ij")
            flat = {s: g.ravel() for s, g in zip(slots, grids)}
            w = np.prod(np.stack([g.ravel() for g in mgrids]), axis=0)
            npts = w.shape[0]
        else:
            flat = {}
            w = np.ones(1, dtype=np.int64)
            npts = 1
        ok = np.ones(npts, dtype=bool)
        for i in range(m1):
            row = np.broadcast_to(diag[i] * theta[i], (npts, theta.shape[1])).copy()
            for j in range(i + 1, m1):
                row = row + flat[(i, j)][:, None] * theta[j][None, :]
            ok &= np.all(row % q == 0, axis=1)
        c = int(w[ok].sum())
        if c:
            d = 1
            for x in diag:
                d *= x
            counts[d] = counts.get(d, 0) + c
    return tuple(sorted(counts.items()))


def linalg_identity_check(theta, q: int, n: int, Dmax: int):
    """Truncated ``Σ_{A ∈ 𝔚, Aθ ≡ 0 (q)} (det A)^{-n} / ∏ζ`` and its closed form ``(N/q^{m1})^n``.

    Returns ``(lhs, rhs)`` with ``lhs`` a :class:`TruncatedValue` and ``rhs``
    an exact ``Fraction``.
    """
    theta = intlin.intmat(theta)
    m1 = theta.shape[0]
    if q < 1:
        raise DomainError("q must be >= 1")
    if n <= m1 + 1:
        raise DomainError("need n > m1 + 1")
    counts = _wform_congruence_counts(theta, q, Dmax)
    norm = zeta_product(n, m1)
    value = math.fsum(c * float(d) ** (-n) for d, c in sorted(counts.items()))
    tail = w_tail_bound(n, m1, Dmax)
    N = intlin.congruence_count(theta, q)
    rhs = Fraction(N, q**m1) ** n
    return TruncatedValue(value / norm, tail / norm, Dmax), rhs
