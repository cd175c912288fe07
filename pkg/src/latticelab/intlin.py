"""Exact integer and rational linear algebra.

Matrices are 2-D numpy arrays with ``dtype=object`` holding Python ``int``
(``IntMat``) or ``fractions.Fraction`` (``RatMat``) entries, so every
operation is exact.  ``intmat``/``ratmat`` coerce array-likes; a 1-D input
is read as a column vector.

Conventions
-----------
* ``𝔚_m`` (``WForm``): upper triangular, positive diagonal, entries above
  the diagonal reduced into ``[0, a_jj)``.  One per left coset
  ``GL_m(Z)·A``.
* ``A_{k,m}``: the canonical primitive ``k×m`` representative of a right
  ``GL_m(Z)`` orbit is the matrix whose transpose is in row Hermite form
  (positive pivots, zeros below pivots, entries above pivots in
  ``[0, pivot)``).  Sign-permutation matrices of the ``ℳ'_{k,m}`` family are
  fixed points of this choice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DomainError,
    NoComplement,
    NotCanonical,
    NotRogersAdmissible,
    RankDeficient,
    SingularMatrix,
    ZeroRank,
)

__all__ = [
    "SmithData",
    "intmat",
    "ratmat",
    "identity",
    "det",
    "rank",
    "inverse",
    "solve",
    "smith",
    "hermite_rows",
    "saturate",
    "coset_canonical_W",
    "orbit_canonical_A",
    "is_wform",
    "is_primitive",
    "rank_decompose",
    "primitive_factor",
    "perp_rep",
    "enumerate_A",
    "enumerate_W",
    "w_diagonals",
    "congruence_count",
    "rational_denominator",
    "b3_construct",
    "translate_D_to_B",
    "gram_det",
]


# ---------------------------------------------------------------------------
# coercion helpers


def intmat(a) -> np.ndarray:
    """Return ``a`` as a 2-D object array of Python ints (1-D -> column)."""
    arr = np.asarray(a, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        if isinstance(v, Fraction):
            if v.denominator != 1:
                raise ValueError(f"non-integral entry {v}")
            v = v.numerator
        iv = int(v)
        if iv != v:
            raise ValueError(f"non-integral entry {v}")
        out[idx] = iv
    return out


def ratmat(a) -> np.ndarray:
    """Return ``a`` as a 2-D object array of ``Fraction`` (1-D -> column)."""
    arr = np.asarray(a, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def identity(n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=object)
    for i in range(n):
        out[i, i] = 1
    # np.zeros with object dtype stores int 0 already
    return out


def _zeros(r: int, c: int) -> np.ndarray:
    out = np.empty((r, c), dtype=object)
    out.fill(0)
    return out


def _as_int_if_integral(M: np.ndarray) -> np.ndarray:
    out = np.empty(M.shape, dtype=object)
    for idx, v in np.ndenumerate(M):
        if isinstance(v, Fraction):
            if v.denominator != 1:
                raise ValueError(f"non-integral entry {v}")
            v = v.numerator
        out[idx] = int(v)
    return out


# ---------------------------------------------------------------------------
# determinants, rank, exact solves


def det(A) -> int | Fraction:
    """Exact determinant (Bareiss fraction-free elimination for integers)."""
    M = np.asarray(A, dtype=object)
    n, m = M.shape
    if n != m:
        raise ValueError("det of non-square matrix")
    if n == 0:
        return 1
    if any(isinstance(v, Fraction) for v in M.flat):
        M = ratmat(M)
        sign = 1
        M = M.copy()
        result = Fraction(1)
        for c in range(n):
            piv = next((r for r in range(c, n) if M[r, c] != 0), None)
            if piv is None:
                return Fraction(0)
            if piv != c:
                M[[c, piv]] = M[[piv, c]]
                sign = -sign
            result *= M[c, c]
            for r in range(c + 1, n):
                f = M[r, c] / M[c, c]
                if f:
                    M[r, c:] = M[r, c:] - f * M[c, c:]
        return sign * result
    M = intmat(M).copy()
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k, k] == 0:
            piv = next((r for r in range(k + 1, n) if M[r, k] != 0), None)
            if piv is None:
                return 0
            M[[k, piv]] = M[[piv, k]]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i, j] = (M[i, j] * M[k, k] - M[i, k] * M[k, j]) // prev
        prev = M[k, k]
    return sign * M[n - 1, n - 1]


def rank(A) -> int:
    M = ratmat(A).copy()
    rows, cols = M.shape
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i, c] != 0), None)
        if piv is None:
            continue
        M[[r, piv]] = M[[piv, r]]
        for i in range(r + 1, rows):
            if M[i, c] != 0:
                f = M[i, c] / M[r, c]
                M[i, c:] = M[i, c:] - f * M[r, c:]
        r += 1
        if r == rows:
            break
    return r


def solve(A, B) -> np.ndarray:
    """Exact solution ``X`` of ``A X = B`` for full-column-rank ``A``.

    Raises ``ValueError`` when the system is inconsistent.
    """
    A = ratmat(A)
    B = ratmat(B)
    rows, cols = A.shape
    if B.shape[0] != rows:
        raise ValueError("shape mismatch")
    aug = np.concatenate([A, B], axis=1)
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if aug[i, c] != 0), None)
        if piv is None:
            raise RankDeficient("coefficient matrix is not of full column rank")
        aug[[r, piv]] = aug[[piv, r]]
        inv = 1 / aug[r, c]
        aug[r, :] = aug[r, :] * inv
        for i in range(rows):
            if i != r and aug[i, c] != 0:
                aug[i, :] = aug[i, :] - aug[i, c] * aug[r, :]
        pivots.append(c)
        r += 1
    for i in range(r, rows):
        if any(v != 0 for v in aug[i, cols:]):
            raise ValueError("inconsistent linear system")
    return aug[:cols, cols:].copy()


def inverse(A) -> np.ndarray:
    """Exact inverse; integral result returned as IntMat when possible."""
    A = np.asarray(A, dtype=object)
    n = A.shape[0]
    if det(A) == 0:
        raise SingularMatrix("matrix is singular")
    X = solve(A, identity(n))
    try:
        return _as_int_if_integral(X)
    except ValueError:
        return X


def gram_det(B) -> int | Fraction:
    """``det(Bᵀ B)``, the squared parallelotope volume ``d(B)^2``."""
    B = np.asarray(B, dtype=object)
    return det(B.T.dot(B))


# ---------------------------------------------------------------------------
# Smith normal form


@dataclass(frozen=True)
class SmithData:
    """Smith decomposition ``A = U · D · V`` with ``U``, ``V`` unimodular."""

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    divisors: tuple

    @property
    def rank(self) -> int:
        return sum(1 for d in self.divisors if d != 0)


def smith(A) -> SmithData:
    """Smith normal form of an integer matrix.

    Returns ``U, D, V`` with ``U @ D @ V == A``; ``divisors`` is the diagonal
    of ``D`` (non-negative, each dividing the next; trailing zeros for a rank
    deficit).
    """
    M = intmat(A).copy()
    m, n = M.shape
    if m == 0 or n == 0:
        raise DomainError("smith of an empty matrix")
    U = identity(m)
    V = identity(n)

    # Invariant throughout: U @ M @ V == A.
    def row_add(i, j, c):  # row_i += c * row_j
        M[i, :] = M[i, :] + c * M[j, :]
        U[:, j] = U[:, j] - c * U[:, i]

    def row_swap(i, j):
        if i != j:
            M[[i, j], :] = M[[j, i], :]
            U[:, [i, j]] = U[:, [j, i]]

    def row_neg(i):
        M[i, :] = -M[i, :]
        U[:, i] = -U[:, i]

    def col_add(i, j, c):  # col_i += c * col_j
        M[:, i] = M[:, i] + c * M[:, j]
        V[j, :] = V[j, :] - c * V[i, :]

    def col_swap(i, j):
        if i != j:
            M[:, [i, j]] = M[:, [j, i]]
            V[[i, j], :] = V[[j, i], :]

    for t in range(min(m, n)):
        nz = [(abs(M[i, j]), i, j) for i in range(t, m) for j in range(t, n) if M[i, j] != 0]
        if not nz:
            break
        _, i0, j0 = min(nz)
        row_swap(t, i0)
        col_swap(t, j0)
        while True:
            done = True
            # clear column t below the pivot
            while True:
                for i in range(t + 1, m):
                    if M[i, t] != 0:
                        row_add(i, t, -(M[i, t] // M[t, t]))
                rest = [(abs(M[i, t]), i) for i in range(t + 1, m) if M[i, t] != 0]
                if not rest:
                    break
                row_swap(t, min(rest)[1])
            # clear row t right of the pivot
            for j in range(t + 1, n):
                if M[t, j] != 0:
                    col_add(j, t, -(M[t, j] // M[t, t]))
            rest = [(abs(M[t, j]), j) for j in range(t + 1, n) if M[t, j] != 0]
            if rest:
                col_swap(t, min(rest)[1])
                continue
            # divisibility of the remaining block
            piv = M[t, t]
            bad = next(
                ((i, j) for i in range(t + 1, m) for j in range(t + 1, n) if M[i, j] % piv != 0),
                None,
            )
            if bad is not None:
                row_add(t, bad[0], 1)
                done = False
            if done:
                break
        if M[t, t] < 0:
            row_neg(t)
    divisors = tuple(int(M[i, i]) for i in range(min(m, n)))
    return SmithData(U=U, D=M, V=V, divisors=divisors)


# ---------------------------------------------------------------------------
# Hermite forms and canonical representatives


def hermite_rows(A):
    """Row Hermite form ``H = T @ A`` with ``T`` unimodular.

    ``H`` is in upper echelon form: positive pivots, zeros below each pivot,
    entries above each pivot reduced into ``[0, pivot)``.  Returns
    ``(H, T, pivot_columns)``.
    """
    M = intmat(A).copy()
    rows, cols = M.shape
    T = identity(rows)
    r = 0
    pivots = []
    for c in range(cols):
        if r == rows:
            break
        while True:
            nz = [(abs(M[i, c]), i) for i in range(r, rows) if M[i, c] != 0]
            if not nz:
                break
            _, p = min(nz)
            if p != r:
                M[[r, p], :] = M[[p, r], :]
                T[[r, p], :] = T[[p, r], :]
            cleared = True
            for i in range(r + 1, rows):
                if M[i, c] != 0:
                    q = M[i, c] // M[r, c]
                    M[i, :] = M[i, :] - q * M[r, :]
                    T[i, :] = T[i, :] - q * T[r, :]
                    if M[i, c] != 0:
                        cleared = False
            if cleared:
                break
        if M[r, c] == 0:
            continue
        if M[r, c] < 0:
            M[r, :] = -M[r, :]
            T[r, :] = -T[r, :]
        for i in range(r):
            q = M[i, c] // M[r, c]
            if q:
                M[i, :] = M[i, :] - q * M[r, :]
                T[i, :] = T[i, :] - q * T[r, :]
        pivots.append(c)
        r += 1
    return M, T, tuple(pivots)


def is_wform(A) -> bool:
    A = np.asarray(A, dtype=object)
    m = A.shape[0]
    if A.shape != (m, m):
        return False
    for i in range(m):
        if A[i, i] <= 0:
            return False
        for j in range(m):
            if j < i and A[i, j] != 0:
                return False
            if j > i and not (0 <= A[i, j] < A[j, j]):
                return False
    return True


def coset_canonical_W(A):
    """Unique ``H ∈ 𝔚_m`` in the left coset ``GL_m(Z)·A``; returns ``(H, γ)`` with ``H = γ A``."""
    A = intmat(A)
    m, n = A.shape
    if m != n:
        raise ValueError("coset_canonical_W expects a square matrix")
    if det(A) == 0:
        raise SingularMatrix("coset_canonical_W of a singular matrix")
    H, T, _ = hermite_rows(A)
    return H, T


def orbit_canonical_A(B):
    """Canonical element ``C = B γ`` of the right ``GL_m(Z)`` orbit of ``B``.

    Returns ``(C, γ)``.  Raises :class:`RankDeficient` unless ``rank B = m``.
    """
    B = intmat(B)
    k, m = B.shape
    H, T, piv = hermite_rows(B.T)
    if len(piv) != m:
        raise RankDeficient(f"rank {len(piv)} < {m}")
    return H.T.copy(), T.T.copy()


def is_primitive(B) -> bool:
    """True iff the columns of ``B`` span a primitive sublattice of full rank ``m``."""
    B = intmat(B)
    k, m = B.shape
    if m > k:
        return False
    if m == 1:
        return math.gcd(*[int(v) for v in B[:, 0]]) == 1
    divs = smith(B).divisors
    return all(d == 1 for d in divs)


def saturate(C) -> np.ndarray:
    """Primitive basis (``n×r``) of ``colspan(C) ∩ Z^n``."""
    C = intmat(C)
    sm = smith(C)
    r = sm.rank
    if r == 0:
        raise ZeroRank("zero matrix has no column space")
    return sm.U[:, :r].copy()


def rank_decompose(C):
    """Factor ``C = γ Bᵀ`` with ``B`` the canonical ``A_{k,m}`` element, ``m = rank C``.

    Returns ``(γ, B)``.
    """
    C = intmat(C)
    if all(v == 0 for v in C.flat):
        raise ZeroRank("zero matrix")
    S = saturate(C.T)
    B, _ = orbit_canonical_A(S)
    gamma_t = solve(B, C.T)
    gamma = _as_int_if_integral(gamma_t.T)
    return gamma, B


def primitive_factor(C):
    """Factor ``C = P A`` with ``P`` primitive and ``A ∈ 𝔚_m``; returns ``(P, A)``."""
    C = intmat(C)
    n, m = C.shape
    if m > n or rank(C) != m:
        raise RankDeficient("primitive_factor needs full column rank")
    S = saturate(C)
    T = _as_int_if_integral(solve(S, C))
    H, G, _ = hermite_rows(T)
    P = S.dot(inverse(G))
    return intmat(P), H


def perp_rep(B):
    """Canonical primitive basis of the orthogonal complement of ``V_B``."""
    B = intmat(B)
    k, m = B.shape
    if m >= k:
        raise NoComplement(f"no complement for k={k}, m={m}")
    sm = smith(B.T)
    r = sm.rank
    Vinv = inverse(sm.V)
    K = intmat(Vinv[:, r:])
    C, _ = orbit_canonical_A(K)
    return C


# ---------------------------------------------------------------------------
# enumerations


def enumerate_A(k: int, m: int, H: int) -> list:
    """All canonical primitive ``k×m`` matrices with max ``|entry| <= H``.

    Candidates are generated directly in canonical (transposed row Hermite)
    shape and then filtered by primitivity.
    """
    if not (1 <= m <= k) or H < 1:
        raise DomainError("need 1 <= m <= k and H >= 1")
    if m == 1:
        return [intmat(v) for v in _canonical_primitive_vectors(k, H)]
    if m == k:
        return [identity(k)]
    out = []
    rng_free = range(-H, H + 1)
    for pivots in itertools.combinations(range(k), m):
        for pivvals in itertools.product(range(1, H + 1), repeat=m):
            # slot ranges for each row of Cᵀ
            row_ranges = []
            for i in range(m):
                ranges = []
                for c in range(k):
                    if c < pivots[i]:
                        ranges.append((0,))
                    elif c == pivots[i]:
                        ranges.append((pivvals[i],))
                    elif c in pivots:
                        j = pivots.index(c)
                        ranges.append(range(0, pivvals[j]))
                    else:
                        ranges.append(rng_free)
                row_ranges.append(ranges)
            flat = [r for rr in row_ranges for r in rr]
            for entries in itertools.product(*flat):
                Ct = np.array(entries, dtype=object).reshape(m, k)
                C = Ct.T.copy()
                if is_primitive(C):
                    out.append(C)
    return out


def _canonical_primitive_vectors(k: int, H: int) -> np.ndarray:
    """Primitive vectors of ``Z^k`` with first non-zero entry positive, max-norm <= H."""
    vecs = []
    for lead in range(k):
        tail = k - lead - 1
        if tail:
            grids = np.meshgrid(*([np.arange(-H, H + 1)] * tail), indexing="ij")
            rest = np.stack([g.ravel() for g in grids], axis=1)
        else:
            rest = np.zeros((1, 0), dtype=np.int64)
        for p in range(1, H + 1):
            block = np.zeros((rest.shape[0], k), dtype=np.int64)
            block[:, lead] = p
            block[:, lead + 1:] = rest
            g = np.gcd.reduce(np.abs(block), axis=1)
            vecs.append(block[g == 1])
    return np.concatenate(vecs, axis=0) if vecs else np.zeros((0, k), dtype=np.int64)


def w_diagonals(m: int, Dmax: int) -> Iterator[tuple]:
    """Diagonals ``(d_1..d_m)`` of positive integers with product <= Dmax."""

    def rec(prefix, budget, left):
        if left == 0:
            yield tuple(prefix)
            return
        for d in range(1, budget + 1):
            yield from rec(prefix + [d], budget // d, left - 1)

    if m == 0:
        yield ()
        return
    yield from rec([], Dmax, m)


def enumerate_W(m: int, Dmax: int) -> list:
    """All ``A ∈ 𝔚_m`` with ``det A <= Dmax``."""
    if Dmax < 1:
        raise DomainError("Dmax must be >= 1")
    out = []
    for diag in w_diagonals(m, Dmax):
        slots = [(i, j) for j in range(m) for i in range(j)]
        ranges = [range(diag[j]) for (i, j) in slots]
        for vals in itertools.product(*ranges):
            A = _zeros(m, m)
            for i in range(m):
                A[i, i] = diag[i]
            for (i, j), v in zip(slots, vals):
                A[i, j] = v
            out.append(A)
    return out


# ---------------------------------------------------------------------------
# congruences and rational helpers


def congruence_count(theta, q: int) -> int:
    """``#{a ∈ (Z/q)^{m1} : θᵀ a ≡ 0 mod q}`` from the Smith divisors of θ."""
    theta = intmat(theta)
    if q < 1:
        raise DomainError("q must be >= 1")
    m1 = theta.shape[0]
    if q == 1:
        return 1
    if all(v == 0 for v in theta.flat):
        return q**m1
    divs = smith(theta).divisors
    r = sum(1 for d in divs if d != 0)
    N = q ** (m1 - r)
    for s in divs[:r]:
        N *= math.gcd(s, q)
    return N


def rational_denominator(xi) -> int:
    """Least common denominator of the entries of ``ξ``."""
    X = ratmat(xi)
    q = 1
    for v in X.flat:
        q = q * v.denominator // math.gcd(q, v.denominator)
    return q


def _is_canonical_primitive(B) -> bool:
    if not is_primitive(B):
        return False
    C, _ = orbit_canonical_A(B)
    return bool(np.all(C == B))


def b3_construct(B1, B2, alpha):
    """Build ``(B3, J)`` with ``B3 J = [[B1, 0], [B2 α, B̃2]]``.

    ``B3`` is the canonical primitive basis of the column space of the block
    matrix and ``J`` the exact rational change of basis.
    """
    B1 = intmat(B1)
    B2 = intmat(B2)
    alpha = ratmat(alpha)
    k1, m1 = B1.shape
    k2, m2 = B2.shape
    if alpha.shape != (m2, m1):
        raise ValueError(f"alpha must be {m2}x{m1}")
    if not _is_canonical_primitive(B1) or not _is_canonical_primitive(B2):
        raise NotCanonical("B1 and B2 must be canonical primitive representatives")
    if m2 < k2:
        Bt2 = perp_rep(B2)
    else:
        Bt2 = _zeros(k2, 0)
    m2p = Bt2.shape[1]
    top = np.concatenate([ratmat(B1), ratmat(_zeros(k1, m2p))], axis=1) if m2p else ratmat(B1)
    bottom = np.concatenate([ratmat(B2).dot(alpha), ratmat(Bt2)], axis=1) if m2p else ratmat(B2).dot(alpha)
    D = np.concatenate([top, bottom], axis=0)
    q = rational_denominator(D)
    S = saturate(intmat(D * q))
    B3, _ = orbit_canonical_A(S)
    J = solve(B3, D)
    return B3, J


def translate_D_to_B(D):
    """Translate an admissible ``m×k`` matrix ``D`` to ``(B, q, divisors)``.

    ``B`` is the canonical element of the orbit of ``γ2'(D)``, the transposed
    top ``m×k`` block of the column transform in the Smith decomposition
    ``D = γ1 diag(ε) (I 0) γ2``.
    """
    D = intmat(D)
    m, k = D.shape
    if m > k:
        raise NotRogersAdmissible("m must not exceed k")
    if all(v == 0 for v in D.flat):
        raise NotRogersAdmissible("D vanishes")
    if math.gcd(*[int(v) for v in D.flat]) != 1:
        raise NotRogersAdmissible("entries of D are not coprime")
    q = _rogers_division(D)
    if q is None:
        raise NotRogersAdmissible("no admissible division (nu; mu)")
    sm = smith(D)
    Bprime = sm.V[:m, :].T.copy()
    B, _ = orbit_canonical_A(Bprime)
    return B, q, sm.divisors


def _rogers_division(D):
    m, k = D.shape
    for nu in itertools.combinations(range(k), m):
        mu = [c for c in range(k) if c not in nu]
        q = D[0, nu[0]]
        if q <= 0:
            continue
        ok = all(D[i, nu[j]] == (q if i == j else 0) for i in range(m) for j in range(m))
        if ok:
            ok = all(D[i, c] == 0 for i in range(m) for c in mu if c < nu[i])
        if ok:
            return int(q)
    return None
