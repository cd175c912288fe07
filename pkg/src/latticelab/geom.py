"""Real lattice geometry: bases, duals, volumes, short vectors and the G-action."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from . import _kernels
from .errors import NotOnManifold, NumericalFailure, RankDeficient, SingularMatrix

__all__ = [
    "Lattice",
    "TuplePoint",
    "MEMBERSHIP_TOL",
    "ball_volume",
    "dvol",
    "dual",
    "lll",
    "short_vectors",
    "short_coords",
    "gaussian_radius",
    "gaussian_tail_bound",
    "normalized_volumes",
    "apply_g",
    "scaling_delta",
    "on_manifold",
    "transporter",
]

#: relative tolerance for floating point membership in S(β)
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class Lattice:
    """A full-rank lattice in R^n; the columns of ``basis`` generate it."""

    basis: np.ndarray
    reduced: bool = field(default=False, compare=False)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"basis must be square, got shape {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def covolume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    @property
    def gram(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def coords(self, v) -> np.ndarray:
        """Real coordinates of ``v`` (columns) in this basis."""
        return np.linalg.solve(self.basis, np.asarray(v, dtype=float))

    def integer_coords(self, v, tol: float = 1e-6) -> np.ndarray:
        """Integer coordinates of lattice vectors ``v``; raises if ``v`` is off-lattice."""
        c = self.coords(v)
        ci = np.rint(c)
        if np.max(np.abs(c - ci), initial=0.0) > tol:
            raise NumericalFailure("vector is not in the lattice")
        return ci.astype(np.int64)


@dataclass(frozen=True)
class TuplePoint:
    """A pair ``(x, y)`` of ``n×m1`` and ``n×m2`` real matrices."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if x.shape[0] != y.shape[0]:
            raise ValueError("x and y must live in the same R^n")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def pairing(self) -> np.ndarray:
        return self.x.T @ self.y


def ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n, via log-Gamma."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return math.exp(0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0))


def dvol(x) -> float:
    """m-dimensional volume of the parallelotope spanned by the columns of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, m = x.shape
    if m == 0:
        return 1.0
    if m > n:
        raise ValueError("more columns than dimensions")
    g = np.linalg.det(x.T @ x)
    return math.sqrt(g) if g > 0 else 0.0


def dual(L: Lattice) -> Lattice:
    """Dual lattice; its basis is the inverse transpose of ``L.basis``."""
    b = L.basis
    if L.covolume == 0.0 or not np.isfinite(np.linalg.cond(b)):
        raise SingularMatrix("singular basis")
    return Lattice(np.linalg.inv(b).T)


def lll(L: Lattice, delta: float = 0.99):
    """LLL reduction; returns ``(reduced Lattice, U)`` with ``reduced.basis = L.basis @ U``."""
    b = np.ascontiguousarray(L.basis, dtype=float)
    if np.linalg.cond(b) > 1e14:
        raise NumericalFailure("basis too ill-conditioned for floating point LLL")
    red, U, ok = _kernels.lll(b, delta)
    if not ok:
        raise NumericalFailure("LLL did not terminate")
    return Lattice(red, reduced=True), U


def _reduced(L: Lattice) -> Lattice:
    return L if L.reduced else lll(L)[0]


def short_coords(L: Lattice, R: float):
    """Integer coordinates (w.r.t. ``L.basis``) and squared norms of all ``v`` with ``0 < |v| <= R``."""
    if R <= 0:
        raise ValueError("R must be positive")
    if L.reduced:
        red, U = L, np.eye(L.n, dtype=np.int64)
    else:
        red, U = lll(L)
    coeffs, norms, ok = _kernels.enumerate_coeffs(np.ascontiguousarray(red.basis), float(R) ** 2)
    if not ok:
        raise NumericalFailure("Gram matrix not positive definite")
    return coeffs @ U.T, norms


def short_vectors(L: Lattice, R: float) -> np.ndarray:
    """All nonzero lattice vectors of length at most ``R`` (rows, sorted by length)."""
    coeffs, norms = short_coords(L, R)
    order = np.lexsort((*coeffs.T[::-1], norms)) if len(norms) else np.arange(0)
    return (L.basis @ coeffs[order].T).T


def gaussian_tail_bound(gso_norms, t: float, R: float) -> float:
    """Bound for ``Σ_{v ∈ L, |v| > R} exp(-π|v|²/t)``.

    Uses ``#{v : |v| <= r} <= ∏_i (1 + 2r/|b*_i|)`` and integration by parts;
    each monomial integrates to an upper incomplete Gamma function.
    """
    bstar = np.sqrt(np.asarray(gso_norms, dtype=float))
    poly = np.array([1.0])
    for b in bstar:
        poly = np.convolve(poly, [1.0, 2.0 / b])
    x = math.pi * R * R / t
    total = 0.0
    for k, coef in enumerate(poly):
        a = 0.5 * (k + 2)
        # ∫_R^∞ (2π r / t) r^k e^{-π r²/t} dr
        total += coef * (t / math.pi) ** (0.5 * k) * special.gammaincc(a, x) * special.gamma(a)
    return float(total)


@lru_cache(maxsize=256)
def _radius_table(n: int, t: float, tol: float):
    """Radii certified for ``min |b*_i| >= b`` on a log grid of ``b`` values."""
    bs = np.exp(np.linspace(math.log(1e-3), math.log(1e3), 241))
    radii = np.empty_like(bs)
    for i, b in enumerate(bs):
        radii[i] = _solve_radius(np.full(n, b * b), t, tol)
    return bs, radii


def _solve_radius(gso_norms, t, tol):
    lo, hi = 0.0, max(1.0, math.sqrt(t))
    while gaussian_tail_bound(gso_norms, t, hi) > tol:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise NumericalFailure("no enumeration radius meets the tolerance")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if gaussian_tail_bound(gso_norms, t, mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def gaussian_radius(L: Lattice, t: float, tol: float = 1e-12) -> float:
    """Enumeration radius whose discarded Gaussian mass is certified ``<= tol``.

    ``L`` must be LLL reduced.  The bound only improves when every ``|b*_i|``
    grows, so a table indexed by the smallest Gram–Schmidt norm (rounded
    down to a grid point) gives a certified radius cheaply.
    """
    bn, _ = _kernels.gso_norms(np.ascontiguousarray(L.basis))
    bmin = math.sqrt(float(bn.min()))
    bs, radii = _radius_table(L.n, float(t), float(tol))
    idx = np.searchsorted(bs, bmin, side="right") - 1
    if idx < 0:
        return _solve_radius(bn, t, tol)
    return float(radii[idx])


def normalized_volumes(L: Lattice, J: int) -> list:
    """``𝔙_n |v_j|^n`` for the first ``J`` vector pairs ``±v_j`` in order of length."""
    if J <= 0:
        return []
    red = _reduced(L)
    n = L.n
    R = float(np.max(np.linalg.norm(red.basis, axis=0)))
    while True:
        _, norms = short_coords(red, R)
        if len(norms) >= 2 * J:
            break
        R *= 1.5
    norms = np.sort(norms)[: 2 * J : 2]
    return [ball_volume(n) * float(v) ** (0.5 * n) for v in norms]


# ---------------------------------------------------------------------------
# the G-action on pairs


def _check_det_one(g):
    g = np.asarray(g, dtype=float)
    d = np.linalg.det(g)
    if abs(d) < 1e-300:
        raise SingularMatrix("g is singular")
    if abs(d - 1.0) > 1e-9:
        raise ValueError(f"g must have determinant 1, got {d}")
    return g


def apply_g(g, p: TuplePoint) -> TuplePoint:
    """``⟨g x, g^{-T} y⟩``."""
    g = _check_det_one(g)
    return TuplePoint(g @ p.x, np.linalg.solve(g.T, p.y))


def scaling_delta(g, V) -> float:
    """Volume scaling factor ``dvol(g V) / dvol(V)``."""
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V.reshape(-1, 1)
    dv = dvol(V)
    if dv == 0.0:
        raise RankDeficient("V is not of full column rank")
    return dvol(np.asarray(g, dtype=float) @ V) / dv


def on_manifold(p: TuplePoint, beta, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership of ``p`` in ``S(β)`` up to relative tolerance ``tol``."""
    beta = np.asarray(beta, dtype=float)
    if dvol(p.x) <= 0 or dvol(p.y) <= 0:
        return False
    scale = max(1.0, float(np.abs(p.x).max()) * float(np.abs(p.y).max()))
    return bool(np.max(np.abs(p.pairing - beta), initial=0.0) <= tol * scale)


def _completion(x):
    """``[x | N]`` with determinant 1, ``N`` spanning the orthogonal complement."""
    n, m = x.shape
    q, _ = np.linalg.qr(x, mode="complete")
    N = q[:, m:]
    M = np.concatenate([x, N], axis=1)
    d = np.linalg.det(M)
    if n > m:
        N = N.copy()
        N[:, 0] /= d
    M = np.concatenate([x, N], axis=1)
    return M


def _standard_form(beta, p: TuplePoint, rng):
    """``g ∈ SL_n(R)`` sending ``p`` to a normal form depending only on ``β``.

    With ``h = [x | N]^{-1}`` we get ``h x = (I 0)ᵀ`` and
    ``h^{-T} y = (β ; y2)``.  The block matrix ``S = [[I, -aᵀ], [0, D]]``
    fixes ``(I 0)ᵀ`` and sends ``(β ; y2)`` to ``(β ; D^{-T}(y2 + a β))``.
    The shear ``a`` (zero if possible, random otherwise) makes
    ``Y = y2 + aβ`` of full rank, and ``D`` is chosen with
    ``D^{-T} Y = (I 0)ᵀ``.
    """
    x, y = p.x, p.y
    n, m1 = x.shape
    m2 = y.shape[1]
    X = _completion(x)
    h = np.linalg.inv(X)
    y2 = (X.T @ y)[m1:, :]
    k = n - m1
    a = np.zeros((k, m1))
    tries = 0
    while True:
        Y = y2 + a @ beta
        if np.linalg.matrix_rank(Y, tol=1e-10 * max(1.0, np.abs(Y).max())) == m2:
            break
        tries += 1
        if tries > 50:
            raise NumericalFailure("no admissible shear found")
        a = rng.standard_normal((k, m1))
    D = _completion(Y).T
    S = np.block([[np.eye(m1), -a.T], [np.zeros((k, m1)), D]])
    return S @ h


def transporter(beta, p: TuplePoint, p2: TuplePoint, seed: int = 0):
    """``g ∈ SL_n(R)`` with ``apply_g(g, p) = p2`` for ``p, p2 ∈ S(β)``."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta.reshape(p.x.shape[1], -1)
    n, m1 = p.x.shape
    m2 = p.y.shape[1]
    if m1 + m2 >= n:
        raise ValueError("transporter needs m1 + m2 < n")
    if not on_manifold(p, beta) or not on_manifold(p2, beta):
        raise NotOnManifold("points are not on S(beta)")
    rng = np.random.default_rng(seed)
    g1 = _standard_form(beta, p, rng)
    g2 = _standard_form(beta, p2, rng)
    return np.linalg.solve(g2, g1)
