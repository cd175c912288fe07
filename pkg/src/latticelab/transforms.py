"""Lattice sums (left-hand sides) and their averages over lattice ensembles."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .ensembles import CHUNK, EnsembleSpec, members
from .errors import DomainError, LabError, NumericalFailure
from .geom import Lattice, ball_volume, dual, gaussian_radius, lll, short_coords

__all__ = [
    "Gaussian",
    "Ball",
    "TestFunction",
    "Estimate",
    "BoundaryWarning",
    "siegel_sum",
    "product_multisum",
    "primitive_tuple_sum",
    "f_beta_sum",
    "f_beta_sums",
    "rank_restricted_sum",
    "count_statistic",
    "ensemble_estimate",
    "GAUSS_TOL",
]

#: certified bound on the discarded Gaussian mass in lattice sums
GAUSS_TOL = 1e-12
#: relative distance from a ball boundary that triggers a warning
BOUNDARY_EPS = 1e-12


class BoundaryWarning(UserWarning):
    """A lattice point lies within rounding distance of a ball boundary."""


@dataclass(frozen=True)
class Gaussian:
    """``v ↦ exp(-π|v|²/t)``."""

    t: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("Gaussian scale must be positive")

    def at_origin(self) -> float:
        return 1.0

    def values(self, norm2, n: int):
        return np.exp(-math.pi * np.asarray(norm2, dtype=float) / self.t)

    def integral(self, n: int) -> float:
        return self.t ** (0.5 * n)

    def support_radius(self, n: int, tol: float = GAUSS_TOL) -> float:
        """Radius outside which the profile is below ``tol``."""
        return math.sqrt(self.t * math.log(1.0 / tol) / math.pi)


@dataclass(frozen=True)
class Ball:
    """Indicator of the open ball of volume ``V`` (optionally zero at the origin)."""

    V: float
    exclude_origin: bool = True

    def __post_init__(self):
        if not self.V > 0:
            raise DomainError("ball volume must be positive")

    def radius(self, n: int) -> float:
        return (self.V / ball_volume(n)) ** (1.0 / n)

    def at_origin(self) -> float:
        return 0.0 if self.exclude_origin else 1.0

    def values(self, norm2, n: int):
        r2 = self.radius(n) ** 2
        norm2 = np.asarray(norm2, dtype=float)
        out = (norm2 < r2).astype(float)
        if self.exclude_origin:
            out = np.where(norm2 == 0.0, 0.0, out)
        return out

    def integral(self, n: int) -> float:
        return float(self.V)

    def support_radius(self, n: int, tol: float = GAUSS_TOL) -> float:
        return self.radius(n)


@dataclass(frozen=True)
class TestFunction:
    """Product test function ``ρ(v_1..v_k1, w_1..w_k2) = ∏ρ_j(v_j) ∏ρ̃_j(w_j)``."""

    __test__ = False  # keep pytest from collecting this class

    primal_slots: tuple = ()
    dual_slots: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "primal_slots", tuple(self.primal_slots))
        object.__setattr__(self, "dual_slots", tuple(self.dual_slots))

    @property
    def k1(self) -> int:
        return len(self.primal_slots)

    @property
    def k2(self) -> int:
        return len(self.dual_slots)

    def swapped(self) -> "TestFunction":
        return TestFunction(self.dual_slots, self.primal_slots)

    def at_origin(self) -> float:
        out = 1.0
        for f in self.primal_slots + self.dual_slots:
            out *= f.at_origin()
        return out

    def to_dict(self) -> dict:
        return {"primal": [_profile_dict(f) for f in self.primal_slots], "dual": [_profile_dict(f) for f in self.dual_slots]}

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        return cls(tuple(profile_from_dict(x) for x in d.get("primal", [])), tuple(profile_from_dict(x) for x in d.get("dual", [])))


def _profile_dict(f) -> dict:
    if isinstance(f, Gaussian):
        return {"gaussian": f.t}
    return {"ball": f.V, "exclude_origin": f.exclude_origin}


def profile_from_dict(d: dict):
    if "gaussian" in d:
        return Gaussian(float(d["gaussian"]))
    if "ball" in d:
        return Ball(float(d["ball"]), bool(d.get("exclude_origin", True)))
    raise DomainError(f"unknown radial profile {d!r}")


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo (or exhaustive) ensemble average of a statistic."""

    mean: float
    stderr: float
    count: int
    seed: int
    ensemble: EnsembleSpec | None = None
    values: np.ndarray | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "count": self.count,
            "seed": self.seed,
            "ensemble": None if self.ensemble is None else self.ensemble.to_dict(),
        }


# ---------------------------------------------------------------------------
# single-lattice sums


def _reduced(L: Lattice) -> Lattice:
    return L if L.reduced else lll(L)[0]


def _ball_count(red: Lattice, r2: float) -> int:
    B = np.ascontiguousarray(red.basis)
    c, ok = _kernels.count_open_ball(B, r2)
    if not ok:
        raise NumericalFailure("enumeration failed")
    hi, _ = _kernels.count_open_ball(B, r2 * (1 + BOUNDARY_EPS))
    lo, _ = _kernels.count_open_ball(B, r2 * (1 - BOUNDARY_EPS))
    if hi != lo:
        warnings.warn(f"{int(hi - lo)} lattice point(s) within {BOUNDARY_EPS:g} of a ball boundary", BoundaryWarning, stacklevel=3)
    return int(c)


def siegel_sum(L: Lattice, f) -> float:
    """``Σ_{v ∈ L} f(v)`` including ``v = 0``."""
    red = _reduced(L)
    if isinstance(f, Gaussian):
        R = gaussian_radius(red, f.t, GAUSS_TOL)
        acc, ok = _kernels.gaussian_sum(np.ascontiguousarray(red.basis), f.t, R * R)
        if not ok:
            raise NumericalFailure("enumeration failed")
        return 1.0 + float(acc)
    if isinstance(f, Ball):
        return f.at_origin() + _ball_count(red, f.radius(L.n) ** 2)
    raise DomainError(f"unsupported profile {f!r}")


def product_multisum(L: Lattice, rho: TestFunction) -> float:
    """The full multiple sum over ``L^{k1} × (L*)^{k2}``, which factorises for product ``ρ``."""
    out = 1.0
    for f in rho.primal_slots:
        out *= siegel_sum(L, f)
    if rho.dual_slots:
        Ld = dual(L)
        for f in rho.dual_slots:
            out *= siegel_sum(Ld, f)
    return out


def _candidates(L: Lattice, f, with_zero: bool, tol: float = GAUSS_TOL):
    """Integer coordinates and values of ``f`` on lattice vectors in its support.

    Gaussian profiles are truncated where the neglected mass is below ``tol``.
    """
    R = f.support_radius(L.n)
    if isinstance(f, Gaussian):
        red = _reduced(L)
        R = max(R, gaussian_radius(red, f.t, tol))
    coeffs, norms = short_coords(L, R)
    vals = f.values(norms, L.n)
    keep = vals > 0
    coeffs, norms, vals = coeffs[keep], norms[keep], vals[keep]
    if with_zero and f.at_origin() > 0:
        coeffs = np.vstack([np.zeros((1, L.n), dtype=np.int64), coeffs])
        vals = np.concatenate([[f.at_origin()], vals])
    return coeffs, vals


def _maximal_minor_gcd(M: np.ndarray) -> np.ndarray:
    """gcd of the ``k×k`` minors of each ``n×k`` integer matrix in a stack ``(N, n, k)``."""
    N, n, k = M.shape
    g = np.zeros(N, dtype=np.int64)
    for rows in itertools.combinations(range(n), k):
        sub = M[:, rows, :]
        if k == 1:
            d = sub[:, 0, 0]
        elif k == 2:
            d = sub[:, 0, 0] * sub[:, 1, 1] - sub[:, 0, 1] * sub[:, 1, 0]
        else:
            d = np.rint(np.linalg.det(sub.astype(float))).astype(np.int64)
        g = np.gcd(g, np.abs(d))
    return g


def primitive_tuple_sum(L: Lattice, k: int, rho: TestFunction) -> float:
    """Sum of ``∏ρ_j(v_j)`` over primitive ``k``-tuples of ``L``."""
    if k >= L.n:
        raise DomainError("need k < n")
    if rho.k1 != k:
        raise DomainError("test function must have k primal slots")
    cands = [_candidates(L, f, with_zero=False) for f in rho.primal_slots]
    if k == 1:
        c, v = cands[0]
        if len(v) == 0:
            return 0.0
        g = np.gcd.reduce(np.abs(c), axis=1)
        return math.fsum(v[g == 1])
    total = []
    idx = np.array(list(itertools.product(*[range(len(v)) for _, v in cands])), dtype=np.int64)
    if idx.size == 0:
        return 0.0
    M = np.stack([cands[j][0][idx[:, j]] for j in range(k)], axis=2)  # N × n × k
    w = np.prod(np.stack([cands[j][1][idx[:, j]] for j in range(k)], axis=1), axis=1)
    prim = _maximal_minor_gcd(M) == 1
    total = w[prim]
    return math.fsum(total)


def _tuples(cands, m):
    """All index tuples into ``m`` candidate lists, as an (N, m) array."""
    return np.array(list(itertools.product(*[range(len(c)) for c in cands[:m]])), dtype=np.int64).reshape(-1, m)


def f_beta_sum(L: Lattice, beta, rho: TestFunction, tol: float = GAUSS_TOL) -> float:
    """Sum of ``ρ(x, y)`` over primitive ``x ⊂ L`` and rank-``m2`` ``y ⊂ L*`` with ``xᵀy = β``.

    The pairing is evaluated exactly on integer coordinates: with ``x = B c``
    and ``y = B^{-T} d`` one has ``xᵀy = cᵀ d``. ``tol`` bounds the Gaussian
    mass dropped per slot.
    """
    beta = np.asarray(beta, dtype=np.int64)
    if beta.ndim != 2:
        raise DomainError("beta must be a matrix")
    m1, m2 = beta.shape
    if rho.k1 != m1 or rho.k2 != m2:
        raise DomainError("test function slots must match the shape of beta")
    if m1 + m2 >= L.n:
        raise DomainError("need m1 + m2 < n")
    if m1 == 1 and m2 == 1:
        return float(f_beta_sums(L, [int(beta[0, 0])], rho, tol)[0])
    Ld = dual(L)
    xc = [_candidates(L, f, with_zero=False, tol=tol) for f in rho.primal_slots]
    yc = [_candidates(Ld, f, with_zero=False, tol=tol) for f in rho.dual_slots]
    ix = _tuples(xc, m1)
    iy = _tuples(yc, m2)
    if ix.size == 0 or iy.size == 0:
        return 0.0
    X = np.stack([xc[j][0][ix[:, j]] for j in range(m1)], axis=2)
    wx = np.prod(np.stack([xc[j][1][ix[:, j]] for j in range(m1)], axis=1), axis=1)
    keep = _maximal_minor_gcd(X) == 1
    X, wx = X[keep], wx[keep]
    Y = np.stack([yc[j][0][iy[:, j]] for j in range(m2)], axis=2)
    wy = np.prod(np.stack([yc[j][1][iy[:, j]] for j in range(m2)], axis=1), axis=1)
    keep = _maximal_minor_gcd(Y) != 0
    Y, wy = Y[keep], wy[keep]
    total = []
    for a in range(X.shape[0]):
        P = np.einsum("ni,Nnj->Nij", X[a], Y)
        ok = np.all(P == beta[None, :, :], axis=(1, 2))
        if ok.any():
            total.append(wx[a] * wy[ok])
    return math.fsum(np.concatenate(total)) if total else 0.0


def f_beta_sums(L: Lattice, betas, rho: TestFunction, tol: float = GAUSS_TOL) -> np.ndarray:
    """``f_beta_sum`` for several scalar ``β`` at once (one primal and one dual slot).

    The pairing matrix is formed once and shared by all requested values.
    """
    if rho.k1 != 1 or rho.k2 != 1:
        raise DomainError("scalar beta needs one primal and one dual slot")
    if L.n <= 2:
        raise DomainError("need m1 + m2 < n")
    betas = [int(b) for b in betas]
    cx, vx = _candidates(L, rho.primal_slots[0], with_zero=False, tol=tol)
    cy, vy = _candidates(dual(L), rho.dual_slots[0], with_zero=False, tol=tol)
    out = np.zeros(len(betas))
    if len(vx) == 0 or len(vy) == 0:
        return out
    prim = np.gcd.reduce(np.abs(cx), axis=1) == 1
    cx, vx = cx[prim], vx[prim]
    # small integer coordinates: the float product is exact and uses BLAS
    P = cx.astype(float) @ cy.T.astype(float)
    for i, b in enumerate(betas):
        rows = np.where(P == float(b), vy[None, :], 0.0).sum(axis=1)
        out[i] = math.fsum(vx * rows)
    return out


def _rank_tuples(L: Lattice, slots, Bm, m: int):
    """Integer coefficient stacks ``c`` (N × n × m) of rank-``m`` tuples ``x`` and weights of ``ρ(x Bᵀ)``."""
    n = L.n
    k = Bm.shape[0]
    if m == 0:
        return np.zeros((1, n, 0), dtype=np.int64), np.array([math.prod(f.at_origin() for f in slots)])
    Bf = Bm.astype(float)
    radii = [f.support_radius(n) for f in slots]
    if any(isinstance(f, Gaussian) for f in slots):
        red = _reduced(L)
        radii = [max(r, gaussian_radius(red, f.t, GAUSS_TOL)) if isinstance(f, Gaussian) else r for r, f in zip(radii, slots)]
    pinv = np.linalg.pinv(Bf)  # m × k
    Rx = float(np.linalg.norm(pinv, 2)) * math.sqrt(sum(r * r for r in radii))
    coeffs, _ = short_coords(L, Rx)
    coeffs = np.vstack([np.zeros((1, n), dtype=np.int64), coeffs])
    idx = np.array(list(itertools.product(range(len(coeffs)), repeat=m)), dtype=np.int64)
    C = np.stack([coeffs[idx[:, j]] for j in range(m)], axis=2)  # N × n × m
    # x B^T in lattice coordinates, then Euclidean norms of its columns
    V = np.einsum("Nnm,km->Nnk", C, Bm.astype(np.int64))
    G = L.basis
    w = np.ones(C.shape[0])
    for j, f in enumerate(slots):
        vecs = V[:, :, j] @ G.T
        w = w * f.values(np.einsum("Nn,Nn->N", vecs, vecs), n)
    full = _maximal_minor_gcd(C) != 0
    return C[full], w[full]


def rank_restricted_sum(L: Lattice, m1: int, m2: int, B1, B2, rho: TestFunction) -> float:
    """``Σ ρ(x B1ᵀ, y B2ᵀ)`` over rank-``m1`` tuples ``x ⊂ L`` and rank-``m2`` tuples ``y ⊂ L*``.

    Supports must be finite in practice: the tuple search is exhaustive over
    vectors in a box around the support and meant for small examples.
    """
    B1 = np.asarray(B1, dtype=np.int64).reshape(rho.k1, m1)
    B2 = np.asarray(B2, dtype=np.int64).reshape(rho.k2, m2)
    _, wx = _rank_tuples(L, rho.primal_slots, B1, m1)
    _, wy = _rank_tuples(dual(L), rho.dual_slots, B2, m2)
    return math.fsum(wx) * math.fsum(wy)


def count_statistic(L: Lattice, V: Sequence[float], W: Sequence[float] = ()):
    """``N_j = #{v ∈ L∖0 : 𝔙_n|v|^n < V_j}`` and the same on ``L*`` for ``W``."""
    V = list(V)
    W = list(W)
    if any(b < a for a, b in zip(V, V[1:])) or any(b < a for a, b in zip(W, W[1:])):
        raise DomainError("volumes must be sorted nondecreasing")
    n = L.n
    vn = ball_volume(n)
    out = []
    for vols, lat in ((V, L), (W, None)):
        if not vols:
            out.append([])
            continue
        if lat is None:
            lat = dual(L)
        red = _reduced(lat)
        out.append([_ball_count(red, (v / vn) ** (2.0 / n)) if v > 0 else 0 for v in vols])
    return out[0], out[1]


# ---------------------------------------------------------------------------
# ensemble averages


def _chunk_values(args):
    spec, statistic, chunk = args
    lats = members(spec, chunk * CHUNK, (chunk + 1) * CHUNK)
    vals = np.empty(len(lats))
    for i, L in enumerate(lats):
        try:
            vals[i] = statistic(L)
        except LabError as exc:
            raise type(exc)(f"member {chunk * CHUNK + i}: {exc}") from exc
    return vals


def ensemble_estimate(
    spec: EnsembleSpec,
    statistic: Callable[[Lattice], float],
    mapper: Callable | None = None,
    keep_values: bool = False,
) -> Estimate:
    """Average ``statistic`` over the members of ``spec``.

    Members are processed in chunks of :data:`CHUNK`; ``mapper`` (for example
    ``Pool.map``) may evaluate chunks in parallel.  The mean and variance use
    ``math.fsum``, whose correctly rounded result does not depend on the
    order of the terms, so the estimate is independent of the worker count.
    """
    N = spec.size
    if N < 2:
        raise DomainError("need at least two ensemble members")
    nchunks = (N + CHUNK - 1) // CHUNK
    jobs = [(spec, statistic, c) for c in range(nchunks)]
    parts = list((mapper or map)(_chunk_values, jobs))
    values = np.concatenate(parts)
    mean = math.fsum(values) / N
    var = math.fsum((values - mean) ** 2) / (N - 1)
    return Estimate(mean, math.sqrt(var / N), N, spec.seed, spec, values if keep_values else None)
