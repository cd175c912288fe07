"""Right-hand sides: integrals, weighted series and partition sums.

Gaussian slots lead to closed forms almost everywhere.  With
``Q_B = Bᵀ diag(1/t_j) B`` one has ``∫ρ(xBᵀ)dx = det(Q_B)^{-n/2}``, and the
measure ``η_β`` reduces to

    det(Q2)^{-(n-m1)/2} ∫ exp(-π Tr(x Q1 xᵀ)) exp(-π Tr(β Q2 βᵀ (xᵀx)^{-1})) d(x)^{-m2} dx,

a radial integral when ``m1 = 1`` and an expectation over a Wishart matrix
otherwise.  Ball slots use the slice formula: for fixed ``x`` the ``y``
integral is a product of ``(n-m1)``-dimensional ball volumes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats

from . import intlin
from .errors import DomainError, ToleranceNotMet
from .geom import ball_volume
from .transforms import Ball, Gaussian, TestFunction
from .weights import TruncatedValue, weight_W, zeta_product, zeta_val

__all__ = [
    "RhsTerm",
    "RhsBreakdown",
    "siegel_rhs",
    "rogers_rhs",
    "primitive_rhs",
    "eta_integral",
    "dual_rhs",
    "set_partitions",
    "moment_rhs",
    "c_const",
    "x2_line_theta_mean",
    "line_theta",
    "gaussian_B_integral",
]


def _slot_kind(slots):
    kinds = {type(f) for f in slots}
    if not kinds:
        return None
    if len(kinds) > 1:
        raise DomainError("mixed Gaussian and ball slots are not supported")
    return kinds.pop()


def siegel_rhs(f, n: int) -> float:
    """``∫ f + f(0)``."""
    return f.integral(n) + f.at_origin()


def primitive_rhs(rho: TestFunction, n: int, k: int) -> float:
    """``∫ρ / (ζ(n) ζ(n-1) ··· ζ(n-k+1))`` for a product test function on ``k`` slots."""
    if k >= n:
        raise DomainError("need k < n")
    if rho.k1 != k:
        raise DomainError("test function must have k primal slots")
    total = 1.0
    for f in rho.primal_slots:
        total *= f.integral(n)
    return total / zeta_product(n, k)


# ---------------------------------------------------------------------------
# integrals of ρ(x Bᵀ)


def _q_matrix(B, scales):
    B = np.asarray(B, dtype=float)
    return B.T @ (B / np.asarray(scales, dtype=float)[:, None])


def gaussian_B_integral(B, scales, n: int) -> float:
    """``∫_{M_{n,m}} exp(-π Σ_j |x B_jᵀ|²/t_j) dx = det(Q_B)^{-n/2}``."""
    Q = _q_matrix(B, scales)
    return float(np.linalg.det(Q)) ** (-0.5 * n)


def _ball_B_integral(B, slots, n: int, rng, samples: int):
    """``∫ ∏_j 1[|x B_jᵀ| < r_j] dx`` (times origin values of zero rows); returns (value, stderr)."""
    B = np.asarray(B, dtype=np.int64)
    k, m = B.shape
    radii = np.array([f.radius(n) for f in slots])
    factor = 1.0
    rows = []
    for j in range(k):
        if not B[j].any():
            factor *= slots[j].at_origin()
        else:
            rows.append(j)
    if factor == 0.0:
        return 0.0, 0.0
    Bn, rn = B[rows], radii[rows]
    if all(np.count_nonzero(Bn[j]) == 1 for j in range(len(rows))):
        val = factor
        for i in range(m):
            lim = min(rn[j] / abs(Bn[j, i]) for j in range(len(rows)) if Bn[j, i] != 0)
            val *= ball_volume(n) * lim**n
        return val, 0.0
    # change variables on an invertible row subset S: w = x B_Sᵀ
    for S in itertools.combinations(range(len(rows)), m):
        BS = Bn[list(S)].astype(float)
        if abs(np.linalg.det(BS)) > 0.5:
            break
    S = list(S)
    others = [j for j in range(len(rows)) if j not in S]
    vol = factor * abs(np.linalg.det(BS)) ** (-n) * np.prod([ball_volume(n) * rn[j] ** n for j in S])
    W = np.stack([_uniform_ball(rng, samples, n) * rn[j] for j in S], axis=2)  # N × n × m
    X = np.einsum("Nnm,mq->Nnq", W, np.linalg.inv(BS).T)
    ok = np.ones(samples, dtype=bool)
    for j in others:
        v = X @ Bn[j].astype(float)
        ok &= np.einsum("Nn,Nn->N", v, v) < rn[j] ** 2
    frac = ok.mean()
    return vol * frac, vol * math.sqrt(frac * (1 - frac) / samples)


def _uniform_ball(rng, N, n):
    z = rng.standard_normal((N, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = rng.random(N) ** (1.0 / n)
    return z * r[:, None]


def rogers_rhs(rho: TestFunction, n: int, k: int, H: int = 64, seed: int = 0, mc_samples: int = 200_000) -> TruncatedValue:
    """``ρ(0) + Σ_{m=1}^{k} Σ_{B ∈ A_{k,m}} ∫ρ(xBᵀ)dx`` with ``B`` truncated at height ``2H``.

    The tail is the empirical increment between heights ``H`` and ``2H``
    plus three Monte Carlo standard errors for ball integrals that need
    sampling; it is reported as non-rigorous.
    """
    if k >= n:
        raise DomainError("need k < n")
    if rho.k1 != k:
        raise DomainError("test function must have k primal slots")
    kind = _slot_kind(rho.primal_slots)
    rng = np.random.default_rng(seed)
    totals = {}
    mc_var = 0.0
    for h in (H, 2 * H):
        acc = [rho.at_origin()]
        var = 0.0
        for m in range(1, k + 1):
            if m == 1:
                vecs = intlin._canonical_primitive_vectors(k, h).astype(float)
                if kind is Gaussian:
                    scales = np.array([f.t for f in rho.primal_slots])
                    q = (vecs**2 / scales).sum(axis=1)
                    acc.extend(np.sort(q ** (-0.5 * n))[::-1])
                else:
                    radii = np.array([f.radius(n) for f in rho.primal_slots])
                    origin = np.array([f.at_origin() for f in rho.primal_slots])
                    with np.errstate(divide="ignore"):
                        lim = np.where(vecs != 0, radii / np.abs(vecs), np.inf).min(axis=1)
                    zero_ok = np.prod(np.where(vecs == 0, origin, 1.0), axis=1)
                    acc.extend(np.sort(zero_ok * ball_volume(n) * lim**n)[::-1])
                continue
            for Bi in _A_list(k, m, h):
                if kind is Gaussian:
                    acc.append(gaussian_B_integral(Bi, [f.t for f in rho.primal_slots], n))
                else:
                    v, se = _ball_B_integral(Bi, rho.primal_slots, n, rng, mc_samples)
                    acc.append(v)
                    var += se * se
        totals[h] = math.fsum(acc)
        mc_var = var
    value = totals[2 * H]
    tail = abs(totals[2 * H] - totals[H]) + 3.0 * math.sqrt(mc_var)
    return TruncatedValue(value, tail, 2 * H, rigorous=False)


# ---------------------------------------------------------------------------
# η_β


def _radial_gaussian(n, m2, a, b):
    """``n𝔙_n ∫_0^∞ r^{n-1-m2} exp(-a r² - b/r²) dr`` in closed form."""
    nu = n - m2
    pref = n * ball_volume(n)
    if b == 0.0:
        return pref * 0.5 * math.gamma(0.5 * nu) * a ** (-0.5 * nu)
    z = 2.0 * math.sqrt(a * b)
    # K_v(z) e^{z} is well scaled; multiply the exponential back in log space
    return pref * (b / a) ** (0.25 * nu) * special.kve(0.5 * nu, z) * math.exp(-z)


def _radial_gaussian_quad(n, m2, a, b):
    pref = n * ball_volume(n)
    f = lambda r: r ** (n - 1 - m2) * math.exp(-a * r * r - (b / (r * r) if r > 0 else (math.inf if b > 0 else 0.0)))
    peak = (b / a) ** 0.25 if b > 0 else math.sqrt(max(n - 1 - m2, 0.5) / (2 * a))
    pieces = [0.0, peak, 4 * peak + 10.0 / math.sqrt(a), math.inf]
    total, err = 0.0, 0.0
    for lo, hi in zip(pieces, pieces[1:]):
        v, e = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += v
        err += e
    return pref * total, pref * err


@lru_cache(maxsize=64)
def _wishart_points(n: int, m: int, log2_points: int, replicates: int, seed: int):
    """Scrambled Sobol draws of ``G ~ Wishart_m(n, I)`` via the Bartlett decomposition."""
    dim = m + m * (m - 1) // 2
    out = []
    per = 2 ** (log2_points) // replicates
    for r in range(replicates):
        sob = stats.qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng([seed, r]))
        u = sob.random(per)
        u = np.clip(u, 1e-16, 1 - 1e-16)
        Lm = np.zeros((per, m, m))
        for i in range(m):
            Lm[:, i, i] = np.sqrt(stats.chi2.ppf(u[:, i], n - i))
        col = m
        for i in range(m):
            for j in range(i):
                Lm[:, i, j] = stats.norm.ppf(u[:, col])
                col += 1
        G = Lm @ np.transpose(Lm, (0, 2, 1))
        out.append(G)
    return out


def _sqrtm_spd(Q):
    w, V = np.linalg.eigh(Q)
    return (V * np.sqrt(w)) @ V.T


def _eta_gaussian(beta, B1, B2, t, s, n, method, rtol, seed):
    m1, m2 = beta.shape
    Q1 = _q_matrix(B1, t)
    Q2 = _q_matrix(B2, s)
    M = beta @ Q2 @ beta.T  # m1 × m1
    pref = float(np.linalg.det(Q2)) ** (-0.5 * (n - m1))
    if m1 == 1:
        a = math.pi * float(Q1[0, 0])
        b = math.pi * float(M[0, 0])
        if method == "quad":
            v, e = _radial_gaussian_quad(n, m2, a, b)
            if e > rtol * abs(v) + 1e-300:
                raise ToleranceNotMet("radial quadrature did not converge", best=pref * v)
            return TruncatedValue(pref * v, pref * e, 0, rigorous=False)
        return TruncatedValue(pref * _radial_gaussian(n, m2, a, b), 0.0, 0)
    # m1 >= 2: x = w Q1^{-1/2}, w = z/sqrt(2π), G = zᵀz ~ Wishart(n, I)
    R = _sqrtm_spd(Q1)
    Mp = R @ M @ R
    reps = _wishart_points(n, m1, 20, 16, seed)
    means = []
    for G in reps:
        Ginv = np.linalg.inv(G)
        tr = np.einsum("ij,Nji->N", Mp, Ginv)
        detG = np.linalg.det(G)
        vals = (2 * math.pi) ** (0.5 * m1 * m2) * detG ** (-0.5 * m2) * np.exp(-2 * math.pi**2 * tr)
        means.append(vals.mean())
    means = np.array(means)
    est = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(len(means)))
    scale = pref * float(np.linalg.det(Q1)) ** (-0.5 * (n - m2))
    value = scale * est
    err = scale * se
    if err > rtol * abs(value) and value != 0.0:
        raise ToleranceNotMet(f"quasi-Monte Carlo error {err:.3g} above tolerance", best=value)
    return TruncatedValue(value, 3.0 * err, 0, rigorous=False)


def _coordinate_radii(B, slots, n):
    """Per-column radii for a ``B`` with at most one nonzero per row, and the zero-row factor."""
    B = np.asarray(B, dtype=np.int64)
    k, m = B.shape
    factor = 1.0
    lim = [math.inf] * m
    for j in range(k):
        nz = np.flatnonzero(B[j])
        if len(nz) == 0:
            factor *= slots[j].at_origin()
        elif len(nz) == 1:
            i = int(nz[0])
            lim[i] = min(lim[i], slots[j].radius(n) / abs(int(B[j, i])))
        else:
            raise DomainError("ball slots need B with at most one nonzero entry per row")
    return lim, factor


def _eta_ball(beta, B1, B2, slots1, slots2, n, method, rtol, seed, samples):
    m1, m2 = beta.shape
    R, f1 = _coordinate_radii(B1, slots1, n)
    S, f2 = _coordinate_radii(B2, slots2, n)
    if f1 * f2 == 0.0:
        return TruncatedValue(0.0, 0.0, 0)
    if any(math.isinf(r) for r in R + S):
        raise DomainError("every column of B must meet a ball slot")
    Vk = ball_volume(n - m1)
    S2 = np.array(S) ** 2
    if m1 == 1:
        R0 = R[0]
        bb = beta[0].astype(float) ** 2  # |y0_l|^2 = β_l² / |x|²

        def f(r):
            if r == 0.0:
                return 0.0
            slack = S2 - bb / (r * r)
            if np.any(slack <= 0):
                return 0.0
            return r ** (n - 1 - m2) * np.prod(Vk * slack ** (0.5 * (n - m1)))

        # the integrand switches on where every slice is nonempty
        r0 = max([math.sqrt(b / s2) for b, s2 in zip(bb, S2) if b > 0], default=0.0)
        if r0 >= R0:
            return TruncatedValue(0.0, 0.0, 0)
        v, e = integrate.quad(f, r0, R0, epsabs=0.0, epsrel=1e-11, limit=400)
        pref = f1 * f2 * n * ball_volume(n)
        if e > rtol * max(abs(v), 1e-300):
            raise ToleranceNotMet("slice quadrature did not converge", best=pref * v)
        return TruncatedValue(pref * v, pref * e, 0, rigorous=False)
    # m1 >= 2: Monte Carlo over x uniform in the product of balls
    rng = np.random.default_rng(seed)
    X = np.stack([_uniform_ball(rng, samples, n) * R[i] for i in range(m1)], axis=2)  # N × n × m1
    G = np.einsum("Nni,Nnj->Nij", X, X)
    Ginv = np.linalg.inv(G)
    dx = np.sqrt(np.linalg.det(G))
    bf = beta.astype(float)
    y0 = np.einsum("il,Nij,jl->Nl", bf, Ginv, bf)  # |y0_l|^2
    slack = S2[None, :] - y0
    ok = np.all(slack > 0, axis=1)
    vals = np.zeros(samples)
    vals[ok] = dx[ok] ** (-m2) * np.prod(Vk * slack[ok] ** (0.5 * (n - m1)), axis=1)
    vol = f1 * f2 * np.prod([ball_volume(n) * R[i] ** n for i in range(m1)])
    value = vol * vals.mean()
    err = vol * vals.std(ddof=1) / math.sqrt(samples)
    if err > rtol * abs(value) and value != 0.0:
        raise ToleranceNotMet(f"Monte Carlo error {err:.3g} above tolerance", best=value)
    return TruncatedValue(value, 3.0 * err, 0, rigorous=False)


def eta_integral(beta, B1, B2, rho: TestFunction, n: int, method: str = "auto", rtol: float = 1e-3, seed: int = 0, samples: int = 400_000) -> TruncatedValue:
    """``∫_{S(β)} ρ(x B1ᵀ, y B2ᵀ) dη_β``.

    ``method``: ``"auto"`` (closed form / Wishart quasi-MC for Gaussians,
    slice quadrature or MC for balls), ``"quad"`` (Gaussian, ``m1 = 1``:
    numerical radial quadrature instead of the Bessel closed form).
    Errors from quadrature or sampling are returned as ``tail_bound``.
    """
    beta = np.array(intlin.intmat(beta), dtype=np.int64)
    B1 = np.asarray(intlin.intmat(B1), dtype=np.int64)
    B2 = np.asarray(intlin.intmat(B2), dtype=np.int64)
    m1, m2 = beta.shape
    if B1.shape != (rho.k1, m1) or B2.shape != (rho.k2, m2):
        raise DomainError("B1, B2 must be k1×m1 and k2×m2")
    if m1 + m2 >= n:
        raise DomainError("need m1 + m2 < n")
    kind = _slot_kind(rho.primal_slots + rho.dual_slots)
    if kind is Gaussian:
        t = [f.t for f in rho.primal_slots]
        s = [f.t for f in rho.dual_slots]
        return _eta_gaussian(beta, B1, B2, t, s, n, method, rtol, seed)
    return _eta_ball(beta, B1, B2, rho.primal_slots, rho.dual_slots, n, method, rtol, seed, samples)


def c_const(n: int, m1: int, m2: int) -> float:
    """Leading constant of ``η_β`` on products of balls of radius ``R``."""
    if m1 + m2 >= n:
        raise DomainError("need m1 + m2 < n")
    num = math.prod(j * ball_volume(j) for j in range(n - m1 + 1, n + 1))
    den = math.prod(j * ball_volume(j) for j in range(n - m1 - m2 + 1, n - m2 + 1))
    return num / den * ball_volume(n - m1) ** m2 * ball_volume(n - m2) ** m1


# ---------------------------------------------------------------------------
# the full right-hand side for L and L*


@dataclass(frozen=True)
class RhsTerm:
    m1: int
    B1: tuple
    m2: int
    B2: tuple
    beta: tuple
    weight: float
    integral: float

    @property
    def value(self) -> float:
        return self.weight * self.integral


@dataclass
class RhsBreakdown:
    total: float
    tail: float
    terms: list = field(default_factory=list)
    boundary_terms: list = field(default_factory=list)
    constant_term: float = 0.0
    notes: list = field(default_factory=list)

    def as_truncated(self) -> TruncatedValue:
        return TruncatedValue(self.total, self.tail, 0, rigorous=False)


def _A_list(k, m, H):
    if k == m:
        return [np.eye(k, dtype=np.int64)]
    return [np.array(B, dtype=np.int64) for B in intlin.enumerate_A(k, m, H)]


def _boundary(slots, other_slots, n, H, rng, mc_samples):
    """``Σ_{m,B} ∫ρ(xBᵀ, 0)dx``: the sum over nonempty primal tuples with all dual slots at 0."""
    origin = math.prod(f.at_origin() for f in other_slots)
    if origin == 0.0 or not slots:
        return []
    kind = _slot_kind(slots)
    out = []
    k = len(slots)
    for m in range(1, k + 1):
        for B in _A_list(k, m, H):
            if kind is Gaussian:
                v = gaussian_B_integral(B, [f.t for f in slots], n)
            else:
                v, _ = _ball_B_integral(B, slots, n, rng, mc_samples)
            out.append((m, tuple(map(tuple, B.tolist())), origin * v))
    return out


def _beta_shells(m1, m2):
    """Integer ``m1×m2`` matrices grouped by max-norm shell 0, 1, 2, ..."""
    r = 0
    while True:
        if r == 0:
            yield 0, [np.zeros((m1, m2), dtype=np.int64)]
        else:
            shell = []
            for vals in itertools.product(range(-r, r + 1), repeat=m1 * m2):
                if max(abs(v) for v in vals) == r:
                    shell.append(np.array(vals, dtype=np.int64).reshape(m1, m2))
            yield r, shell
        r += 1


def _weight(beta, n, Dmax, cache):
    """``W(β)`` cached on the Smith divisors, using the exact value at ``β = 0``."""
    m1, m2 = beta.shape
    if not beta.any():
        num = math.prod(zeta_val(n - m2 - j) for j in range(m1))
        return TruncatedValue(num / zeta_product(n, m1), 0.0, Dmax)
    key = (m1, m2, intlin.smith(beta).divisors)
    if key not in cache:
        cache[key] = weight_W(beta, n, Dmax)
    return cache[key]


def dual_rhs(rho: TestFunction, n: int, H: int = 8, Dmax: int = 2000, beta_bound: int | None = None, rel_cut: float = 1e-14, seed: int = 0) -> RhsBreakdown:
    """Right-hand side of the mean value formula for sums over ``L^{k1} × (L*)^{k2}``.

    The ``β`` series is summed shell by shell (max-norm) until a whole shell
    contributes less than ``rel_cut`` of the running total, or up to
    ``beta_bound`` when given.  ``B`` families are truncated at height ``H``.
    """
    k1, k2 = rho.k1, rho.k2
    if n <= k1 + k2:
        raise DomainError(f"need n > k1 + k2, got n={n}, k1+k2={k1 + k2}")
    rng = np.random.default_rng(seed)
    terms = []
    tail = 0.0
    notes = []
    wcache = {}
    finite_B = (k1 <= 1 or H is None) and (k2 <= 1 or H is None)
    for m1 in range(1, k1 + 1):
        for B1 in _A_list(k1, m1, H):
            for m2 in range(1, k2 + 1):
                for B2 in _A_list(k2, m2, H):
                    running = 0.0
                    for r, shell in _beta_shells(m1, m2):
                        shell_sum = 0.0
                        for beta in shell:
                            W = _weight(beta, n, Dmax, wcache)
                            eta = eta_integral(beta, B1, B2, rho, n, seed=seed)
                            term = RhsTerm(m1, tuple(map(tuple, B1.tolist())), m2, tuple(map(tuple, B2.tolist())), tuple(map(tuple, beta.tolist())), W.value, eta.value)
                            terms.append(term)
                            shell_sum += term.value
                            tail += W.tail_bound * (eta.value + eta.tail_bound) + W.value * eta.tail_bound
                        running += shell_sum
                        if beta_bound is not None:
                            if r >= beta_bound:
                                break
                        elif r > 0 and shell_sum <= rel_cut * max(running, 1e-300):
                            tail += shell_sum  # the next shells are smaller still
                            break
    b1 = _boundary(rho.primal_slots, rho.dual_slots, n, H, rng, 200_000)
    b2 = _boundary(rho.dual_slots, rho.primal_slots, n, H, rng, 200_000)
    const = rho.at_origin()
    if not finite_B:
        notes.append(f"B families truncated at height {H}")
    total = math.fsum([t.value for t in terms] + [b[2] for b in b1 + b2] + [const])
    return RhsBreakdown(total, tail, terms, [("primal",) + b for b in b1] + [("dual",) + b for b in b2], const, notes)


# ---------------------------------------------------------------------------
# moments and partitions


def set_partitions(k: int) -> list:
    """All partitions of ``{1, ..., k}`` as lists of sorted blocks; ``𝒫(0) = [[]]``."""
    if k < 0:
        raise DomainError("k must be >= 0")
    if k == 0:
        return [[]]
    out = []
    for part in set_partitions(k - 1):
        for i in range(len(part)):
            out.append([blk + [k] if j == i else list(blk) for j, blk in enumerate(part)])
        out.append([list(blk) for blk in part] + [[k]])
    return out


def _partition_sum(V):
    k = len(V)
    total = 0.0
    for P in set_partitions(k):
        term = 2.0 ** (k - len(P))
        for blk in P:
            term *= V[min(blk) - 1]
        total += term
    return total


def moment_rhs(V, W=()) -> float:
    """Limit of ``E[N_1···N_{k1} Ñ_1···Ñ_{k2}]`` as a product of partition sums."""
    V, W = list(V), list(W)
    if any(b < a for a, b in zip(V, V[1:])) or any(b < a for a, b in zip(W, W[1:])):
        raise DomainError("volumes must be sorted nondecreasing")
    return _partition_sum(V) * _partition_sum(W)


# ---------------------------------------------------------------------------
# exact Haar means used as control variates on X_2


def line_theta(u: float) -> float:
    """``Σ_{m ∈ Z} exp(-π m²/u)``, switching to the Poisson-dual series for ``u > 1``."""
    if u <= 0:
        raise DomainError("u must be positive")
    k = np.arange(1, 12)
    if u > 1.0:
        return math.sqrt(u) * (1.0 + 2.0 * float(np.sum(np.exp(-math.pi * k * k * u))))
    return 1.0 + 2.0 * float(np.sum(np.exp(-math.pi * k * k / u)))


def x2_line_theta_mean(t: float = 1.0) -> float:
    """Haar mean over X_2 of ``line_theta(t/λ_1²)``, the theta sum of the shortest line.

    In the fundamental domain ``λ_1² = 1/y`` and ``y`` has density
    ``(3/π) w(y) / y²`` with ``w(y) = 1`` for ``y >= 1`` and
    ``w(y) = 1 - 2 sqrt(1 - y²)`` for ``sqrt(3)/2 <= y < 1``.
    """
    lower, _ = integrate.quad(lambda y: line_theta(y * t) * (1 - 2 * math.sqrt(1 - y * y)) / (y * y), math.sqrt(3) / 2, 1.0, epsabs=1e-14, epsrel=1e-13)

    # y >= 1, substituting u = 1/y; the sqrt(t/u) growth is integrated by hand
    def g(u):
        yt = t / u
        if yt > 1.0:
            k = np.arange(1, 12)
            return math.sqrt(yt) * 2.0 * float(np.sum(np.exp(-math.pi * k * k * yt)))
        return line_theta(yt) - math.sqrt(yt)

    upper_smooth, _ = integrate.quad(g, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200, points=[min(t, 1.0)] if t < 1 else None)
    upper = upper_smooth + 2.0 * math.sqrt(t)
    return 3.0 / math.pi * (lower + upper)
