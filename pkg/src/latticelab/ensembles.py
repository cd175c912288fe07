"""Random and deterministic families of covolume-one lattices.

* ``x2``: exact Haar samples on X_2 drawn in the classical fundamental domain.
* ``hecke``: the index-``p`` sublattices ``{v ∈ Z^n : a·v ≡ 0 mod p}`` rescaled
  by ``p^{-1/n}``, one per point ``[a]`` of ``P^{n-1}(F_p)``; either the whole
  set in a fixed order or uniform draws from it.
* ``fixed``: an explicit list of lattices.

Randomness is keyed by ``(seed, chunk)`` with chunks of :data:`CHUNK`
members, so any worker can materialise any index range and the members do
not depend on how the work was split.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, DomainError
from .geom import Lattice

__all__ = [
    "CHUNK",
    "EnsembleSpec",
    "sample_x2",
    "x2_batch",
    "HeckeSet",
    "hecke_set",
    "hecke_lattice",
    "projective_point",
    "random_unimodular",
    "member",
    "members",
    "is_prime",
    "hecke_theta_moments",
]

CHUNK = 1024


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    r = math.isqrt(p)
    f = 3
    while f <= r:
        if p % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class EnsembleSpec:
    """Description of a lattice ensemble; build with :meth:`x2`, :meth:`hecke` or :meth:`fixed`."""

    kind: str
    n: int = 2
    samples: int = 0
    seed: int = 0
    p: int = 0
    mode: str = "full"
    lattices: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind == "x2":
            if self.samples < 1:
                raise ConfigError("x2 ensemble needs samples >= 1")
            object.__setattr__(self, "n", 2)
        elif self.kind == "hecke":
            if self.n < 2:
                raise ConfigError("hecke ensemble needs n >= 2")
            if not is_prime(self.p):
                raise DomainError(f"p = {self.p} is not prime")
            if self.mode not in ("full", "sampled"):
                raise ConfigError(f"unknown hecke mode {self.mode!r}")
            if self.mode == "sampled" and self.samples < 1:
                raise ConfigError("sampled hecke ensemble needs samples >= 1")
        elif self.kind == "fixed":
            if len(self.lattices) < 1:
                raise ConfigError("fixed ensemble needs at least one lattice")
            object.__setattr__(self, "n", self.lattices[0].n)
        else:
            raise ConfigError(f"unknown ensemble kind {self.kind!r}")

    @classmethod
    def x2(cls, samples: int, seed: int = 0) -> "EnsembleSpec":
        return cls("x2", n=2, samples=samples, seed=seed)

    @classmethod
    def hecke(cls, n: int, p: int, mode: str = "full", samples: int = 0, seed: int = 0) -> "EnsembleSpec":
        return cls("hecke", n=n, p=p, mode=mode, samples=samples, seed=seed)

    @classmethod
    def fixed(cls, lattices) -> "EnsembleSpec":
        return cls("fixed", lattices=tuple(lattices))

    @property
    def size(self) -> int:
        if self.kind == "x2":
            return self.samples
        if self.kind == "fixed":
            return len(self.lattices)
        if self.mode == "full":
            return (self.p**self.n - 1) // (self.p - 1)
        return self.samples

    @property
    def exhaustive(self) -> bool:
        """True when the members are the whole (finite) ensemble rather than random draws."""
        return self.kind == "fixed" or (self.kind == "hecke" and self.mode == "full")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "x2":
            d.update(samples=self.samples, seed=self.seed)
        elif self.kind == "hecke":
            d.update(n=self.n, p=self.p, mode=self.mode)
            if self.mode == "sampled":
                d.update(samples=self.samples, seed=self.seed)
        else:
            d["lattices"] = [L.basis.tolist() for L in self.lattices]
        return d

    @classmethod
    def from_dict(cls, d: dict, seed: int | None = None) -> "EnsembleSpec":
        try:
            kind = d["kind"]
            if kind == "x2":
                return cls.x2(int(d["samples"]), int(d.get("seed", 0) if seed is None else seed))
            if kind == "hecke":
                return cls.hecke(
                    int(d["n"]),
                    int(d["p"]),
                    d.get("mode", "full"),
                    int(d.get("samples", 0)),
                    int(d.get("seed", 0) if seed is None else seed),
                )
            if kind == "fixed":
                return cls.fixed([Lattice(np.array(b, dtype=float)) for b in d["lattices"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad ensemble spec {d!r}: {exc}") from exc
        raise ConfigError(f"unknown ensemble kind {d.get('kind')!r}")


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(chunk)])


# ---------------------------------------------------------------------------
# exact Haar samples on X_2


def _x2_from_uniforms(u1, u2):
    # marginal of x is proportional to (1 - x^2)^{-1/2} on [-1/2, 1/2]:
    # its CDF is linear in arcsin(x), which inverts in closed form.
    x = np.sin(np.pi * (u1 - 0.5) / 3.0)
    # given x, y has density proportional to y^{-2} on [sqrt(1 - x^2), inf)
    y = np.sqrt(1.0 - x * x) / u2
    return x, y


def _x2_basis(x, y):
    s = 1.0 / math.sqrt(y)
    return np.array([[s, x * s], [0.0, math.sqrt(y)]])


def sample_x2(rng: np.random.Generator) -> Lattice:
    """One Haar-random lattice of covolume one in R^2."""
    u1 = rng.random()
    u2 = 1.0 - rng.random()  # in (0, 1]
    x, y = _x2_from_uniforms(u1, u2)
    return Lattice(_x2_basis(float(x), float(y)), reduced=True)


def x2_coordinates(seed: int, chunk: int):
    """Iwasawa coordinates ``(x, y)`` of the :data:`CHUNK` members of one chunk."""
    rng = _chunk_rng(seed, chunk)
    u = rng.random((CHUNK, 2))
    return _x2_from_uniforms(u[:, 0], 1.0 - u[:, 1])


def x2_batch(seed: int, start: int, stop: int) -> list:
    out = []
    for chunk in range(start // CHUNK, (stop - 1) // CHUNK + 1):
        xs, ys = x2_coordinates(seed, chunk)
        lo = max(start, chunk * CHUNK) - chunk * CHUNK
        hi = min(stop, (chunk + 1) * CHUNK) - chunk * CHUNK
        for i in range(lo, hi):
            out.append(Lattice(_x2_basis(float(xs[i]), float(ys[i])), reduced=True))
    return out


# ---------------------------------------------------------------------------
# Hecke points


def projective_point(n: int, p: int, index: int) -> np.ndarray:
    """The ``index``-th point of ``P^{n-1}(F_p)``, normalised with leading entry 1."""
    total = (p**n - 1) // (p - 1)
    if not 0 <= index < total:
        raise IndexError(index)
    i = index
    for lead in range(n):
        block = p ** (n - 1 - lead)
        if i < block:
            a = np.zeros(n, dtype=np.int64)
            a[lead] = 1
            for pos in range(n - 1, lead, -1):
                a[pos] = i % p
                i //= p
            return a
        i -= block
    raise AssertionError("unreachable")


def _normalise(v: np.ndarray, p: int) -> np.ndarray:
    nz = np.flatnonzero(v)
    inv = pow(int(v[nz[0]]), -1, p)
    return np.array([(int(x) * inv) % p for x in v], dtype=np.int64)


def hecke_lattice(a, p: int, reduce: bool = True) -> Lattice:
    """The rescaled kernel lattice ``p^{-1/n}·{v ∈ Z^n : a·v ≡ 0 mod p}``."""
    a = np.asarray(a, dtype=np.int64) % p
    n = a.shape[0]
    nz = np.flatnonzero(a)
    if len(nz) == 0:
        raise DomainError("a must be nonzero mod p")
    a = _normalise(a, p)
    j = int(nz[0])
    B = np.zeros((n, n))
    col = 0
    for i in range(n):
        if i == j:
            continue
        ai = int(a[i])
        if ai > p // 2:
            ai -= p
        B[i, col] = 1.0
        B[j, col] = -float(ai)
        col += 1
    B[j, n - 1] = float(p)
    if reduce:
        B, _, ok = _kernels.lll(B, 0.99)
        if not ok:
            raise DomainError("LLL failed on a Hecke basis")
    return Lattice(B * p ** (-1.0 / n), reduced=reduce)


class HeckeSet(Sequence):
    """Lazy sequence of Hecke lattices."""

    def __init__(self, spec: EnsembleSpec):
        if spec.kind != "hecke":
            raise ConfigError("HeckeSet needs a hecke spec")
        self.spec = spec

    def __len__(self):
        return self.spec.size

    def point(self, index: int) -> np.ndarray:
        spec = self.spec
        if spec.mode == "full":
            return projective_point(spec.n, spec.p, index)
        if not 0 <= index < spec.samples:
            raise IndexError(index)
        chunk, off = divmod(index, CHUNK)
        return self._chunk_points(chunk)[off]

    def _chunk_points(self, chunk: int) -> np.ndarray:
        spec = self.spec
        rng = _chunk_rng(spec.seed, chunk)
        pts = np.empty((CHUNK, spec.n), dtype=np.int64)
        for r in range(CHUNK):
            while True:
                v = rng.integers(0, spec.p, spec.n)
                if v.any():
                    break
            pts[r] = _normalise(v, spec.p)
        return pts

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        return hecke_lattice(self.point(index), self.spec.p)

    def batch(self, start: int, stop: int) -> list:
        if self.spec.mode == "full":
            return [self[i] for i in range(start, stop)]
        out = []
        for chunk in range(start // CHUNK, (stop - 1) // CHUNK + 1):
            pts = self._chunk_points(chunk)
            lo = max(start, chunk * CHUNK) - chunk * CHUNK
            hi = min(stop, (chunk + 1) * CHUNK) - chunk * CHUNK
            out.extend(hecke_lattice(pts[i], self.spec.p) for i in range(lo, hi))
        return out


def hecke_set(n: int, p: int, mode: str = "full", samples: int = 0, seed: int = 0) -> HeckeSet:
    """Hecke lattices of level ``p`` in dimension ``n`` as a lazy sequence."""
    return HeckeSet(EnsembleSpec.hecke(n, p, mode, samples, seed))


# ---------------------------------------------------------------------------
# generic access


def members(spec: EnsembleSpec, start: int = 0, stop: int | None = None) -> list:
    """Members ``start..stop-1`` of the ensemble."""
    stop = spec.size if stop is None else min(stop, spec.size)
    if start >= stop:
        return []
    if spec.kind == "x2":
        return x2_batch(spec.seed, start, stop)
    if spec.kind == "fixed":
        return list(spec.lattices[start:stop])
    return HeckeSet(spec).batch(start, stop)


def member(spec: EnsembleSpec, index: int) -> Lattice:
    if not 0 <= index < spec.size:
        raise IndexError(index)
    return members(spec, index, index + 1)[0]


def _line_theta(x) -> np.ndarray:
    """``Σ_{m ∈ Z} exp(-π x m²)`` elementwise, via the Poisson-dual series for ``x < 1``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    k2 = np.arange(1, 9, dtype=float) ** 2
    small = x < 1.0
    xs = x[small]
    out[small] = (1.0 + 2.0 * np.exp(-math.pi * np.outer(1.0 / xs, k2)).sum(axis=1)) / np.sqrt(xs)
    xl = x[~small]
    out[~small] = 1.0 + 2.0 * np.exp(-math.pi * np.outer(xl, k2)).sum(axis=1)
    return out


def _mobius(N: int) -> np.ndarray:
    mu = np.ones(N + 1, dtype=np.int64)
    mu[0] = 0
    sieve = np.ones(N + 1, dtype=bool)
    for q in range(2, N + 1):
        if sieve[q]:
            sieve[2 * q :: q] = False
            mu[q::q] *= -1
            mu[q * q :: q * q] = 0
    return mu


def _parallel_pair_sum(n: int, sigma: float) -> float:
    """``Σ exp(-πσ(|v|²+|w|²))`` over nonzero parallel pairs ``v, w ∈ Z^n``.

    Writing ``v = a x``, ``w = b x`` with ``x`` primitive (up to sign) gives
    ``½ Σ_{a,b≠0} Σ_{x primitive} exp(-πσ(a²+b²)|x|²)``; the primitive sum
    is a Möbius combination of full theta sums.
    """
    U = 45.0 / (math.pi * sigma)
    M = math.isqrt(int(U)) + 1
    a = np.arange(1, M + 1, dtype=np.int64)
    u = (a[:, None] ** 2 + a[None, :] ** 2).ravel()
    u = u[u <= U]
    mult = np.bincount(u)
    us = np.flatnonzero(mult)
    cs = 4.0 * mult[us]  # signs of a and b
    mu = _mobius(math.isqrt(int(U // 2)) + 1)
    total = []
    for d in range(1, len(mu)):
        if mu[d] == 0:
            continue
        keep = us * d * d <= U
        if not keep.any():
            break
        x = sigma * d * d * us[keep]
        total.append(mu[d] * cs[keep] * (_line_theta(x) ** n - 1.0))
    return 0.5 * math.fsum(np.concatenate(total))


def hecke_theta_moments(n: int, p: int, t: float = 1.0, tol: float = 1e-12) -> tuple:
    """Exact means of ``T`` and ``T²`` over the full Hecke set, ``T = Σ_{v ∈ L∖0} exp(-π|v|²/t)``.

    A nonzero ``v ∈ Z^n`` lies in the fraction ``c1 = (p^{n-1}-1)/(p^n-1)`` of
    the kernel lattices, and a pair spanning a plane mod ``p`` in the fraction
    ``c2 = (p^{n-2}-1)/(p^n-1)``. Pairs whose weight exceeds ``tol`` have all
    2×2 minors below ``p`` in absolute value, so their rank mod ``p`` equals
    their rank over Z and the pair sum splits into a product part and a sum
    over parallel pairs. Raises :class:`DomainError` when ``p`` is too small
    for that reduction.
    """
    if n < 3:
        raise DomainError("need n >= 3")
    if not is_prime(p):
        raise DomainError("p must be prime")
    sigma = p ** (-2.0 / n) / t
    K = math.log(1.0 / tol) / (math.pi * sigma)
    if not (p > K / 2 and p * p > K):
        raise DomainError("p too small for the rank reduction at this tolerance")
    c1 = (p ** (n - 1) - 1) / (p**n - 1)
    c2 = (p ** (n - 2) - 1) / (p**n - 1)
    S = float(_line_theta(sigma)[0]) ** n - 1.0
    P = _parallel_pair_sum(n, sigma)
    return c1 * S, c2 * (S * S - P) + c1 * P


def random_unimodular(rng: np.random.Generator, n: int, steps: int) -> np.ndarray:
    """Product of random integer shears and signed permutations (exact, det ±1)."""
    if steps < 1:
        raise DomainError("steps must be >= 1")
    g = np.empty((n, n), dtype=object)
    g.fill(0)
    for i in range(n):
        g[i, i] = 1
    for _ in range(steps):
        if n > 1 and rng.random() < 0.75:
            i, j = rng.choice(n, size=2, replace=False)
            c = int(rng.choice([-2, -1, 1, 2]))
            g[:, j] = g[:, j] + c * g[:, i]
        else:
            perm = rng.permutation(n)
            signs = rng.choice([-1, 1], size=n)
            g = g[:, perm] * np.array([int(s) for s in signs], dtype=object)
    return g
