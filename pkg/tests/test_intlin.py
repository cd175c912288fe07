import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticelab import intlin
from latticelab.errors import DomainError, NoComplement, NotCanonical, NotRogersAdmissible, RankDeficient


def as_int(A):
    return np.array(A, dtype=object).astype(np.int64)


def minor_gcd(A, r):
    rows, cols = A.shape
    g = 0
    for R in itertools.combinations(range(rows), r):
        for C in itertools.combinations(range(cols), r):
            g = math.gcd(g, int(intlin.det(intlin.intmat(A[np.ix_(R, C)]))))
    return g


small_mats = st.integers(1, 3).flatmap(
    lambda r: st.integers(1, 3).flatmap(
        lambda c: st.lists(st.integers(-4, 4), min_size=r * c, max_size=r * c).map(lambda v: np.array(v).reshape(r, c))
    )
)


# -- smith ------------------------------------------------------------------


@pytest.mark.parametrize(
    "A, divisors",
    [([[1, 0], [0, 1]], (1, 1)), ([[2, 0], [0, 3]], (1, 6)), ([[2, 4], [0, 2]], (2, 2))],
)
def test_smith_examples(A, divisors):
    assert tuple(intlin.smith(intlin.intmat(A)).divisors) == divisors


@settings(max_examples=300, deadline=None)
@given(small_mats)
def test_smith_matches_minor_gcds(A):
    sd = intlin.smith(intlin.intmat(A))
    assert np.array_equal(as_int(sd.U @ sd.D @ sd.V), A)
    assert abs(intlin.det(sd.U)) == 1 and abs(intlin.det(sd.V)) == 1
    divs = [int(d) for d in sd.divisors]
    for a, b in zip(divs, divs[1:]):
        assert b == 0 or (a != 0 and b % a == 0)
    prod = 1
    for r, d in enumerate(divs, start=1):
        prod *= d
        assert prod == minor_gcd(A, r)


def test_det_and_solve_exact():
    A = intlin.intmat([[2, 1], [1, 1]])
    assert intlin.det(A) == 1
    x = intlin.solve(A, intlin.intmat([[3], [2]]))
    assert [int(v) for v in x.flat] == [1, 1]
    with pytest.raises(RankDeficient):
        intlin.solve(intlin.intmat([[1, 2], [2, 4]]), intlin.intmat([[1], [2]]))
    inv = intlin.inverse(intlin.intmat([[2, 0], [0, 3]]))
    assert inv[0, 0] == Fraction(1, 2) and inv[1, 1] == Fraction(1, 3)


# -- canonical forms ---------------------------------------------------------


@pytest.mark.parametrize(
    "A, H",
    [([[1, 0], [0, 1]], [[1, 0], [0, 1]]), ([[0, 1], [2, 0]], [[2, 0], [0, 1]]), ([[1, 5], [0, 3]], [[1, 2], [0, 3]])],
)
def test_coset_canonical_W_examples(A, H):
    got, gamma = intlin.coset_canonical_W(intlin.intmat(A))
    assert np.array_equal(as_int(got), H)
    assert np.array_equal(as_int(gamma @ intlin.intmat(A)), H)
    assert intlin.is_wform(got)


@pytest.mark.parametrize("B, C", [([[1], [-1]], [[1], [-1]]), ([[1, 0], [0, 1]], [[1, 0], [0, 1]]), ([[-2], [-1]], [[2], [1]])])
def test_orbit_canonical_A_examples(B, C):
    got, gamma = intlin.orbit_canonical_A(intlin.intmat(B))
    assert np.array_equal(as_int(got), C)
    assert np.array_equal(as_int(intlin.intmat(B) @ gamma), C)


def test_canonical_forms_constant_on_orbits():
    rng = np.random.default_rng(1)
    from latticelab.ensembles import random_unimodular

    for _ in range(60):
        m = int(rng.integers(1, 3))
        k = m + int(rng.integers(0, 2))
        B = rng.integers(-3, 4, size=(k, m))
        if intlin.rank(intlin.intmat(B)) < m:
            continue
        C, _ = intlin.orbit_canonical_A(intlin.intmat(B))
        A = rng.integers(-3, 4, size=(m, m))
        if intlin.det(intlin.intmat(A)) == 0:
            continue
        H, _ = intlin.coset_canonical_W(intlin.intmat(A))
        for _ in range(5):
            g = random_unimodular(rng, m, 6)
            C2, _ = intlin.orbit_canonical_A(intlin.intmat(B) @ g)
            H2, _ = intlin.coset_canonical_W(g @ intlin.intmat(A))
            assert np.array_equal(as_int(C), as_int(C2))
            assert np.array_equal(as_int(H), as_int(H2))
        # idempotence
        assert np.array_equal(as_int(intlin.orbit_canonical_A(C)[0]), as_int(C))


def test_hermite_rows_shape():
    H, T, piv = intlin.hermite_rows(intlin.intmat([[4, 6, 2], [2, 3, 1], [0, 1, 5]]))
    assert np.array_equal(as_int(T @ intlin.intmat([[4, 6, 2], [2, 3, 1], [0, 1, 5]])), as_int(H))
    assert abs(intlin.det(T)) == 1
    for i, p in enumerate(piv):
        assert H[i, p] > 0
        for r in range(i):
            assert 0 <= H[r, p] < H[i, p]


# -- primitivity and decompositions -------------------------------------------


@pytest.mark.parametrize("B, expected", [([[2], [0]], False), ([[2], [1]], True), ([[1, 0], [0, 2], [0, 1]], True)])
def test_is_primitive_examples(B, expected):
    assert intlin.is_primitive(intlin.intmat(B)) is expected


def test_rank_decompose_examples():
    g, B = intlin.rank_decompose(intlin.intmat([[1, 0], [0, 1], [0, 0]]))
    assert np.array_equal(as_int(B), np.eye(2, dtype=int))
    assert np.array_equal(as_int(g), [[1, 0], [0, 1], [0, 0]])
    g, B = intlin.rank_decompose(intlin.intmat([[2, 4], [1, 2], [0, 0]]))
    assert np.array_equal(as_int(B), [[1], [2]])
    assert np.array_equal(as_int(g), [[2], [1], [0]])
    g, B = intlin.rank_decompose(intlin.intmat([[3, 0], [0, 3], [0, 0]]))
    assert np.array_equal(as_int(B), np.eye(2, dtype=int))
    assert np.array_equal(as_int(g), [[3, 0], [0, 3], [0, 0]])


def test_rank_decompose_roundtrip_and_uniqueness():
    # all 3×2 matrices with entries in {-2..2} of rank >= 1 (subsampled deterministically)
    rng = np.random.default_rng(7)
    cands = {}
    for k in (2,):
        for m in (1, 2):
            cands[(k, m)] = [as_int(B) for B in intlin.enumerate_A(k, m, 6)]
    for _ in range(200):
        C = rng.integers(-3, 4, size=(3, 2))
        r = intlin.rank(intlin.intmat(C))
        if r == 0:
            continue
        g, B = intlin.rank_decompose(intlin.intmat(C))
        assert np.array_equal(as_int(g @ B.T), C)
        assert intlin.is_primitive(B)
        # uniqueness: no other canonical B of small height admits an integer γ
        hits = 0
        for B2 in cands[(2, r)]:
            try:
                sol = intlin.solve(intlin.intmat(B2), intlin.intmat(C.T))
            except (RankDeficient, ValueError):
                continue
            if all(Fraction(v).denominator == 1 for v in sol.flat):
                hits += 1
        assert hits == 1


def test_primitive_factor_examples():
    P, A = intlin.primitive_factor(intlin.intmat([[4], [6], [0]]))
    assert np.array_equal(as_int(P), [[2], [3], [0]]) and np.array_equal(as_int(A), [[2]])
    P, A = intlin.primitive_factor(intlin.intmat([[2, 1], [0, 1], [0, 0]]))
    assert np.array_equal(as_int(P), [[1, 1], [0, 1], [0, 0]])
    assert np.array_equal(as_int(A), [[2, 0], [0, 1]])
    C = intlin.intmat([[1, 0], [0, 1], [1, 1]])
    P, A = intlin.primitive_factor(C)
    assert np.array_equal(as_int(P), as_int(C)) and np.array_equal(as_int(A), np.eye(2, dtype=int))


def test_primitive_factor_bijection_small_box():
    # every rank-2 3×2 matrix with entries in [-2, 2] factors uniquely; the factorisation round-trips
    seen = set()
    for vals in itertools.product(range(-2, 3), repeat=6):
        C = np.array(vals).reshape(3, 2)
        if intlin.rank(intlin.intmat(C)) < 2:
            continue
        P, A = intlin.primitive_factor(intlin.intmat(C))
        assert np.array_equal(as_int(P @ A), C)
        assert intlin.is_primitive(P) and intlin.is_wform(A)
        key = (as_int(P).tobytes(), as_int(A).tobytes())
        assert key not in seen
        seen.add(key)


@pytest.mark.parametrize("B, expected", [([[1], [0]], [[0], [1]]), ([[1], [1]], [[1], [-1]]), ([[1], [2]], [[2], [-1]])])
def test_perp_rep_examples(B, expected):
    Bt = intlin.perp_rep(intlin.intmat(B))
    assert np.array_equal(as_int(Bt), expected)
    assert intlin.gram_det(Bt) == intlin.gram_det(intlin.intmat(B))


def test_perp_rep_properties():
    for k in (2, 3):
        for m in range(1, k):
            for B in intlin.enumerate_A(k, m, 2):
                Bt = intlin.perp_rep(B)
                assert not np.any(as_int(B.T @ Bt))
                assert intlin.is_primitive(Bt)
                assert intlin.gram_det(Bt) == intlin.gram_det(B)
    with pytest.raises(NoComplement):
        intlin.perp_rep(intlin.identity(2))


# -- enumeration ----------------------------------------------------------------


def test_enumerate_A_examples():
    assert [as_int(B).tolist() for B in intlin.enumerate_A(1, 1, 5)] == [[[1]]]
    got = sorted(tuple(as_int(B).ravel()) for B in intlin.enumerate_A(2, 1, 1))
    assert got == sorted([(1, 0), (0, 1), (1, 1), (1, -1)])
    assert [as_int(B).tolist() for B in intlin.enumerate_A(2, 2, 1)] == [[[1, 0], [0, 1]]]


def test_enumerate_A_one_per_orbit():
    # brute force: canonicalise every primitive 3×1 and 3×2 matrix in a box
    for m in (1, 2):
        reps = set()
        for vals in itertools.product(range(-1, 2), repeat=3 * m):
            B = np.array(vals).reshape(3, m)
            if intlin.rank(intlin.intmat(B)) < m or not intlin.is_primitive(intlin.intmat(B)):
                continue
            C, _ = intlin.orbit_canonical_A(intlin.intmat(B))
            reps.add(as_int(C).tobytes())
        # every canonical form of a height-1 matrix has height <= 2 here
        enumerated = {as_int(B).tobytes() for B in intlin.enumerate_A(3, m, 2)}
        assert reps <= enumerated
        assert len({b for b in enumerated}) == len(intlin.enumerate_A(3, m, 2))


def test_enumerate_W_examples():
    assert [as_int(A).tolist() for A in intlin.enumerate_W(1, 3)] == [[[1]], [[2]], [[3]]]
    assert len(intlin.enumerate_W(2, 2)) == 4
    assert [as_int(A).tolist() for A in intlin.enumerate_W(3, 1)] == [np.eye(3, dtype=int).tolist()]


def test_enumerate_W_counts_sigma():
    # #{A in W_2 : det A = d} = σ_1(d)
    ws = intlin.enumerate_W(2, 12)
    for d in range(1, 13):
        count = sum(1 for A in ws if intlin.det(A) == d)
        assert count == sum(e for e in range(1, d + 1) if d % e == 0)


# -- congruences and denominators ----------------------------------------------------


@pytest.mark.parametrize("theta, q, N", [([[0]], 3, 3), ([[2]], 4, 2), ([[1], [0]], 2, 2)])
def test_congruence_count_examples(theta, q, N):
    assert intlin.congruence_count(intlin.intmat(theta), q) == N


def test_congruence_count_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(150):
        m1, m2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        q = int(rng.integers(1, 7))
        theta = rng.integers(-q, q + 1, size=(m1, m2))
        brute = 0
        for a in itertools.product(range(q), repeat=m1):
            if not np.any((theta.T @ np.array(a)) % q):
                brute += 1
        assert intlin.congruence_count(intlin.intmat(theta), q) == brute


def test_rational_denominator():
    assert intlin.rational_denominator(intlin.intmat([[1, 2]])) == 1
    assert intlin.rational_denominator(intlin.ratmat([[Fraction(1, 2)]])) == 2
    assert intlin.rational_denominator(intlin.ratmat([[Fraction(1, 2), Fraction(1, 3)]])) == 6


# -- B3 construction and the Jacobian identity ----------------------------------------


def test_b3_example():
    B3, J = intlin.b3_construct(intlin.intmat([[1]]), intlin.intmat([[1], [0]]), intlin.ratmat([[Fraction(1, 2)]]))
    assert abs(intlin.det(J)) == Fraction(1, 2)
    assert intlin.is_primitive(B3)


def test_b3_zero_alpha():
    B3, J = intlin.b3_construct(intlin.intmat([[1]]), intlin.intmat([[1], [0]]), intlin.ratmat([[0]]))
    assert abs(intlin.det(J)) == 1


def test_b3_rejects_noncanonical():
    with pytest.raises(NotCanonical):
        intlin.b3_construct(intlin.intmat([[2]]), intlin.intmat([[1], [0]]), intlin.ratmat([[0]]))


# -- Rogers translation --------------------------------------------------------------


def test_translate_examples():
    B, q, _ = intlin.translate_D_to_B(intlin.intmat([[1, 0]]))
    assert q == 1 and np.array_equal(as_int(B), [[1], [0]])
    B, q, _ = intlin.translate_D_to_B(intlin.identity(2))
    assert q == 1 and np.array_equal(as_int(B), np.eye(2, dtype=int))
    B, q, divs = intlin.translate_D_to_B(intlin.intmat([[2, 1]]))
    assert q == 2 and np.array_equal(as_int(B), [[2], [1]])


def test_translate_divisors_divide_q():
    count = 0
    for m, k in ((1, 2), (1, 3), (2, 3)):
        for vals in itertools.product(range(-2, 3), repeat=m * k):
            D = intlin.intmat(np.array(vals).reshape(m, k))
            try:
                B, q, divs = intlin.translate_D_to_B(D)
            except (NotRogersAdmissible, DomainError):
                continue
            count += 1
            assert all(q % int(e) == 0 for e in divs)
    assert count > 0
