import itertools
import math

import numpy as np
import pytest

from latticelab import geom
from latticelab.errors import NotOnManifold, SingularMatrix
from latticelab.geom import Lattice, TuplePoint


def random_unimodular_lattice(rng, n):
    A = rng.standard_normal((n, n))
    A /= abs(np.linalg.det(A)) ** (1.0 / n)
    if np.linalg.det(A) < 0:
        A[:, 0] *= -1
    return Lattice(A)


def brute_short(L, R, box=8):
    out = []
    for c in itertools.product(range(-box, box + 1), repeat=L.n):
        if any(c):
            v = L.basis @ np.array(c, dtype=float)
            if v @ v <= R * R:
                out.append(v)
    return out


def test_ball_volume():
    assert geom.ball_volume(1) == pytest.approx(2.0, rel=1e-14)
    assert geom.ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
    assert geom.ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-14)


def test_dvol():
    assert geom.dvol(np.array([1.0, 0, 0])) == pytest.approx(1.0)
    assert geom.dvol(np.array([2.0, 0, 0])) == pytest.approx(2.0)
    assert geom.dvol(np.array([[1.0, 1], [0, 1], [0, 0]])) == pytest.approx(1.0)
    assert geom.dvol(np.zeros((3, 0))) == 1.0


def test_lattice_is_immutable_and_covolume():
    L = Lattice(np.array([[2.0, 1.0], [0.0, 0.5]]))
    assert L.covolume == pytest.approx(1.0)
    with pytest.raises(ValueError):
        L.basis[0, 0] = 3.0


@pytest.mark.parametrize(
    "B, D",
    [(np.eye(2), np.eye(2)), (np.diag([2.0, 0.5]), np.diag([0.5, 2.0])), (np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [-1.0, 1.0]]))],
)
def test_dual_examples(B, D):
    assert np.allclose(geom.dual(Lattice(B)).basis, D)


def test_dual_singular():
    with pytest.raises(SingularMatrix):
        geom.dual(Lattice(np.array([[1.0, 2.0], [2.0, 4.0]])))


def test_double_dual_gram():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4, 5):
        L = random_unimodular_lattice(rng, n)
        a, _ = geom.lll(L)
        b, _ = geom.lll(geom.dual(geom.dual(L)))
        assert np.allclose(np.sort(np.linalg.eigvalsh(a.gram)), np.sort(np.linalg.eigvalsh(b.gram)), atol=1e-10)


def test_lll_preserves_lattice():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4, 6):
        L = random_unimodular_lattice(rng, n)
        red, U = geom.lll(L)
        assert round(abs(np.linalg.det(U.astype(float)))) == 1
        assert np.allclose(L.basis @ U, red.basis)


@pytest.mark.parametrize("n, R, count", [(2, 1.0, 4), (2, 1.5, 8), (3, 1.0, 6)])
def test_short_vectors_examples(n, R, count):
    assert len(geom.short_vectors(Lattice(np.eye(n)), R)) == count


def test_short_vectors_against_brute_force():
    rng = np.random.default_rng(2)
    for trial in range(100):
        n = 2 + trial % 3
        L = geom.lll(random_unimodular_lattice(rng, n))[0]
        R = 1.6
        got = geom.short_vectors(L, R)
        brute = brute_short(L, R, box=6)
        assert len(got) == len(brute)
        norms = np.einsum("ij,ij->i", got, got)
        assert np.all(np.diff(norms) >= -1e-12)


def test_normalized_volumes():
    Z2 = Lattice(np.eye(2))
    assert geom.normalized_volumes(Z2, 1) == pytest.approx([math.pi])
    assert geom.normalized_volumes(Z2, 3) == pytest.approx([math.pi, math.pi, 2 * math.pi])
    assert geom.normalized_volumes(Z2, 0) == []


def test_gaussian_radius_certifies_tail():
    rng = np.random.default_rng(3)
    for n in (2, 3, 4):
        L = geom.lll(random_unimodular_lattice(rng, n))[0]
        R = geom.gaussian_radius(L, 1.0, 1e-12)
        inside = sum(math.exp(-math.pi * float(v @ v)) for v in brute_short(L, R, box=7))
        total = sum(math.exp(-math.pi * float(v @ v)) for v in brute_short(L, 10.0, box=7))
        assert total - inside <= 1e-12


def test_theta_poisson_identity():
    rng = np.random.default_rng(4)
    from latticelab.transforms import Gaussian, siegel_sum

    g = Gaussian(1.0)
    for trial in range(100):
        n = 2 + trial % 4
        L = random_unimodular_lattice(rng, n)
        a, b = siegel_sum(L, g), siegel_sum(geom.dual(L), g)
        assert abs(a - b) <= 1e-8 * a


def test_apply_g_examples():
    x = np.array([[1.0], [0.0]])
    y = np.array([[0.0], [1.0]])
    p = TuplePoint(x, y)
    q = geom.apply_g(np.eye(2), p)
    assert np.allclose(q.x, x) and np.allclose(q.y, y)
    q = geom.apply_g(np.diag([2.0, 0.5]), p)
    assert np.allclose(q.x, [[2.0], [0.0]]) and np.allclose(q.y, [[0.0], [2.0]])
    with pytest.raises(ValueError):
        geom.apply_g(np.diag([2.0, 1.0]), p)


def test_apply_g_preserves_pairing():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = 5
        g = rng.standard_normal((n, n))
        g /= np.linalg.det(g) ** (1 / n) if np.linalg.det(g) > 0 else -1
        if np.linalg.det(g) < 0:
            g[:, 0] *= -1
        g /= np.linalg.det(g) ** (1 / n)
        x = rng.standard_normal((n, 2))
        y = rng.standard_normal((n, 2))
        p = TuplePoint(x, y)
        q = geom.apply_g(g, p)
        assert np.allclose(q.pairing, p.pairing, atol=1e-9)
        assert geom.on_manifold(q, p.pairing)


def test_scaling_delta():
    assert geom.scaling_delta(np.eye(3), np.eye(3)[:, :1]) == pytest.approx(1.0)
    assert geom.scaling_delta(np.diag([2.0, 0.5]), np.array([1.0, 0.0])) == pytest.approx(2.0)


def test_scaling_delta_complement_identity():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n, d = 4, 2
        g = rng.standard_normal((n, n))
        if np.linalg.det(g) < 0:
            g[:, 0] *= -1
        g /= np.linalg.det(g) ** (1 / n)
        V = rng.standard_normal((n, d))
        gV = g @ V
        q, _ = np.linalg.qr(gV, mode="complete")
        perp = q[:, d:]
        assert geom.scaling_delta(g.T, perp) * geom.scaling_delta(g, V) == pytest.approx(1.0, rel=1e-9)


def _point_on(beta, rng, n):
    m1, m2 = beta.shape
    x = rng.standard_normal((n, m1))
    # y = x (xᵀx)^{-1} β + (component orthogonal to x)
    y0 = x @ np.linalg.solve(x.T @ x, beta)
    q, _ = np.linalg.qr(x, mode="complete")
    y = y0 + q[:, m1:] @ rng.standard_normal((n - m1, m2))
    return TuplePoint(x, y)


def test_transporter_identity_target():
    rng = np.random.default_rng(7)
    beta = np.array([[1.0]])
    p = _point_on(beta, rng, 3)
    g = geom.transporter(beta, p, p)
    q = geom.apply_g(g, p)
    assert np.allclose(q.x, p.x, atol=1e-6) and np.allclose(q.y, p.y, atol=1e-6)


def test_transporter_example_n3():
    p = TuplePoint(np.array([[1.0], [0], [0]]), np.array([[0.0], [1], [0]]))
    p2 = TuplePoint(np.array([[2.0], [0], [0]]), np.array([[0.0], [0], [0.5]]))
    g = geom.transporter(np.array([[0.0]]), p, p2)
    assert np.linalg.det(g) == pytest.approx(1.0)
    q = geom.apply_g(g, p)
    assert np.allclose(q.x, p2.x, atol=1e-6) and np.allclose(q.y, p2.y, atol=1e-6)


@pytest.mark.parametrize("n, m1, m2", [(4, 1, 1), (4, 2, 1), (4, 1, 2), (5, 2, 2)])
def test_transporter_random(n, m1, m2):
    rng = np.random.default_rng(n * 10 + m1 * 3 + m2)
    for _ in range(25):
        beta = rng.integers(-2, 3, size=(m1, m2)).astype(float)
        p, p2 = _point_on(beta, rng, n), _point_on(beta, rng, n)
        g = geom.transporter(beta, p, p2, seed=1)
        assert np.linalg.det(g) == pytest.approx(1.0, abs=1e-8)
        q = geom.apply_g(g, p)
        assert np.allclose(q.x, p2.x, atol=1e-6) and np.allclose(q.y, p2.y, atol=1e-6)


def test_transporter_rejects_off_manifold():
    p = TuplePoint(np.array([[1.0], [0], [0]]), np.array([[1.0], [1], [0]]))
    with pytest.raises(NotOnManifold):
        geom.transporter(np.array([[0.0]]), p, p)


def test_counting_limit_on_Z4():
    # R^{-(n-1)} #{w in Z^4 : w1 = 0, 0 < |w| < R} -> V_3
    def count(R):
        r = int(R)
        a = np.arange(-r, r + 1)
        w2, w3, w4 = np.meshgrid(a, a, a, indexing="ij")
        s = w2**2 + w3**2 + w4**2
        return int(np.count_nonzero((s > 0) & (s < R * R)))

    devs = [abs(count(R) / R**3 - geom.ball_volume(3)) / geom.ball_volume(3) for R in (10, 20, 40)]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 0.05
