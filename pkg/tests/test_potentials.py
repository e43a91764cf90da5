import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toricgeo import (
    BoundaryPoint,
    PLConvexFunction,
    OrbitPoint,
    conjugate_plus_pl,
    conjugate_u0,
    moment0,
    orbit_point_at,
    phi,
    preset,
    u0,
)
from toricgeo.potentials import legendre, lattice_table


def entropy(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def test_phi_examples(cp1, square):
    v, g, h = phi(cp1, None, [0.0])
    assert v == pytest.approx(np.log(2), abs=1e-15)
    assert g[0] == pytest.approx(0.5) and h[0, 0] == pytest.approx(0.25)
    v, g, _ = phi(cp1, None, [2.0])
    assert v == pytest.approx(np.log1p(np.e**2), abs=1e-14)
    assert g[0] == pytest.approx(np.e**2 / (1 + np.e**2), abs=1e-15)
    v, g, _ = phi(square, None, [0.0, 0.0])
    assert v == pytest.approx(2 * np.log(2)) and np.allclose(g, 0.5)


def test_phi_is_the_simplex_potential(cp2):
    # log(1 + e^a + e^b), one exponential per vertex of the simplex
    rho = np.array([0.3, -1.2])
    v, _, _ = phi(cp2, None, rho)
    assert v == pytest.approx(np.log(1 + np.exp(0.3) + np.exp(-1.2)), abs=1e-15)


def test_phi_large_arguments_are_stable(cp2):
    v, g, h = phi(cp2, None, [800.0, -800.0])
    assert np.isfinite(v) and v == pytest.approx(800.0)
    assert np.all(np.isfinite(h))


def test_moment_examples(cp1, square):
    assert moment0(cp1, OrbitPoint.open(cp1, [0.0]))[0] == pytest.approx(0.5)
    assert moment0(cp1, OrbitPoint.at_vertex(cp1, 0)).tolist() == [0.0]
    F = square.face([1])
    x = moment0(square, OrbitPoint(square, F, np.array([0.0])))
    assert np.allclose(x, [0.5, 0.0])


def test_u0_examples(cp1, cp2):
    val, r = u0(cp1, None, [0.5])
    assert val == pytest.approx(-np.log(2), abs=1e-14) and abs(r[0]) < 1e-12
    val, r = u0(cp1, None, [0.25])
    assert val == pytest.approx(0.25 * np.log(0.25) + 0.75 * np.log(0.75), abs=1e-13)
    assert r[0] == pytest.approx(np.log(1 / 3), abs=1e-11)
    val, r = u0(cp2, None, [1 / 3, 1 / 3])
    assert val == pytest.approx(-np.log(3), abs=1e-13) and np.allclose(r, 0, atol=1e-11)


def test_u0_boundary_point_rejected(cp1):
    with pytest.raises(BoundaryPoint):
        u0(cp1, None, [1e-12])


def test_orbit_point_at_restratifies(square):
    z = orbit_point_at(square, [0.0, 0.25])
    assert z.face.active == frozenset({0})
    assert z.rho[0] == pytest.approx(np.log(1 / 3), abs=1e-10)


def test_conjugate_examples(cp1, f_abs):
    res = conjugate_plus_pl(cp1, f_abs, 1.0, None, [3.0])
    assert res.regions[0].kind == "chamber" and res.regions[0].pieces == (1,)
    assert res.x[0, 0] == pytest.approx(np.e**2 / (1 + np.e**2), abs=1e-14)
    assert res.value[0] == pytest.approx(0.5 + np.log1p(np.e**2), abs=1e-13)
    for r, expected in ((0.0, np.log(2)), (0.5, 0.25 + np.log(2))):
        res = conjugate_plus_pl(cp1, f_abs, 1.0, None, [r])
        assert res.regions[0].kind == "corner" and res.regions[0].pieces == (0, 1)
        assert res.x[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert res.value[0] == pytest.approx(expected, abs=1e-12)
        xi = np.array(res.regions[0].xi)
        assert np.all(xi >= -1e-12) and xi.sum() == pytest.approx(1.0)


def test_conjugate_at_vertex(cp1, f_abs):
    res = conjugate_plus_pl(cp1, f_abs, 2.0, cp1.vertex_face(1), np.zeros(0))
    assert res.value[0] == pytest.approx(-1.0)
    assert res.regions[0].kind == "vertex"


def test_conjugate_kkt(square, f_ramp):
    """rho - grad u(x*) = t * subgradient, checked through the returned weights."""
    rng = np.random.default_rng(3)
    rows = rng.uniform(-4, 4, size=(60, 2))
    t = 1.3
    res = conjugate_plus_pl(square, f_ramp, t, None, rows)
    _, rstar = u0(square, None, res.x, boundary_tol=0.0)
    for r, rs, reg in zip(rows, rstar, res.regions):
        xi = np.zeros(f_ramp.n_pieces)
        if reg.kind == "chamber":
            xi[reg.pieces[0]] = 1.0
        else:
            xi[list(reg.pieces)] = reg.xi
        assert np.allclose(r - rs, t * xi @ f_ramp.nu_array, atol=1e-8)


@pytest.mark.parametrize("name", ["CP1", "CP2"])
def test_involution_on_grid(name):
    P = preset(name)
    ax = np.linspace(-6, 6, 7)
    grid = np.stack(np.meshgrid(*([ax] * P.dim), indexing="ij"), -1).reshape(-1, P.dim)
    ref = phi(P, None, grid, order=0)[0]
    assert np.max(np.abs(conjugate_u0(P, None, grid) - ref)) <= 1e-8
    flat = PLConvexFunction(P, [((0,) * P.dim, 0)])
    assert np.max(np.abs(conjugate_plus_pl(P, flat, 0.0, None, grid).value - ref)) <= 1e-8


@pytest.mark.parametrize("name", ["CP1", "CP2", "CP1xCP1", "Hirzebruch1"])
def test_fenchel_young_and_inverse_maps(name):
    P = preset(name)
    rng = np.random.default_rng(7)
    pts = lattice_table(P, P.interior)
    w = rng.dirichlet(np.ones(len(pts)), size=50)
    x = w @ pts  # interior points
    val, rstar = u0(P, None, x)
    ph = phi(P, None, rstar, order=0)[0]
    assert np.max(np.abs(val + ph - np.einsum("ij,ij->i", x, rstar))) <= 1e-10
    back = moment0(P, OrbitPoint(P, P.interior, rstar))
    assert np.max(np.abs(back - x)) <= 1e-10
    rho = rng.uniform(-5, 5, size=(50, P.dim))
    _, r2 = u0(P, None, moment0(P, OrbitPoint(P, P.interior, rho)), boundary_tol=0.0)
    assert np.max(np.abs(r2 - rho)) <= 1e-8


def test_fenchel_young_inequality(cp2):
    rng = np.random.default_rng(11)
    x = rng.dirichlet(np.ones(3), size=30)[:, :2]
    rho = rng.normal(size=(30, 2)) * 3
    val, _ = u0(cp2, None, x)
    ph = phi(cp2, None, rho, order=0)[0]
    assert np.all(val + ph - np.einsum("ij,ij->i", x, rho) >= -1e-12)


@pytest.mark.parametrize("name", ["CP2", "Hirzebruch1"])
def test_canonical_singularity_bounded(name):
    """u0 minus sum of slack*log(slack) stays bounded as the boundary is approached."""
    P = preset(name)
    center = lattice_table(P, P.interior).mean(axis=0)
    out = []
    for eps in (1e-3, 1e-6):
        verts = np.array([[float(c) for c in v] for v in P.vertices])
        # points on segments from the center towards every vertex and edge midpoint
        targets = np.vstack([verts, 0.5 * (verts + np.roll(verts, 1, axis=0))])
        s = np.linspace(0.0, 1.0, 40) * (1 - eps)
        x = (center + s[:, None, None] * (targets - center)[None]).reshape(-1, P.dim)
        x = x[np.min(P.slacks(x), axis=1) > 1e-9 * 10]
        val, _ = u0(P, None, x)
        canon = entropy(P.slacks(x)).sum(axis=1)
        out.append(np.max(np.abs(val - canon)))
    assert np.all(np.isfinite(out))
    assert abs(out[0] - out[1]) < 1e-2


def test_canonical_part_exact_on_simplex(cp2):
    x = np.array([[0.2, 0.3], [0.01, 0.9], [0.4, 0.4]])
    val, _ = u0(cp2, None, x)
    assert np.allclose(val, entropy(cp2.slacks(x)).sum(axis=1), atol=1e-12)


@given(st.lists(st.floats(-4, 4), min_size=2, max_size=2))
def test_phi_derivatives_match_finite_differences(r):
    P = preset("Hirzebruch1")
    rho = np.array(r)
    v, g, H = phi(P, None, rho)
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        vp, gp, _ = phi(P, None, rho + e)
        vm, gm, _ = phi(P, None, rho - e)
        assert (vp - vm) / (2 * h) == pytest.approx(g[i], rel=1e-6, abs=1e-9)
        assert np.allclose((gp - gm) / (2 * h), H[:, i], rtol=1e-6, atol=1e-9)
    assert np.all(np.linalg.eigvalsh(H) > 0)
    pts = lattice_table(P, P.interior)
    assert np.all(v >= pts @ rho - 1e-12)


@given(st.floats(-6, 6), st.floats(-6, 6))
def test_legendre_newton_converges(a, b):
    P = preset("CP2")
    x = moment0(P, OrbitPoint.open(P, [a, b]))
    val, r = legendre(lattice_table(P, P.interior), x[None])
    assert np.allclose(r[0], [a, b], atol=1e-7)
