import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import golden_mu, golden_total
from toricgeo import (
    OrbitPoint,
    PLConvexFunction,
    moment0,
    mu_t,
    phi,
    preset,
    psi_dot,
    psi_t,
    psi_t_sup,
    regularity_probe,
    u0,
    with_cap,
)


def open_rows(P, rows):
    return OrbitPoint(P, P.interior, np.asarray(rows, dtype=float))


def test_mu_examples(cp1, f_abs):
    mu, reg = mu_t(cp1, f_abs, 1.0, OrbitPoint.open(cp1, [0.5]))
    assert mu[0] == pytest.approx(0.5, abs=1e-12) and reg.kind == "corner"
    mu, reg = mu_t(cp1, f_abs, 1.0, OrbitPoint.open(cp1, [2.0]))
    assert mu[0] == pytest.approx(np.e / (1 + np.e), abs=1e-14)
    rows = np.linspace(-5, 5, 21)[:, None]
    mu, _ = mu_t(cp1, f_abs, 0.0, open_rows(cp1, rows))
    assert np.array_equal(mu, moment0(cp1, open_rows(cp1, rows)))


def test_psi_dot_examples(cp1, f_abs):
    assert psi_dot(cp1, f_abs, 1.0, OrbitPoint.open(cp1, [0.0])) == pytest.approx(0.0, abs=1e-12)
    expected = -(np.e**2 / (1 + np.e**2) - 0.5)
    assert psi_dot(cp1, f_abs, 1.0, OrbitPoint.open(cp1, [3.0])) == pytest.approx(expected, abs=1e-12)
    # by finite differences in t
    z = OrbitPoint.open(cp1, [3.0])
    h = 1e-5
    fd = (psi_t(cp1, f_abs, 1 + h, z).psi - psi_t(cp1, f_abs, 1 - h, z).psi) / (2 * h)
    assert fd == pytest.approx(expected, abs=1e-8)


def test_golden_interval(cp1, f_abs):
    r = np.linspace(-6, 6, 241)
    for t in (0.5, 1.0, 2.0):
        sol = psi_t(cp1, f_abs, t, open_rows(cp1, r[:, None]))
        total = sol.psi + np.logaddexp(0.0, r)
        assert np.max(np.abs(total - golden_total(r, t))) <= 1e-8
        assert np.max(np.abs(sol.mu[:, 0] - golden_mu(r, t))) <= 1e-8


def test_vertex_value(square, f_ramp):
    for i, v in enumerate(square.vertices):
        sol = psi_t(square, f_ramp, 1.7, OrbitPoint.at_vertex(square, i))
        assert sol.psi == pytest.approx(-1.7 * float(f_ramp.exact(v)))


def test_with_cap(cp1, f_abs):
    sol = psi_t(cp1, f_abs, 2.0, OrbitPoint.open(cp1, [0.3]))
    assert with_cap(sol.psi, f_abs, 2.0) == pytest.approx(sol.psi + 2.0)


def test_facet_matches_interval_problem(square, f_ramp, cp1):
    F = square.face([1])  # x2 = 0, coordinate x1
    g = PLConvexFunction(cp1, [((0,), 0), ((1,), "-1/2")])
    r = np.linspace(-4, 4, 33)[:, None]
    a = psi_t(square, f_ramp, 1.2, OrbitPoint(square, F, r))
    b = psi_t(cp1, g, 1.2, open_rows(cp1, r))
    assert np.allclose(a.psi, b.psi, atol=1e-12)
    assert np.allclose(a.mu[:, 0], b.mu[:, 0], atol=1e-12)
    assert np.allclose(a.mu[:, 1], 0.0)
    assert all(reg.face == F.label for reg in a.region)


@pytest.mark.parametrize("name", ["CP1xCP1", "CP2", "Hirzebruch1"])
def test_sup_formula_agrees_in_chambers(name):
    P = preset(name)
    f = PLConvexFunction(P, [((0,) * P.dim, 0), ((1,) + (0,) * (P.dim - 1), "-1/2"), ((0,) * (P.dim - 1) + (1,), "-1/3")])
    rows = np.random.default_rng(5).uniform(-4, 4, size=(80, P.dim))
    sol = psi_t(P, f, 1.0, open_rows(P, rows))
    chamber = np.array([reg.kind == "chamber" for reg in sol.region])
    assert chamber.any() and (~chamber).any()
    alt = psi_t_sup(P, f, 1.0, open_rows(P, rows))
    assert np.max(np.abs(alt - sol.psi)[chamber]) <= 1e-9
    # at corners the sup formula at the returned maximizer is still correct
    assert np.max(np.abs(alt - sol.psi)) <= 1e-8


def test_gradient_identity_and_envelope(square, f_ramp):
    rng = np.random.default_rng(9)
    rows = rng.uniform(-3, 3, size=(40, 2))
    t = 0.8
    h = 1e-5
    sol = psi_t(square, f_ramp, t, open_rows(square, rows))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h

        def total(r):
            return psi_t(square, f_ramp, t, open_rows(square, r)).psi + phi(square, None, r, order=0)[0]

        fd = (total(rows + e) - total(rows - e)) / (2 * h)
        assert np.max(np.abs(fd - sol.mu[:, i])) <= 1e-6
    plus = psi_t(square, f_ramp, t + h, open_rows(square, rows)).psi
    minus = psi_t(square, f_ramp, t - h, open_rows(square, rows)).psi
    assert np.max(np.abs((plus - minus) / (2 * h) + f_ramp(sol.mu))) <= 1e-6


def test_corner_fibres_are_constant(square, f_ramp):
    x0 = np.array([0.5, 0.3])
    _, base = u0(square, None, x0)
    t = 1.5
    nu0, nu1 = f_ramp.nu_array
    s = np.linspace(0.02, 0.98, 25)
    rows = base + t * (nu0 + s[:, None] * (nu1 - nu0))
    mu, _ = mu_t(square, f_ramp, t, open_rows(square, rows))
    assert np.max(np.abs(mu - x0)) <= 1e-9


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0, 3))
def test_moment_map_is_monotone(r, t):
    P = preset("Hirzebruch1")
    f = PLConvexFunction(P, [((0, 0), 0), ((1, 0), "-1/2"), ((0, 1), "-1/2")])
    rows = np.array([r[:2], r[2:]])
    mu, _ = mu_t(P, f, t, open_rows(P, rows))
    assert (mu[0] - mu[1]) @ (rows[0] - rows[1]) >= -1e-10


def test_regularity_interval(cp1, f_abs):
    grid = np.arange(-6, 6 + 1e-9, 1e-3)
    rep = regularity_probe(cp1, f_abs, 1.0, grid)
    assert rep.max_second_difference_total <= 0.26
    assert rep.max_second_difference <= 0.26
    locs = sorted(round(a, 2) for a, _ in rep.jumps)
    assert locs == [-1.0, 1.0]
    assert all(abs(abs(size) - 0.25) <= 0.01 for _, size in rep.jumps)
    assert rep.max_det_corner <= 1e-6 and rep.min_det_far >= 1e-3
    assert rep.band[0][0] == pytest.approx(-1, abs=0.01) and rep.band[0][1] == pytest.approx(1, abs=0.01)
    assert rep.lipschitz_mu <= 0.25 + 1e-3


def test_regularity_at_time_zero_is_smooth(cp1, f_abs):
    rep = regularity_probe(cp1, f_abs, 0.0, np.linspace(-4, 4, 801))
    assert rep.jumps == [] and not rep.corner_cells.any()
    assert rep.max_second_difference < 1e-9


def test_regularity_square_band(square, f_ramp):
    ax = np.linspace(-3, 3, 61)
    rep = regularity_probe(square, f_ramp, 1.0, (ax, ax))
    assert rep.corner_cells.any()
    lo, hi = rep.band[0]
    h = ax[1] - ax[0]
    # the lifted corner set is 0 < rho_1 < t for every rho_2
    assert -h - 1e-9 <= lo <= h + 1e-9 and 1 - h - 1e-9 <= hi <= 1 + h + 1e-9
    assert rep.band[1][0] <= -2.8 and rep.band[1][1] >= 2.8
    assert rep.max_det_corner <= 1e-6
    assert rep.min_det_far > 0


