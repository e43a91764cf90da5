import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toricgeo import (
    INFINITE,
    OrbitPoint,
    RateFunction,
    conjugate_check,
    grad_log_mgf,
    is_infinite,
    ldp_bounds,
    log_mgf,
    moment0,
    mu_t,
    norming_constants,
    preset,
    rate,
    tilted_rate,
    u0,
    varadhan_check,
)


def square_grid(n=21):
    ax = np.linspace(0, 1, n)
    return np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)


def test_interval_rate_closed_form(cp1):
    z = OrbitPoint.open(cp1, [0.8])
    x = np.linspace(0, 1, 11)[:, None]
    a = 1 / (1 + np.exp(-0.8))
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = np.nan_to_num(x * np.log(x / a)) + np.nan_to_num((1 - x) * np.log((1 - x) / (1 - a)))
    assert np.allclose(np.asarray(rate(z, x)), kl[:, 0], atol=1e-11)


def test_rate_nonnegative_with_zero_at_moment(square):
    z = OrbitPoint.open(square, [0.4, -1.3])
    grid = square_grid()
    vals = np.asarray(rate(z, grid))
    assert vals.min() >= -1e-12
    mu = moment0(square, z)
    assert rate(z, mu) <= 1e-10
    h = 1 / 20
    assert np.max(np.abs(grid[np.argmin(vals)] - mu)) <= h


def test_rate_infinite_off_face(square):
    F = square.face([0])  # x1 = 0
    z = OrbitPoint(square, F, np.array([0.2]))
    assert rate(z, np.array([0.3, 0.5])) is INFINITE
    assert is_infinite(rate(z, np.array([2.0, 0.5])))
    batch = rate(z, np.array([[0.0, 0.5], [0.5, 0.5]]))
    assert batch.mask.tolist() == [False, True]
    v = OrbitPoint.at_vertex(square, 0)
    assert rate(v, np.zeros(2)) == 0.0
    assert rate(v, np.array([0.0, 0.1])) is INFINITE


def test_infinite_singleton():
    assert INFINITE > 1e300 and float(INFINITE) == np.inf
    assert not INFINITE < 5.0
    with pytest.raises(TypeError):
        INFINITE + 1.0


def test_log_mgf_examples(cp1, square):
    z = OrbitPoint.open(cp1, [0.0])
    assert log_mgf(z, [1.0]) == pytest.approx(np.log1p(np.e) - np.log(2), abs=1e-15)
    Q = norming_constants(cp1, 8)
    assert log_mgf(z, [0.0]) == 0.0 and abs(log_mgf(z, [0.0], Q)) < 1e-15
    vz = OrbitPoint.at_vertex(square, 1)
    assert log_mgf(vz, np.zeros(0)) == 0.0


def test_log_mgf_gradient(hirzebruch):
    z = OrbitPoint.open(hirzebruch, [0.3, -0.4])
    tau = np.array([0.5, 0.7])
    g = grad_log_mgf(z, tau)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (log_mgf(z, tau + e) - log_mgf(z, tau - e)) / (2 * h)
        assert fd == pytest.approx(g[i], abs=1e-6)
    assert np.allclose(g, moment0(hirzebruch, OrbitPoint.open(hirzebruch, z.rho + tau)), atol=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_midpoint_convexity(vals):
    P = preset("Hirzebruch1")
    z = OrbitPoint.open(P, vals[:2])
    a, b = np.array(vals[2:4]), np.array(vals[4:6])
    assert log_mgf(z, (a + b) / 2) <= (log_mgf(z, a) + log_mgf(z, b)) / 2 + 1e-10
    x = np.array([0.4, 0.3]) + 0.1 * np.tanh(a)
    y = np.array([0.9, 0.1]) + 0.05 * np.tanh(b)
    assert rate(z, (x + y) / 2) <= (rate(z, x) + rate(z, y)) / 2 + 1e-10


def test_conjugate_check(cp2):
    rng = np.random.default_rng(1)
    for _ in range(10):
        z = OrbitPoint.open(cp2, rng.uniform(-3, 3, 2))
        x = rng.dirichlet(np.ones(3))[:2]
        res, tau = conjugate_check(z, x)
        assert res <= 1e-8
        assert np.allclose(tau, u0(cp2, None, x)[1] - z.rho, atol=1e-8)


def test_tilted_rate_zero_at_mu_t(square, f_ramp):
    z = OrbitPoint.open(square, [0.5, 0.2])
    t = 1.0
    grid = square_grid(41)
    vals = np.asarray(tilted_rate(z, f_ramp, t, grid))
    assert vals.min() >= -1e-10
    mu, _ = mu_t(square, f_ramp, t, z)
    assert abs(tilted_rate(z, f_ramp, t, mu)) <= 1e-10
    assert np.max(np.abs(grid[np.argmin(vals)] - mu)) <= 1 / 40
    rf = RateFunction(z)
    assert rf(mu) == pytest.approx(float(rate(z, mu)))


def test_ldp_bounds_gap_shrinks(cp1):
    z = OrbitPoint.open(cp1, [0.0])
    tables = [norming_constants(cp1, N) for N in (8, 16, 32, 64, 128)]
    rep = ldp_bounds(z, [([0.7], [1.0])], tables, x0=[0.75], eps=0.05)
    gap = np.abs(rep.values("gap"))
    assert all(a > b for a, b in zip(gap, gap[1:]))
    inf_rate = rep.values("inf_rate")[0]
    a = 0.7
    assert inf_rate == pytest.approx(a * np.log(2 * a) + (1 - a) * np.log(2 * (1 - a)), abs=1e-10)
    # upper bound: log mass stays below -inf I up to the polynomial prefactor
    assert np.all(rep.values("log_mass") <= -inf_rate + np.log(129) / np.array([8, 16, 32, 64, 128]))
    lower = rep.values("sublevel_log_mass") - rep.values("sublevel_bound")
    assert lower[-1] >= 0


def test_ldp_bounds_empty_intersection(cp1):
    z = OrbitPoint.open(cp1, [0.0])
    Q = norming_constants(cp1, 4)
    rep = ldp_bounds(z, [([0.3], [0.45])], [Q])  # no atom k/4 in the box
    assert rep.values("log_mass")[0] == -np.inf
    assert rep.notes and "EmptyIntersection" in rep.notes[0]


def test_varadhan_check(square, f_ramp):
    z = OrbitPoint.open(square, [0.8, 0.1])
    tables = [norming_constants(square, N) for N in (16, 32, 64)]
    rep = varadhan_check(z, f_ramp, 1.0, tables)
    for q in ("delta", "bary_error"):
        vals = rep.values(q)
        assert all(a > b for a, b in zip(vals, vals[1:]))
    assert rep.values("argmin_error")[-1] <= 1 / 64 * 2
