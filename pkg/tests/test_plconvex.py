from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as spi

from toricgeo import (
    PLConvexFunction,
    eval_f,
    futaki,
    integrate,
    pl_from_config,
    preset,
    subdifferential,
    weights,
)


def test_eval_examples(f_abs):
    assert eval_f(f_abs, [0.0]) == (0.5, frozenset({0}))
    assert eval_f(f_abs, [0.5]) == (0.0, frozenset({0, 1}))
    val, act = eval_f(f_abs, [0.75])
    assert act == frozenset({1}) and val == pytest.approx(0.25, abs=1e-15)


def test_denominator_and_cap(f_abs, f_ramp):
    assert f_abs.d == 2 and f_abs.R == 1
    assert f_ramp.d == 2 and f_ramp.R == 1
    with pytest.raises(ValueError):
        PLConvexFunction(f_abs.polytope, f_abs_pieces(), R=0)


def f_abs_pieces():
    return [((-1,), "1/2"), ((1,), "-1/2")]


def test_subdifferential_examples(f_abs, f_ramp):
    seg = subdifferential(f_abs, [0.5])
    assert sorted(seg.ravel().tolist()) == [-1.0, 1.0]
    assert subdifferential(f_abs, [0.2]).tolist() == [[-1.0]]
    seg2 = subdifferential(f_ramp, [0.5, 0.3])
    assert sorted(map(tuple, seg2.tolist())) == [(0.0, 0.0), (1.0, 0.0)]


def test_redundant_piece_pruned(cp1):
    f = PLConvexFunction(cp1, [((1,), 0), ((0,), -5), ((1,), 0)])
    assert f.n_pieces == 1
    assert f.kept == (0,)
    assert f.labels == ((0, 2),)


def test_weights_cp1_example(f_abs):
    table = weights(f_abs, 1)
    assert table.level == 2
    assert table.eta == (1, 2, 1)
    assert table.lam == (Fraction(-1, 3), Fraction(2, 3), Fraction(-1, 3))
    assert all(isinstance(v, Fraction) for v in table.lam)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_weights_invariants(f_ramp, k):
    table = weights(f_ramp, k)
    assert min(table.eta) >= 0
    assert sum(table.lam) == 0


def test_futaki_cp1(f_abs):
    # oracle: exact 1-D integrals and the two-point boundary measure
    x = sp.symbols("x")
    interior = sp.integrate(sp.Rational(1, 2) - x, (x, 0, sp.Rational(1, 2))) + sp.integrate(
        x - sp.Rational(1, 2), (x, sp.Rational(1, 2), 1)
    )
    boundary = sp.Rational(1, 2) + sp.Rational(1, 2)
    expected = -(boundary - 2 * interior) / 2
    assert futaki(f_abs) == Fraction(int(expected.p), int(expected.q)) == Fraction(-1, 4)


@pytest.mark.parametrize("name", ["CP1", "CP2", "CP1xCP1", "Hirzebruch1"])
def test_futaki_constant_vanishes(name):
    P = preset(name)
    f = PLConvexFunction(P, [((0,) * P.dim, "3/7")])
    assert futaki(f) == 0


def test_futaki_square_linear_and_ramp(square, f_ramp):
    x1, x2 = sp.symbols("x1 x2")
    g = x1
    interior = sp.integrate(g, (x1, 0, 1), (x2, 0, 1))
    boundary = sum(
        [
            sp.integrate(g.subs(x1, 0), (x2, 0, 1)),
            sp.integrate(g.subs(x1, 1), (x2, 0, 1)),
            sp.integrate(g.subs(x2, 0), (x1, 0, 1)),
            sp.integrate(g.subs(x2, 1), (x1, 0, 1)),
        ]
    )
    expected = -(boundary - 4 * interior) / 2
    f = PLConvexFunction(square, [((1, 0), 0)])
    assert futaki(f) == Fraction(int(expected.p), int(expected.q))

    ramp = sp.Max(0, x1 - sp.Rational(1, 2))
    interior = sp.integrate(x1 - sp.Rational(1, 2), (x1, sp.Rational(1, 2), 1))
    boundary = sp.Rational(1, 2) + 2 * interior  # facet x1 = 1 plus the two horizontal facets
    assert ramp.subs(x1, 1) == sp.Rational(1, 2)
    expected = -(boundary - 4 * interior) / 2
    assert futaki(f_ramp) == Fraction(int(expected.p), int(expected.q)) == Fraction(-1, 8)


def test_futaki_hirzebruch_against_quadrature(hirzebruch):
    f = PLConvexFunction(hirzebruch, [((1, 0), 0), ((0, 1), 0)])
    # split along the diagonal so each part is smooth
    interior, _ = spi.dblquad(lambda x, y: y, 0, 1, 0, lambda y: y, epsabs=1e-14)
    part, _ = spi.dblquad(lambda x, y: x, 0, 1, lambda y: y, lambda y: 2 - y, epsabs=1e-14)
    interior += part
    # facets x=0, y=0, y=1, x+y=2 with lattice length measure
    boundary = 0.5 + 2.0 + 1.0 + 1.5
    vol, bvol = 1.5, 5.0
    expected = -(boundary - bvol / vol * interior) / (2 * vol)
    assert float(futaki(f)) == pytest.approx(expected, abs=1e-10)
    assert integrate(f) == pytest.approx(interior, abs=1e-12)


def test_chambers_partition(f_ramp, hirzebruch):
    assert sum(c.volume for c in f_ramp.chambers) == f_ramp.polytope.volume
    g = PLConvexFunction(hirzebruch, [((1, 0), 0), ((0, 1), 0), ((-1, 0), "1/2")])
    assert sum(c.volume for c in g.chambers) == hirzebruch.volume


def test_corner_sets(f_abs, f_ramp, cp2):
    assert f_abs.corner_sets == [(0, 1)]
    assert f_ramp.corner_sets == [(0, 1)]
    g = PLConvexFunction(cp2, [((0, 0), 0), ((1, 0), "-1/4"), ((0, 1), "-1/4")])
    assert set(g.corner_sets) == {(0, 1), (0, 2), (1, 2), (0, 1, 2)}


def test_from_config_input_coordinates():
    from toricgeo import validate

    Q = validate([((1,), 2), ((-1,), -5)])  # [2, 5] normalized to [0, 3]
    f = pl_from_config(Q, {"pieces": [{"nu": [1], "v": "-2"}]})
    # f(x) = x - 2 in the original coordinates, i.e. y in the normalized ones
    assert f.exact([Fraction(1)]) == 1


# -- properties -----------------------------------------------------------

slopes = st.lists(
    st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.fractions(-2, 2, max_denominator=4)),
    min_size=1,
    max_size=4,
)


@given(slopes, st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_convexity_and_subgradients(pieces, coords):
    P = preset("CP1xCP1")
    f = PLConvexFunction(P, [((a, b), v) for a, b, v in pieces])
    x = np.array(coords[:2])
    y = np.array(coords[2:4])
    s = coords[4]
    assert f(s * x + (1 - s) * y) <= s * f(x) + (1 - s) * f(y) + 1e-12
    grid = np.stack(np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 7)), -1).reshape(-1, 2)
    for xi in subdifferential(f, x):
        assert np.all(f(grid) - f(x) >= grid @ xi - x @ xi - 1e-10)
    assert f.R >= f.max_on_polytope
    assert all(int(f.d * c) == f.d * c for nu in f.nus for c in nu)
    assert sum(c.volume for c in f.chambers) == 1


@given(slopes, st.integers(1, 3))
def test_weight_properties(pieces, k):
    P = preset("CP1xCP1")
    f = PLConvexFunction(P, [((a, b), v) for a, b, v in pieces])
    table = weights(f, k)
    assert min(table.eta) >= 0
    assert sum(table.lam) == 0
    assert all(e.denominator == 1 for e in table.eta)
