"""Gauss-Legendre rules on intervals, boxes and simplices."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@lru_cache(maxsize=64)
def gauss_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``n``-point Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def box_rule(lo, hi, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product rule on ``prod [lo_i, hi_i]``; returns nodes and log-weights."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    t, w = gauss_unit(n)
    axes = [lo[i] + (hi[i] - lo[i]) * t for i in range(len(lo))]
    wts = [np.log(w * (hi[i] - lo[i])) for i in range(len(lo))]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    logw = sum(np.meshgrid(*wts, indexing="ij")).reshape(-1)
    return nodes, logw


def simplex_rule(vertices, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed-coordinate (Duffy) rule on a simplex.

    With ``y_i = u_1 u_2 ... u_i`` the map ``x = v_0 + sum_i y_i (v_i - v_{i-1})``
    sends the unit cube onto the simplex with Jacobian
    ``|det| prod_i u_i^{m-i}``, which keeps analytic integrands analytic.
    """
    V = np.asarray(vertices, dtype=float)
    m = V.shape[1]
    edges = V[1:] - V[:-1]
    det = abs(np.linalg.det(edges)) if m else 1.0
    u, logw = box_rule(np.zeros(m), np.ones(m), n)
    y = np.cumprod(u, axis=1)
    x = V[0] + y @ edges
    powers = np.arange(m - 1, -1, -1)
    logw = logw + np.log(det) + np.sum(powers * np.log(u), axis=1)
    return x, logw
