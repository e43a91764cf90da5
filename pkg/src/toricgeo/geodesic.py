"""The limit ray ``psi_t = L(u_F + t f) - phi_F``, its moment map and regularity.

``psi_t`` carries no ``t R`` term; :func:`with_cap` adds it back.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plconvex import PLConvexFunction
from .polytope import DelzantPolytope
from .potentials import (
    OrbitPoint,
    Region,
    _phi_rows,
    conjugate_plus_pl,
    lattice_table,
    u0,
)

__all__ = [
    "GeodesicSolution",
    "psi_t",
    "psi_t_sup",
    "mu_t",
    "psi_dot",
    "with_cap",
    "RegularityReport",
    "regularity_probe",
]


@dataclass(frozen=True)
class GeodesicSolution:
    """``psi_t``, ``mu_t`` and the region tag at one or several orbit points.

    For a batched point ``psi`` has shape ``(n,)``, ``mu`` shape ``(n, m)`` and
    ``regions`` has ``n`` entries; otherwise scalars and a single tag.
    """

    t: float
    point: OrbitPoint
    psi: np.ndarray | float
    mu: np.ndarray
    region: Region | list[Region]
    residual: np.ndarray | float


def _phi_on(P: DelzantPolytope, point: OrbitPoint) -> np.ndarray:
    rows = point.rows()
    if point.face.dim == 0:
        return np.zeros(len(rows))
    return _phi_rows(lattice_table(P, point.face), rows, order=0)[0]


def psi_t(P: DelzantPolytope, f: PLConvexFunction, t: float, point: OrbitPoint) -> GeodesicSolution:
    """Solve for ``psi_t`` and ``mu_t`` at ``point``.

    Chamber values come straight from ``phi_F(rho - t nu_j) - t v_j - phi_F(rho)``;
    corner values from the dual problem in :func:`conjugate_plus_pl`.  At a
    vertex ``v`` the answer is ``-t f(v)``.
    """
    res = conjugate_plus_pl(P, f, t, point.face, point.rows())
    psi = res.value - _phi_on(P, point)
    if point.batched:
        return GeodesicSolution(t, point, psi, res.x, res.regions, res.residual)
    return GeodesicSolution(t, point, float(psi[0]), res.x[0], res.regions[0], float(res.residual[0]))


def psi_t_sup(P: DelzantPolytope, f: PLConvexFunction, t: float, point: OrbitPoint, x=None):
    """``<x, rho> - u_F(x) - t f(x) - phi_F(rho)`` evaluated at ``x`` (default ``mu_t``).

    Uses the Newton Legendre transform for ``u_F``; this is the sup-based
    value of ``psi_t`` and an independent check on :func:`psi_t`.
    """
    if x is None:
        x = psi_t(P, f, t, point).mu
    x = np.asarray(x, dtype=float).reshape(-1, P.dim)
    rows = point.rows()
    face = point.face
    if face.dim == 0:
        val = -t * f(x)
    else:
        uval, _ = u0(P, face, x, boundary_tol=0.0)
        c = P.local_coords(face, x)
        val = np.einsum("ij,ij->i", c, rows) - uval - t * f(x) - _phi_on(P, point)
    val = np.asarray(val, dtype=float).reshape(-1)
    return val if point.batched else float(val[0])


def mu_t(P: DelzantPolytope, f: PLConvexFunction, t: float, point: OrbitPoint):
    """Moment map of the ray and the region tag (with ``xi`` at corners)."""
    sol = psi_t(P, f, t, point)
    return sol.mu, sol.region


def psi_dot(P: DelzantPolytope, f: PLConvexFunction, t: float, point: OrbitPoint):
    """``d/dt psi_t = -f(mu_t)``."""
    mu, _ = mu_t(P, f, t, point)
    val = -np.asarray(f(mu.reshape(-1, P.dim)), dtype=float)
    return val if point.batched else float(val[0])


def with_cap(psi, f: PLConvexFunction, t: float):
    """The same ray written as ``sup[t (R - f) - I^z]``, i.e. ``psi + t R``."""
    return psi + t * f.R


# -- regularity ---------------------------------------------------------------


@dataclass
class RegularityReport:
    """Finite-difference witnesses of ``C^{1,1}`` regularity and degeneracy.

    Attributes
    ----------
    max_second_difference : float
        Largest ``|second difference|`` of ``psi_t`` over the grid.
    max_second_difference_total : float
        The same for ``psi_t + phi``.
    jumps : list of (location, size)
        Jumps of the one-sided second differences of ``psi_t + phi`` at
        region-tag boundaries (1-D grids only).
    regions : ndarray of str
        Region label at every grid point.
    det_hessian : ndarray
        ``det`` of the finite-difference Hessian of ``psi_t + phi`` at interior
        grid points (NaN on the border).
    corner_cells : ndarray of bool
        Cells whose whole stencil lies in a corner region.
    max_det_corner, min_det_far : float
        ``max det`` over corner cells, ``min det`` over non-corner cells at
        distance at least ``far`` from every corner cell.
    lipschitz_mu : float
        Empirical Lipschitz constant of ``mu_t`` between grid neighbours.
    band : list of (lo, hi) per axis
        Coordinate range of the corner cells.
    """

    t: float
    grid: tuple[np.ndarray, ...]
    psi: np.ndarray
    total: np.ndarray
    mu: np.ndarray
    regions: np.ndarray
    max_second_difference: float
    max_second_difference_total: float
    jumps: list[tuple[float, float]]
    det_hessian: np.ndarray
    corner_cells: np.ndarray
    max_det_corner: float
    min_det_far: float
    lipschitz_mu: float
    band: list[tuple[float, float]] = field(default_factory=list)


def _second_differences(g: np.ndarray, axes) -> tuple[np.ndarray, list[np.ndarray]]:
    """Central finite-difference Hessian on a uniform grid (NaN on borders)."""
    dim = g.ndim
    hs = [ax[1] - ax[0] for ax in axes]
    H = np.full(g.shape + (dim, dim), np.nan)
    inner = tuple(slice(1, -1) for _ in range(dim))

    def shifted(offsets):
        sl = tuple(slice(1 + o, g.shape[i] - 1 + o) for i, o in enumerate(offsets))
        return g[sl]

    for i in range(dim):
        e = [0] * dim
        e[i] = 1
        plus = shifted(e)
        minus = shifted([-c for c in e])
        H[inner + (i, i)] = (plus - 2 * g[inner] + minus) / hs[i] ** 2
        for j in range(i + 1, dim):
            a = [0] * dim
            a[i], a[j] = 1, 1
            b = [0] * dim
            b[i], b[j] = 1, -1
            pp, mm = shifted(a), shifted([-c for c in a])
            pm, mp = shifted(b), shifted([-c for c in b])
            H[inner + (i, j)] = H[inner + (j, i)] = (pp - pm - mp + mm) / (4 * hs[i] * hs[j])
    return H, hs


def regularity_probe(
    P: DelzantPolytope,
    f: PLConvexFunction,
    t: float,
    grid,
    far: float = 0.5,
    jump_tol: float = 1e-3,
) -> RegularityReport:
    """Probe ``psi_t`` on a uniform open-orbit grid.

    Parameters
    ----------
    grid : ndarray or sequence of ndarrays
        One uniform axis per dimension (``P.dim`` of them).
    far : float
        Distance from the corner region beyond which the determinant is
        expected to stay away from zero.
    jump_tol : float
        One-sided second differences closer than this count as continuous.
    """
    axes = (np.asarray(grid, dtype=float),) if P.dim == 1 and np.ndim(grid[0]) == 0 else tuple(
        np.asarray(a, dtype=float) for a in grid
    )
    if len(axes) != P.dim:
        raise ValueError("grid needs one axis per dimension")
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    shape = mesh.shape[:-1]
    rows = mesh.reshape(-1, P.dim)
    point = OrbitPoint(P, P.interior, rows)
    sol = psi_t(P, f, t, point)
    psi = np.asarray(sol.psi).reshape(shape)
    phi_vals = _phi_rows(lattice_table(P, P.interior), rows, order=0)[0].reshape(shape)
    total = psi + phi_vals
    mu = sol.mu.reshape(shape + (P.dim,))
    labels = np.array([r.label for r in sol.region], dtype=object).reshape(shape)
    kinds = np.array([r.kind for r in sol.region], dtype=object).reshape(shape)

    H_psi, hs = _second_differences(psi, axes)
    H_tot, _ = _second_differences(total, axes)
    max_sd = float(np.nanmax(np.abs(H_psi)))
    max_sd_tot = float(np.nanmax(np.abs(H_tot)))
    det = np.linalg.det(np.nan_to_num(H_tot))
    border = np.isnan(H_tot[..., 0, 0])
    det[border] = np.nan

    # corner cells: the full 3^m stencil is corner-tagged
    is_corner = kinds == "corner"
    corner_cells = np.zeros(shape, dtype=bool)
    inner = tuple(slice(1, -1) for _ in range(P.dim))
    acc = np.ones(tuple(s - 2 for s in shape), dtype=bool)
    for offs in np.ndindex(*(3,) * P.dim):
        sl = tuple(slice(o, shape[i] - 2 + o) for i, o in enumerate(offs))
        acc &= is_corner[sl]
    corner_cells[inner] = acc

    if corner_cells.any():
        max_det_corner = float(np.nanmax(np.abs(det[corner_cells])))
        cpts = mesh[corner_cells]
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(cpts).query(mesh.reshape(-1, P.dim))
        far_mask = (dist.reshape(shape) >= far) & ~border & ~is_corner
    else:
        max_det_corner = float("nan")
        far_mask = ~border
    min_det_far = float(np.nanmin(det[far_mask])) if far_mask.any() else float("nan")

    jumps: list[tuple[float, float]] = []
    if P.dim == 1:
        ax, h = axes[0], hs[0]
        g = total
        for i in range(2, len(ax) - 3):
            if labels[i] != labels[i + 1]:
                left = (g[i] - 2 * g[i - 1] + g[i - 2]) / h**2
                right = (g[i + 3] - 2 * g[i + 2] + g[i + 1]) / h**2
                if abs(right - left) > jump_tol:
                    jumps.append((0.5 * (ax[i] + ax[i + 1]), float(right - left)))

    lips = 0.0
    for i in range(P.dim):
        dmu = np.diff(mu, axis=i)
        lips = max(lips, float(np.max(np.linalg.norm(dmu, axis=-1)) / hs[i]))

    band = []
    if corner_cells.any():
        cpts = mesh[corner_cells]
        band = [(float(cpts[:, i].min()), float(cpts[:, i].max())) for i in range(P.dim)]

    return RegularityReport(
        t=t,
        grid=axes,
        psi=psi,
        total=total,
        mu=mu,
        regions=labels,
        max_second_difference=max_sd,
        max_second_difference_total=max_sd_tot,
        jumps=jumps,
        det_hessian=det,
        corner_cells=corner_cells,
        max_det_corner=max_det_corner,
        min_det_far=min_det_far,
        lipschitz_mu=lips,
        band=band,
    )
