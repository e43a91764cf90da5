"""The canonical lattice-sum potential, its moment map and Legendre transforms.

For a stratum (the open orbit, a face, or a vertex) with lattice points
``c_alpha`` written in the stratum's own coordinates,

    phi_F(rho) = log sum_alpha exp(<c_alpha, rho>),

``mu_0 = grad phi_F`` and ``u_F`` is the Legendre transform of ``phi_F``.
Everything here is vectorized over a leading batch axis of ``rho``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import logsumexp

from . import _newton
from ._newton import NoConvergence
from .plconvex import TOL_ACTIVE, PLConvexFunction
from .polytope import DelzantPolytope, Face, OutsidePolytope

__all__ = [
    "BoundaryPoint",
    "NoConvergence",
    "NoRegionAccepted",
    "BOUNDARY_TOL",
    "OrbitPoint",
    "Region",
    "ConjugateResult",
    "lattice_table",
    "phi",
    "moment0",
    "u0",
    "legendre",
    "orbit_point_at",
    "conjugate_u0",
    "conjugate_plus_pl",
    "restricted",
]

BOUNDARY_TOL = 1e-9


class BoundaryPoint(ValueError):
    """The point lies on a lower-dimensional stratum than the one requested."""


class NoRegionAccepted(RuntimeError):
    """No chamber or corner candidate passed the optimality test."""


def _resolve(P: DelzantPolytope, stratum) -> Face:
    if stratum is None:
        return P.interior
    if isinstance(stratum, Face):
        return stratum
    return P.face(stratum)


@dataclass(frozen=True, eq=False)
class OrbitPoint:
    """A torus-invariant point: a stratum plus coordinates ``rho`` on it.

    ``rho`` has shape ``(face.dim,)``, or ``(n, face.dim)`` for a batch of
    points on the same stratum.  On the open orbit ``rho`` plays the role of
    ``log|z|`` (with ``|z| = e^{rho/2}``); at a vertex it is empty.
    """

    polytope: DelzantPolytope
    face: Face
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.ndim == 0 or rho.shape[-1] != self.face.dim or rho.ndim > 2:
            raise ValueError(
                f"stratum {self.face.label} has dimension {self.face.dim}; got rho of shape {rho.shape}"
            )
        if not np.all(np.isfinite(rho)):
            raise ValueError("orbit coordinates must be finite")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def open(cls, P: DelzantPolytope, rho) -> "OrbitPoint":
        return cls(P, P.interior, np.atleast_1d(np.asarray(rho, dtype=float)))

    @classmethod
    def on_face(cls, P: DelzantPolytope, active: Iterable[int], rho) -> "OrbitPoint":
        face = P.face(active)
        return cls(P, face, np.atleast_1d(np.asarray(rho, dtype=float)))

    @classmethod
    def at_vertex(cls, P: DelzantPolytope, index: int) -> "OrbitPoint":
        return cls(P, P.vertex_face(index), np.zeros(0))

    @property
    def batched(self) -> bool:
        return self.rho.ndim == 2

    def rows(self) -> np.ndarray:
        return _rows(self.rho, self.face.dim)

    def __repr__(self) -> str:
        return f"OrbitPoint({self.face.label}, rho={self.rho.tolist()})"


def _rows(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0] if rho.ndim == 2 else 1
    return rho.reshape(n, dim)


def lattice_table(P: DelzantPolytope, face: Face) -> np.ndarray:
    """Float lattice points of the closed face in its own coordinates."""
    key = ("lattice", face.active)
    cache = P._face_cache
    if key not in cache:
        if not P.is_lattice:
            raise ValueError("the canonical potential needs a lattice polytope (integral vertices)")
        if face.dim == 0:
            pts = np.zeros((1, 0))
        else:
            sub = P.face_polytope(face)
            pts = sub.lattice_points(1).astype(float)
        cache[key] = pts
    return cache[key]


def _phi_rows(points: np.ndarray, rho: np.ndarray, order: int = 2):
    """Value, gradient and Hessian of the log-sum-exp for rows of ``rho``."""
    s = rho @ points.T
    val = logsumexp(s, axis=1)
    if order == 0:
        return val, None, None
    w = np.exp(s - val[:, None])
    grad = w @ points
    if order == 1:
        return val, grad, None
    second = np.einsum("na,ai,aj->nij", w, points, points)
    hess = second - grad[:, :, None] * grad[:, None, :]
    return val, grad, hess


def phi(P: DelzantPolytope, stratum, rho, order: int = 2):
    """``phi_F``, its gradient and Hessian on a stratum.

    Parameters
    ----------
    stratum : Face, iterable of facet indices, or None for the open orbit
    rho : array_like, shape (dim,) or (n, dim)

    Returns
    -------
    value, gradient, hessian
        With the batch axis dropped when ``rho`` is one point.
    """
    face = _resolve(P, stratum)
    rho = np.asarray(rho, dtype=float)
    single = rho.ndim == 1
    rows = _rows(rho, face.dim)
    out = _phi_rows(lattice_table(P, face), rows, order)
    if single:
        return tuple(None if o is None else o[0] for o in out)
    return out


def moment0(P: DelzantPolytope, point: OrbitPoint) -> np.ndarray:
    """``mu_0`` as an ambient point of the closed face of the stratum."""
    face = point.face
    rows = point.rows()
    if face.dim == 0:
        grad = np.zeros((len(rows), 0))
    else:
        _, grad, _ = _phi_rows(lattice_table(P, face), rows, order=1)
    x = face.to_ambient(grad)
    return x if point.batched else x[0]


def legendre(points: np.ndarray, c: np.ndarray, tol: float | None = None):
    """``sup_rho <c, rho> - lse(points @ rho)`` for rows ``c`` in the interior.

    Returns the value and the maximizer ``rho*`` (damped Newton from 0).
    """
    c = np.asarray(c, dtype=float)
    n, d = c.shape
    if d == 0:
        return np.zeros(n), np.zeros((n, 0))

    def oracle(rho, rows):
        val, grad, hess = _phi_rows(points, rho)
        return val - np.einsum("ij,ij->i", c[rows], rho), grad - c[rows], hess

    rho, _ = _newton.minimize(oracle, np.zeros((n, d)), tol=tol)
    val, _, _ = _phi_rows(points, rho, order=0)
    return np.einsum("ij,ij->i", c, rho) - val, rho


def _local_slacks(P: DelzantPolytope, face: Face, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Slacks of the face's own facets and of the facets defining the face."""
    sl = P.slacks(x)
    own = [r for r in range(len(P.normals)) if r not in face.active and (face.active | {r}) in P.faces]
    return sl[:, own], sl[:, sorted(face.active)]


def u0(P: DelzantPolytope, stratum, x, boundary_tol: float = BOUNDARY_TOL):
    """Symplectic potential ``u_F`` at ambient points ``x`` of the stratum.

    Returns
    -------
    value : float or ndarray
    rho_star : ndarray
        ``grad u_F(x)`` in stratum coordinates.

    Raises
    ------
    BoundaryPoint
        If ``x`` is within ``boundary_tol`` of the relative boundary of the face.
    """
    face = _resolve(P, stratum)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x.reshape(-1, P.dim)
    own, defining = _local_slacks(P, face, xs)
    if defining.size and np.abs(defining).max() > max(boundary_tol, BOUNDARY_TOL):
        raise OutsidePolytope(f"point does not lie on the closed face {face.label}")
    if own.size and own.min() <= boundary_tol:
        raise BoundaryPoint(
            f"point within {boundary_tol:g} of the boundary of {face.label}; use a lower stratum"
        )
    c = P.local_coords(face, xs)
    val, rho = legendre(lattice_table(P, face), c)
    return (val[0], rho[0]) if single else (val, rho)


def orbit_point_at(P: DelzantPolytope, x, tol: float = BOUNDARY_TOL) -> OrbitPoint:
    """The orbit point with ``mu_0 = x`` on the lowest stratum containing ``x``."""
    face = P.locate(np.asarray(x, dtype=float), tol=tol)
    if face.dim == 0:
        return OrbitPoint(P, face, np.zeros(0))
    _, rho = u0(P, face, np.asarray(x, dtype=float), boundary_tol=0.0)
    return OrbitPoint(P, face, rho)


def conjugate_u0(P: DelzantPolytope, stratum, rho, tol: float = 1e-11, max_iter: int = 100):
    """``sup_x <x, rho> - u_F(x)`` by Newton iteration in ``x``-space.

    An independent route to the conjugate of ``u_F``: the inner ``u_F`` is the
    Newton Legendre transform, the outer iteration uses its gradient
    ``rho*(x)`` and Hessian ``(hess phi)^{-1}``.
    """
    face = _resolve(P, stratum)
    pts = lattice_table(P, face)
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    out = np.empty(len(rho))
    sub = P if face.is_interior else P.face_polytope(face)
    A = np.array(sub.normals, dtype=float)
    a = np.array([float(o) for o in sub.offsets])
    for i, r in enumerate(rho):
        c = pts.mean(axis=0)

        def objective(cc):
            uval, rstar = legendre(pts, cc[None])
            return float(cc @ r - uval[0]), rstar[0]

        g, rstar = objective(c)
        for _ in range(max_iter):
            resid = r - rstar
            if np.max(np.abs(resid)) <= tol:
                break
            _, _, H = _phi_rows(pts, rstar[None])
            step = H[0] @ resid
            slope = resid @ step
            alpha = 1.0
            while alpha > 1e-12:
                trial = c + alpha * step
                if np.min(A @ trial - a) > 0:
                    gt, rt = objective(trial)
                    if gt >= g + 1e-4 * alpha * slope or np.max(np.abs(resid)) < 1e-7:
                        break
                alpha *= 0.5
            else:
                raise NoConvergence("line search failed in conjugate_u0")
            c, g, rstar = trial, gt, rt
        else:
            raise NoConvergence("conjugate_u0 did not converge")
        out[i] = g
    return out


@dataclass(frozen=True)
class Region:
    """Where the maximizer of ``<x, rho> - u_F(x) - t f(x)`` sits.

    ``kind`` is ``"chamber"`` (one piece active), ``"corner"`` (several
    pieces tie; ``xi`` are the barycentric weights on ``pieces`` with
    ``rho - grad u_F(x*) = t sum xi_j nu_j``) or ``"vertex"``.  Piece indices
    refer to the full function ``f``.  Pieces that coincide on a face share
    one weight, carried by the smallest index of the group.
    """

    kind: str
    pieces: tuple[int, ...]
    xi: tuple[float, ...] | None = None
    face: str = "interior"

    @property
    def label(self) -> str:
        names = "+".join(str(j) for j in self.pieces)
        return f"{self.kind}({names})" if self.face == "interior" else f"{self.kind}({names})@{self.face}"


@dataclass(frozen=True)
class ConjugateResult:
    value: np.ndarray  # L(u_F + t f)(rho)
    x: np.ndarray  # maximizer, ambient coordinates
    regions: list[Region]
    residual: np.ndarray  # optimality violation of the accepted candidate


def restricted(f: PLConvexFunction, face: Face) -> PLConvexFunction:
    cache = f.__dict__.setdefault("_restrict_cache", {})
    if face.active not in cache:
        cache[face.active] = f.restrict(face)
    return cache[face.active]


def _group_region(kind, g: PLConvexFunction, J, xi, face_label) -> Region:
    pieces, weights = [], []
    for pos, j in enumerate(J):
        group = g.labels[j]
        for q, idx in enumerate(group):
            pieces.append(idx)
            if xi is not None:
                weights.append(float(xi[pos]) if q == 0 else 0.0)
    order = np.argsort(pieces, kind="stable")
    pieces = tuple(int(pieces[i]) for i in order)
    w = tuple(weights[i] for i in order) if xi is not None else None
    return Region(kind, pieces, w, face_label)


def conjugate_plus_pl(
    P: DelzantPolytope,
    f: PLConvexFunction,
    t: float,
    stratum,
    rho,
    tol: float = TOL_ACTIVE,
) -> ConjugateResult:
    """``L(u_F + t f)(rho) = sup_x <x, rho> - u_F(x) - t f(x)`` over the face.

    The maximizer lies either strictly inside one chamber ``j``, where it equals
    ``grad phi_F(rho - t nu_j)``, or on a corner cell where several pieces tie;
    the latter is found from the dual problem

        min_eta phi_F(sigma + D^T eta) - <eta, e>,

    ``sigma = rho - t nu_j0``, ``D`` the slope differences ``nu_j - nu_j0`` and
    ``e`` the offset differences ``v_j0 - v_j``, so ``u_F`` is never evaluated.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    face = _resolve(P, stratum)
    rho = np.asarray(rho, dtype=float)
    rows = _rows(rho, face.dim)
    n = len(rows)
    label = face.label

    if face.dim == 0:
        v = np.array([float(c) for c in face.base])
        fv = float(f.exact(face.base))
        vals = f.piece_values(v)
        active = tuple(int(j) for j in np.flatnonzero(vals >= vals.max() - tol))
        reg = Region("vertex", active, None, label)
        return ConjugateResult(np.full(n, -t * fv), np.tile(v, (n, 1)), [reg] * n, np.zeros(n))

    g = restricted(f, face)
    pts = lattice_table(P, face)
    nu, vv = g.nu_array, g.v_array
    p = g.n_pieces

    value = np.full(n, np.nan)
    xloc = np.full((n, face.dim), np.nan)
    resid = np.zeros(n)
    regions: list[Region | None] = [None] * n

    if t == 0:
        val, grad, _ = _phi_rows(pts, rows, order=1)
        lam = grad @ nu.T + vv
        for i in range(n):
            J = tuple(int(j) for j in np.flatnonzero(lam[i] >= lam[i].max() - tol))
            kind = "chamber" if len(J) == 1 else "corner"
            regions[i] = _group_region(kind, g, J, None, label)
        return ConjugateResult(val, face.to_ambient(grad), regions, resid)

    # chamber branch
    for j in range(p):
        sigma = rows - t * nu[j]
        val, grad, _ = _phi_rows(pts, sigma, order=1)
        lam = grad @ nu.T + vv
        if p == 1:
            margin = np.full(n, np.inf)
        else:
            margin = lam[:, j] - np.max(np.delete(lam, j, axis=1), axis=1)
        ok = (margin > tol) & np.isnan(value)
        value[ok] = val[ok] - t * vv[j]
        xloc[ok] = grad[ok]
        for i in np.flatnonzero(ok):
            regions[i] = _group_region("chamber", g, (j,), None, label)

    todo = np.flatnonzero(np.isnan(value))
    if todo.size:
        best = {i: None for i in todo}
        for J in g.corner_sets:
            j0, rest = J[0], list(J[1:])
            D = nu[rest] - nu[j0]
            e = vv[j0] - vv[rest]
            sigma = rows[todo] - t * nu[j0]

            def oracle(eta, idx, sigma=sigma, D=D, e=e):
                val, grad, hess = _phi_rows(pts, sigma[idx] + eta @ D)
                return (
                    val - eta @ e,
                    grad @ D.T - e,
                    np.einsum("ai,nij,bj->nab", D, hess, D),
                )

            eta, conv = _newton.minimize(
                oracle, np.zeros((len(todo), len(rest))), raise_on_failure=False
            )
            val, grad, _ = _phi_rows(pts, sigma + eta @ D, order=1)
            lam = grad @ nu.T + vv
            xi = np.empty((len(todo), len(J)))
            xi[:, 1:] = -eta / t
            xi[:, 0] = 1.0 - xi[:, 1:].sum(axis=1)
            outside = [i for i in range(p) if i not in J]
            excess = (
                np.max(lam[:, outside], axis=1) - lam[:, list(J)].mean(axis=1)
                if outside
                else np.full(len(todo), -np.inf)
            )
            viol = np.maximum(np.maximum(0.0, -t * xi.min(axis=1)), np.maximum(excess, 0.0))
            for pos, i in enumerate(todo):
                if not conv[pos]:
                    continue
                cand = (viol[pos], len(J), val[pos] - eta[pos] @ e - t * vv[j0], grad[pos], J, xi[pos])
                cur = best[i]
                if cur is None or _better(cand, cur, tol):
                    best[i] = cand
        for i, cand in best.items():
            if cand is None or cand[0] > max(tol, 1e-6):
                raise NoRegionAccepted(
                    f"no region accepted at rho={rows[i].tolist()}, t={t} on {label}"
                )
            viol, _, val, grad, J, xi = cand
            value[i], xloc[i], resid[i] = val, grad, viol
            regions[i] = _group_region("corner", g, J, xi, label)

    return ConjugateResult(value, face.to_ambient(xloc), regions, resid)


def _better(cand, cur, tol) -> bool:
    ok_c, ok_o = cand[0] <= tol, cur[0] <= tol
    if ok_c != ok_o:
        return ok_c
    if ok_c:
        # both admissible: prefer the larger tie set, then the smaller violation
        return (cand[1], -cand[0]) > (cur[1], -cur[0])
    return cand[0] < cur[0]
