"""Rational piecewise-linear convex functions on a Delzant polytope.

``f(x) = max_j (<nu_j, x> + v_j)`` with rational data.  Chambers, weights and
the Futaki number are computed in exact arithmetic; evaluation at float points
uses the active-set tolerance :data:`TOL_ACTIVE`.

Piece indices are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import ceil, lcm
from typing import Mapping, Sequence

import numpy as np

from . import _exact
from ._exact import Vector, as_fraction, dot
from .polytope import DelzantPolytope, Face

__all__ = [
    "TOL_ACTIVE",
    "Chamber",
    "PLConvexFunction",
    "WeightTable",
    "eval_f",
    "subdifferential",
    "weights",
    "futaki",
    "integrate",
    "pl_from_config",
]

TOL_ACTIVE = 1e-9


@dataclass(frozen=True)
class Chamber:
    """``P_j = {x in P : f(x) = lambda_j(x)}``, stored by its vertices."""

    piece: int
    vertices: tuple[Vector, ...]

    @cached_property
    def volume(self) -> Fraction:
        return sum((_exact.simplex_volume(s) for s in _simplices(self.vertices)), Fraction(0))


def _simplices(vertices: Sequence[Vector]) -> list[tuple[Vector, ...]]:
    if len(vertices[0]) == 0:
        return [tuple(vertices)]
    return _exact.triangulate(list(vertices))


def _chambers(poly: DelzantPolytope, nus, vs) -> list[Chamber]:
    """Full-dimensional chambers of ``max_j(<nu_j,x>+v_j)`` over ``poly``."""
    m = poly.dim
    normals = [tuple(Fraction(c) for c in n) for n in poly.normals]
    offsets = list(poly.offsets)
    out = []
    for j in range(len(nus)):
        nn = list(normals)
        oo = list(offsets)
        for i in range(len(nus)):
            if i == j:
                continue
            nn.append(tuple(a - b for a, b in zip(nus[j], nus[i])))
            oo.append(vs[i] - vs[j])
        verts = _exact.halfspace_vertices(nn, oo, m)
        if verts and _exact.affine_rank(verts) == m:
            out.append(Chamber(j, tuple(verts)))
    return out


class PLConvexFunction:
    """``f = max_j(<nu_j, x> + v_j)`` restricted to a polytope.

    Parameters
    ----------
    polytope : DelzantPolytope
    pieces : sequence
        ``(nu, v)`` pairs or mappings ``{"nu": [...], "v": ...}`` with exact
        rational entries (ints, Fractions or ``"p/q"`` strings).
    R : int, optional
        Cap with ``R >= max_P f``.  Defaults to ``ceil(max_P f)``.
    input_coordinates : bool
        If True the pieces are written in the coordinates the polytope was
        given in, and are pulled back through its normalization map.

    Notes
    -----
    Pieces that are not active on a full-dimensional part of the polytope are
    dropped; ``kept`` lists the surviving input indices.
    """

    def __init__(
        self,
        polytope: DelzantPolytope,
        pieces,
        R: int | None = None,
        *,
        input_coordinates: bool = False,
        _labels: Sequence[tuple[int, ...]] | None = None,
        _prune: bool = True,
    ):
        self.polytope = polytope
        m = polytope.dim
        nus, vs = [], []
        for item in pieces:
            if isinstance(item, Mapping):
                nu, v = item["nu"], item["v"]
            else:
                nu, v = item
            nu = tuple(as_fraction(c) for c in np.atleast_1d(np.asarray(nu, dtype=object)).tolist())
            if len(nu) != m:
                raise ValueError(f"piece slope {nu} has wrong dimension (expected {m})")
            nus.append(nu)
            vs.append(as_fraction(v))
        if not nus:
            raise ValueError("at least one affine piece is required")
        if input_coordinates and not polytope.normalization.is_identity:
            inv = polytope.normalization.inverse()
            new_nus, new_vs = [], []
            for nu, v in zip(nus, vs):
                new_nus.append(
                    tuple(sum((inv.matrix[i][j] * nu[i] for i in range(m)), Fraction(0)) for j in range(m))
                )
                new_vs.append(v + dot(nu, inv.shift))
            nus, vs = new_nus, new_vs
        labels = list(_labels) if _labels is not None else [(i,) for i in range(len(nus))]

        # merge identical pieces, then drop those without a full chamber
        merged: dict[tuple, list[int]] = {}
        for i, (nu, v) in enumerate(zip(nus, vs)):
            merged.setdefault((nu, v), []).append(i)
        uniq = list(merged)
        nus = [k[0] for k in uniq]
        vs = [k[1] for k in uniq]
        labels = [tuple(sorted(sum((labels[i] for i in merged[k]), ()))) for k in uniq]
        kept_src = [merged[k][0] for k in uniq]

        if _prune and m > 0:
            chambers = _chambers(polytope, nus, vs)
            alive = sorted(c.piece for c in chambers)
            nus = [nus[j] for j in alive]
            vs = [vs[j] for j in alive]
            labels = [labels[j] for j in alive]
            kept_src = [kept_src[j] for j in alive]
            remap = {old: new for new, old in enumerate(alive)}
            self._chamber_list = [Chamber(remap[c.piece], c.vertices) for c in chambers]
        else:
            self._chamber_list = None
        self.nus: tuple[Vector, ...] = tuple(nus)
        self.vs: tuple[Fraction, ...] = tuple(vs)
        self.labels: tuple[tuple[int, ...], ...] = tuple(labels)
        self.kept = tuple(kept_src)

        denoms = [c.denominator for nu in self.nus for c in nu] + [v.denominator for v in self.vs]
        self.d: int = lcm(*denoms)
        fmax = self.max_on_polytope
        if R is None:
            self.R = int(ceil(fmax))
        else:
            if int(R) != R:
                raise ValueError("R must be an integer")
            if R < fmax:
                raise ValueError(f"R = {R} is below max_P f = {fmax}")
            self.R = int(R)
        self.nu_array = np.array([[float(c) for c in nu] for nu in self.nus], dtype=float).reshape(-1, m)
        self.v_array = np.array([float(v) for v in self.vs])

    # -- basic evaluation ---------------------------------------------
    def __repr__(self) -> str:
        parts = ", ".join(f"({[str(c) for c in nu]}, {v})" for nu, v in zip(self.nus, self.vs))
        return f"PLConvexFunction([{parts}], d={self.d}, R={self.R})"

    @property
    def n_pieces(self) -> int:
        return len(self.nus)

    @property
    def is_affine(self) -> bool:
        return self.n_pieces == 1

    def exact(self, x: Sequence) -> Fraction:
        xs = [as_fraction(c) if not isinstance(c, Fraction) else c for c in x]
        return max(dot(nu, xs) + v for nu, v in zip(self.nus, self.vs))

    def piece_values(self, x) -> np.ndarray:
        """``lambda_j(x)`` for float points; last axis indexes pieces."""
        x = np.asarray(x, dtype=float)
        return x @ self.nu_array.T + self.v_array

    def __call__(self, x) -> np.ndarray | float:
        vals = self.piece_values(x).max(axis=-1)
        return float(vals) if np.ndim(vals) == 0 else vals

    @cached_property
    def max_on_polytope(self) -> Fraction:
        return max(self.exact(v) for v in self.polytope.vertices)

    # -- chambers -------------------------------------------------------
    @property
    def chambers(self) -> list[Chamber]:
        if self._chamber_list is None:
            self._chamber_list = _chambers(self.polytope, self.nus, self.vs)
        return self._chamber_list

    @cached_property
    def corner_pairs(self) -> list[tuple[int, int]]:
        """Pairs ``(j, k)`` whose chambers meet along a codimension-one wall."""
        m = self.polytope.dim
        out = []
        cham = {c.piece: c for c in self.chambers}
        for j in sorted(cham):
            for k in sorted(cham):
                if k <= j:
                    continue
                common = set(cham[j].vertices) & set(cham[k].vertices)
                if len(common) >= m and _exact.affine_rank(sorted(common)) == m - 1:
                    out.append((j, k))
        return out

    @cached_property
    def corner_sets(self) -> list[tuple[int, ...]]:
        """Piece sets ``J`` (affinely independent slopes) that tie on a cell
        of dimension ``m - |J| + 1`` meeting the interior of ``P``."""
        P = self.polytope
        m = P.dim
        normals = [tuple(Fraction(c) for c in n) for n in P.normals]
        out = []
        for size in range(2, min(self.n_pieces, m + 1) + 1):
            for J in combinations(range(self.n_pieces), size):
                j0 = J[0]
                D = [tuple(a - b for a, b in zip(self.nus[j], self.nus[j0])) for j in J[1:]]
                if _exact.rank(D) != size - 1:
                    continue
                nn, oo = list(normals), list(P.offsets)
                for row, j in zip(D, J[1:]):
                    e = self.vs[j0] - self.vs[j]
                    nn += [row, tuple(-c for c in row)]
                    oo += [e, -e]
                for i in range(self.n_pieces):
                    if i not in J:
                        nn.append(tuple(a - b for a, b in zip(self.nus[j0], self.nus[i])))
                        oo.append(self.vs[i] - self.vs[j0])
                verts = _exact.halfspace_vertices(nn, oo, m)
                if not verts or _exact.affine_rank(verts) != m - size + 1:
                    continue
                centroid = [sum((v[i] for v in verts), Fraction(0)) / len(verts) for i in range(m)]
                if all(dot(centroid, n) > a for n, a in zip(normals, P.offsets)):
                    out.append(J)
        return out

    def corner_hyperplane(self, j: int, k: int) -> tuple[Vector, Fraction]:
        """``H_jk = {x : <nu_j - nu_k, x> = v_k - v_j}`` as (normal, offset)."""
        return tuple(a - b for a, b in zip(self.nus[j], self.nus[k])), self.vs[k] - self.vs[j]

    # -- restriction -------------------------------------------------------
    def restrict(self, face: Face) -> "PLConvexFunction":
        """``f`` pulled back to the face's lattice coordinates ``c``.

        The result lives on ``polytope.face_polytope(face)``; its ``labels``
        give, for each restricted piece, the indices of this function's pieces
        that coincide with it on the face.
        """
        if face.is_interior:
            return self
        if face.dim == 0:
            raise ValueError("cannot restrict to a vertex")
        sub = self.polytope.face_polytope(face)
        pieces = []
        for nu, v in zip(self.nus, self.vs):
            pieces.append(
                (tuple(dot(b, nu) for b in face.basis), v + dot(nu, face.base))
            )
        labels = [(j,) for j in range(self.n_pieces)]
        g = PLConvexFunction(sub, pieces, R=None, _labels=labels)
        g.R = self.R
        return g


def eval_f(f: PLConvexFunction, x, tol: float = TOL_ACTIVE) -> tuple[float, frozenset[int]]:
    """Value and active set ``{j : lambda_j(x) >= f(x) - tol}`` at one point."""
    vals = f.piece_values(np.asarray([float(c) for c in np.ravel(x)]))
    top = float(vals.max())
    return top, frozenset(int(j) for j in np.flatnonzero(vals >= top - tol))


def subdifferential(f: PLConvexFunction, x, tol: float = TOL_ACTIVE) -> np.ndarray:
    """Vertices of the convex hull of the active slopes at ``x`` (rows)."""
    _, active = eval_f(f, x, tol)
    pts = np.unique(f.nu_array[sorted(active)], axis=0)
    return _hull_vertices(pts)


def _hull_vertices(pts: np.ndarray) -> np.ndarray:
    if len(pts) <= 1:
        return pts
    center = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - center)
    r = int(np.sum(s > 1e-12 * max(1.0, s[0])))
    if r == 0:
        return pts[:1]
    proj = (pts - center) @ vt[:r].T
    if r == 1:
        idx = sorted({int(np.argmin(proj[:, 0])), int(np.argmax(proj[:, 0]))})
        return pts[idx]
    from scipy.spatial import ConvexHull

    hull = ConvexHull(proj)
    return pts[np.sort(hull.vertices)]


@dataclass(frozen=True)
class WeightTable:
    """Exact weights on the lattice points of ``kdP``.

    ``eta[i] = N (R - f(alpha_i / N))`` and ``lam[i] = eta[i] - mean(eta)``
    with ``N = k d``.  Entries are Fractions; they are integers whenever the
    slopes ``nu_j`` are integral.
    """

    k: int
    level: int
    points: np.ndarray
    eta: tuple[Fraction, ...]
    lam: tuple[Fraction, ...]


def weights(f: PLConvexFunction, k: int) -> WeightTable:
    N = int(k) * f.d
    pts = f.polytope.lattice_points(N)
    eta = []
    for alpha in pts:
        x = [Fraction(int(a), N) for a in alpha]
        eta.append(N * (f.R - f.exact(x)))
    mean = sum(eta, Fraction(0)) / len(eta)
    lam = tuple(e - mean for e in eta)
    return WeightTable(int(k), N, pts, tuple(eta), lam)


def integrate(f: PLConvexFunction) -> Fraction:
    """Exact ``int_P f dx`` (counting measure when ``P`` is a point)."""
    total = Fraction(0)
    for ch in f.chambers:
        nu, v = f.nus[ch.piece], f.vs[ch.piece]
        for simp in _simplices(ch.vertices):
            dim = len(simp) - 1
            centroid = [sum((p[i] for p in simp), Fraction(0)) / (dim + 1) for i in range(dim)]
            total += _exact.simplex_volume(simp) * (dot(nu, centroid) + v)
    return total


def futaki(f: PLConvexFunction) -> Fraction:
    """Exact Futaki number ``-(1/(2 Vol P))(int_dP f dsigma - a int_P f)``.

    ``a = Vol(dP)/Vol(P)``; each facet carries the Lebesgue measure of its own
    lattice, and in dimension one the boundary measure counts the endpoints.
    """
    P = f.polytope
    interior = integrate(f)
    boundary = Fraction(0)
    for F in P.facet_faces():
        if F.dim == 0:
            boundary += f.exact(F.base)
        else:
            boundary += integrate(f.restrict(F))
    ratio = P.boundary_volume / P.volume
    return -(boundary - ratio * interior) / (2 * P.volume)


def pl_from_config(polytope: DelzantPolytope, spec: Mapping | None) -> PLConvexFunction:
    """``{"pieces": [{"nu": [...], "v": "p/q"}, ...], "R": int}``; ``None`` gives f = 0."""
    if spec is None:
        return PLConvexFunction(polytope, [((0,) * polytope.dim, 0)])
    pieces = spec["pieces"]
    return PLConvexFunction(polytope, pieces, R=spec.get("R"), input_coordinates=True)
