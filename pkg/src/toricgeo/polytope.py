"""Delzant polytopes, their lattice points and their face lattice.

All predicates (membership, vertex enumeration, the Delzant test) are exact;
floating point enters only through :meth:`DelzantPolytope.locate` when the
caller supplies float coordinates.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import floor, ceil, lcm
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _exact
from ._exact import Vector, as_fraction, dot

__all__ = [
    "PolytopeError",
    "Unbounded",
    "NotFullDimensional",
    "NonPrimitiveNormal",
    "NotDelzant",
    "OutsidePolytope",
    "AffineMap",
    "Face",
    "DelzantPolytope",
    "validate",
    "preset",
    "PRESETS",
    "polytope_from_config",
]


class PolytopeError(ValueError):
    """Base class for polytope validation failures."""


class Unbounded(PolytopeError):
    pass


class NotFullDimensional(PolytopeError):
    pass


class NonPrimitiveNormal(PolytopeError):
    def __init__(self, index: int, normal: Sequence[int]):
        super().__init__(f"facet {index} has non-primitive normal {tuple(normal)}")
        self.index = index
        self.normal = tuple(normal)


class NotDelzant(PolytopeError):
    def __init__(self, vertex: Vector, reason: str):
        super().__init__(f"not Delzant at vertex {_fmt(vertex)}: {reason}")
        self.vertex = vertex


class OutsidePolytope(PolytopeError):
    pass


def _fmt(v: Iterable[Fraction]) -> str:
    return "(" + ", ".join(str(c) for c in v) + ")"


@dataclass(frozen=True)
class AffineMap:
    """``x -> matrix @ x + shift`` with a unimodular integer matrix."""

    matrix: tuple[tuple[int, ...], ...]
    shift: Vector

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        eye = tuple(tuple(int(i == j) for j in range(dim)) for i in range(dim))
        return cls(eye, tuple(Fraction(0) for _ in range(dim)))

    @property
    def is_identity(self) -> bool:
        dim = len(self.shift)
        return self == AffineMap.identity(dim)

    def __call__(self, x: Sequence) -> Vector:
        return tuple(dot(row, x) + b for row, b in zip(self.matrix, self.shift))

    def inverse(self) -> "AffineMap":
        inv = _exact.inverse(self.matrix)
        inv_int = tuple(tuple(int(c) for c in row) for row in inv)
        shift = tuple(-dot(row, self.shift) for row in inv)
        return AffineMap(inv_int, shift)


@dataclass(frozen=True)
class Face:
    """A closed face of ``P`` described by the facets that contain it.

    Points of the face are ``base + basis @ c`` with ``c`` in the face's own
    lattice coordinates; ``basis`` columns are the primitive edge vectors at
    ``base`` (a Z-basis of the face lattice, by the Delzant property).  The
    interior stratum is the face with no active facets, ``base = 0`` and the
    identity basis.
    """

    active: frozenset[int]
    dim: int
    base: Vector
    basis: tuple[tuple[int, ...], ...]  # dim vectors of length m
    vertex_ids: tuple[int, ...]
    coord_facets: tuple[int, ...] = ()  # c_i is the slack of facet coord_facets[i]

    @property
    def is_interior(self) -> bool:
        return not self.active

    @property
    def is_vertex(self) -> bool:
        return self.dim == 0

    @property
    def label(self) -> str:
        if self.is_interior:
            return "interior"
        if self.is_vertex:
            return f"vertex{self.vertex_ids[0]}"
        return "face" + "-".join(str(r) for r in sorted(self.active))

    def basis_matrix(self) -> np.ndarray:
        """``(m, dim)`` float matrix whose columns are the basis vectors."""
        m = len(self.base)
        return np.array(self.basis, dtype=float).reshape(self.dim, m).T

    def to_ambient(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        base = np.array([float(b) for b in self.base])
        return base + c @ self.basis_matrix().T

    def to_local(self, x) -> np.ndarray:
        """Least-squares local coordinates of ambient points ``x``."""
        x = np.asarray(x, dtype=float)
        base = np.array([float(b) for b in self.base])
        if self.dim == 0:
            return np.zeros(x.shape[:-1] + (0,))
        B = self.basis_matrix()
        sol, *_ = np.linalg.lstsq(B, (x - base).reshape(-1, len(base)).T, rcond=None)
        return sol.T.reshape(x.shape[:-1] + (self.dim,))


@dataclass(frozen=True, eq=False)
class DelzantPolytope:
    """A validated Delzant polytope ``{x : <x, v_r> - a_r >= 0}``.

    Construct through :func:`validate`.  ``normalization`` maps the caller's
    coordinates to the stored (normalized) ones, in which ``0`` is a vertex and
    ``P`` lies in the closed positive orthant.
    """

    normals: tuple[tuple[int, ...], ...]
    offsets: tuple[Fraction, ...]
    vertices: tuple[Vector, ...]
    vertex_facets: tuple[frozenset[int], ...]
    normalization: AffineMap
    name: str | None = None
    _face_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.normals[0])

    @property
    def facets(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return list(zip(self.normals, self.offsets))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DelzantPolytope):
            return NotImplemented
        return (self.normals, self.offsets, self.vertices) == (
            other.normals,
            other.offsets,
            other.vertices,
        )

    def __hash__(self) -> int:
        return hash((self.normals, self.offsets))

    @cached_property
    def digest(self) -> str:
        text = ";".join(
            ",".join(str(c) for c in n) + "|" + str(a) for n, a in self.facets
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @cached_property
    def is_lattice(self) -> bool:
        return all(c.denominator == 1 for v in self.vertices for c in v)

    def slacks(self, x) -> np.ndarray:
        """Float facet slacks ``<x, v_r> - a_r`` (last axis = facets)."""
        x = np.asarray(x, dtype=float)
        V = np.array(self.normals, dtype=float)
        a = np.array([float(o) for o in self.offsets])
        return x @ V.T - a

    def contains(self, x: Sequence) -> bool:
        """Exact membership for rational points."""
        xs = [as_fraction(c) if not isinstance(c, Fraction) else c for c in x]
        return all(dot(xs, n) >= a for n, a in self.facets)

    # -- lattice points -------------------------------------------------
    def lattice_points(self, n: int = 1, face: Face | None = None) -> np.ndarray:
        """Integer points of ``nP`` (or of ``n F``), lexicographically sorted."""
        if n < 1 or int(n) != n:
            raise ValueError("dilation must be a positive integer")
        n = int(n)
        m = self.dim
        lo = [floor(n * min(v[i] for v in self.vertices)) for i in range(m)]
        hi = [ceil(n * max(v[i] for v in self.vertices)) for i in range(m)]
        axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        den = lcm(*(o.denominator for o in self.offsets))
        V = np.array(self.normals, dtype=np.int64)
        rhs = np.array([int(o * den * n) for o in self.offsets], dtype=np.int64)
        lhs = den * (grid @ V.T)
        keep = np.all(lhs >= rhs, axis=1)
        if face is not None and face.active:
            idx = sorted(face.active)
            keep &= np.all(lhs[:, idx] == rhs[idx], axis=1)
        return grid[keep]

    # -- faces ----------------------------------------------------------
    @cached_property
    def _edge_frames(self) -> dict[int, tuple[tuple[int, ...], list[tuple[int, ...]]]]:
        frames = {}
        for i, (v, act) in enumerate(zip(self.vertices, self.vertex_facets)):
            order = tuple(sorted(act))
            inv = _exact.inverse([self.normals[r] for r in order])
            cols = [tuple(int(inv[row][j]) for row in range(self.dim)) for j in range(self.dim)]
            frames[i] = (order, cols)
        return frames

    @cached_property
    def faces(self) -> dict[frozenset[int], Face]:
        """All faces keyed by their active facet set (``frozenset()`` = interior)."""
        m = self.dim
        keys: set[frozenset[int]] = set()
        for act in self.vertex_facets:
            for size in range(m + 1):
                for sub in combinations(sorted(act), size):
                    keys.add(frozenset(sub))
        out = {}
        for key in sorted(keys, key=lambda s: (len(s), sorted(s))):
            out[key] = self._make_face(key)
        return out

    def _make_face(self, active: frozenset[int]) -> Face:
        m = self.dim
        vids = tuple(i for i, act in enumerate(self.vertex_facets) if active <= act)
        if not active:
            eye = tuple(tuple(int(i == j) for j in range(m)) for i in range(m))
            return Face(active, m, tuple(Fraction(0) for _ in range(m)), eye, vids)
        base_id = vids[0]
        order, cols = self._edge_frames[base_id]
        basis = tuple(cols[j] for j, r in enumerate(order) if r not in active)
        coord = tuple(r for r in order if r not in active)
        return Face(active, m - len(active), self.vertices[base_id], basis, vids, coord)

    def face(self, active: Iterable[int]) -> Face:
        key = frozenset(active)
        try:
            return self.faces[key]
        except KeyError:
            raise KeyError(f"facets {sorted(key)} do not meet in a face") from None

    @property
    def interior(self) -> Face:
        return self.faces[frozenset()]

    def vertex_face(self, index: int) -> Face:
        return self.faces[self.vertex_facets[index]]

    def facet_faces(self) -> list[Face]:
        return [self.faces[frozenset({r})] for r in range(len(self.normals))]

    def face_polytope(self, face: Face) -> "DelzantPolytope":
        """The face as a Delzant polytope in its own lattice coordinates."""
        if face.is_interior:
            return self
        if face.active in self._face_cache:
            return self._face_cache[face.active]
        if face.dim == 0:
            raise ValueError("a vertex has no face polytope")
        normals, offsets = [], []
        for q in range(len(self.normals)):
            if q in face.active or (face.active | {q}) not in self.faces:
                continue
            nq = self.normals[q]
            normals.append(tuple(int(dot(b, nq)) for b in face.basis))
            offsets.append(self.offsets[q] - dot(face.base, nq))
        poly = validate(list(zip(normals, offsets)), normalize=False)
        self._face_cache[face.active] = poly
        return poly

    def local_coords(self, face: Face, x) -> np.ndarray:
        """Face coordinates ``c`` of ambient float points ``x`` (last axis)."""
        x = np.asarray(x, dtype=float)
        if face.is_interior:
            return x.copy()
        sl = self.slacks(x)
        return sl[..., list(face.coord_facets)]

    def locate(self, x, tol: float = 1e-9) -> Face:
        """The stratum whose active set is ``{r : |slack_r(x)| <= tol}``."""
        if all(isinstance(c, (Fraction, int)) for c in np.ravel(x)):
            xs = [Fraction(c) for c in x]
            sl = [dot(xs, n) - a for n, a in self.facets]
            if min(sl) < 0:
                raise OutsidePolytope(f"{_fmt(xs)} lies outside P")
            active = frozenset(r for r, s in enumerate(sl) if s == 0)
        else:
            sl = self.slacks(x)
            if sl.min() < -tol:
                raise OutsidePolytope(f"point {np.asarray(x)} lies outside P (slack {sl.min():.3e})")
            active = frozenset(int(r) for r in np.flatnonzero(np.abs(sl) <= tol))
        if active not in self.faces:
            raise OutsidePolytope(f"active set {sorted(active)} is not a face; tolerance too coarse")
        return self.faces[active]

    # -- measures ---------------------------------------------------------
    @cached_property
    def volume(self) -> Fraction:
        if self.dim == 1:
            return self.vertices[-1][0] - self.vertices[0][0]
        return sum(
            (_exact.simplex_volume(s) for s in _exact.triangulate(list(self.vertices))),
            Fraction(0),
        )

    @cached_property
    def boundary_volume(self) -> Fraction:
        """Boundary measure with each facet in its own lattice normalization."""
        if self.dim == 1:
            return Fraction(2)
        return sum((self.face_polytope(F).volume for F in self.facet_faces()), Fraction(0))


def _parse_facets(facets) -> tuple[list[tuple[int, ...]], list[Fraction]]:
    normals, offsets = [], []
    for item in facets:
        if isinstance(item, Mapping):
            normal, offset = item["normal"], item["offset"]
        else:
            normal, offset = item
        nrm = []
        for c in normal:
            fc = as_fraction(c) if not isinstance(c, float) else None
            if fc is None or fc.denominator != 1:
                raise PolytopeError(f"facet normals must be integer vectors, got {normal!r}")
            nrm.append(int(fc))
        normals.append(tuple(nrm))
        if isinstance(offset, float):
            raise PolytopeError("offsets must be exact rationals (int or 'p/q' string)")
        offsets.append(as_fraction(offset))
    return normals, offsets


def validate(facets, *, normalize: bool = True, name: str | None = None) -> DelzantPolytope:
    """Check the Delzant conditions and return the (normalized) polytope.

    ``facets`` is a sequence of ``(normal, offset)`` pairs or mappings with
    keys ``normal``/``offset``, describing ``<x, normal> - offset >= 0``.
    """
    normals, offsets = _parse_facets(facets)
    if not normals:
        raise PolytopeError("no facets given")
    m = len(normals[0])
    if m < 1 or any(len(n) != m for n in normals):
        raise PolytopeError("facet normals have inconsistent dimensions")
    # exact duplicates carry no information
    seen: dict[tuple, None] = {}
    for n, a in zip(normals, offsets):
        seen.setdefault((n, a), None)
    normals = [n for n, _ in seen]
    offsets = [a for _, a in seen]
    if len(normals) < m + 1:
        raise NotFullDimensional(f"need at least {m + 1} facets in dimension {m}")
    for i, n in enumerate(normals):
        if _exact.vector_gcd(n) != 1:
            raise NonPrimitiveNormal(i, n)

    fn = [tuple(Fraction(c) for c in n) for n in normals]
    if _exact.rank(fn) < m:
        raise Unbounded("normals do not span R^m: P contains a line")
    # extreme rays of the recession cone {d : <d, v_r> >= 0}
    for subset in combinations(range(len(fn)), m - 1):
        rows = [fn[i] for i in subset]
        if _exact.rank(rows) < m - 1:
            continue
        for d in _exact.nullspace(rows, m):
            for sgn in (1, -1):
                dd = tuple(sgn * c for c in d)
                if all(dot(dd, n) >= 0 for n in fn):
                    raise Unbounded(f"P is unbounded in direction {_fmt(dd)}")

    verts = _exact.halfspace_vertices(fn, offsets, m)
    if not verts or _exact.affine_rank(verts) < m:
        raise NotFullDimensional("P is empty or lower-dimensional")

    active = [frozenset(r for r in range(len(fn)) if dot(v, fn[r]) == offsets[r]) for v in verts]
    used = sorted(set().union(*active))
    if len(used) < len(fn):
        # inequalities that are never tight are redundant
        remap = {old: new for new, old in enumerate(used)}
        normals = [normals[i] for i in used]
        offsets = [offsets[i] for i in used]
        fn = [fn[i] for i in used]
        active = [frozenset(remap[r] for r in act) for act in active]
    for v, act in zip(verts, active):
        if len(act) != m:
            raise NotDelzant(v, f"{len(act)} facets meet (polytope is not simple)")
        dt = _exact.det([normals[r] for r in sorted(act)])
        if abs(dt) != 1:
            normals_txt = ", ".join(str(normals[r]) for r in sorted(act))
            raise NotDelzant(v, f"normals {normals_txt} have determinant {dt}")

    normalization = AffineMap.identity(m)
    if normalize:
        normalization = _normalization(verts, active, normals)
        if not normalization.is_identity:
            inv = normalization.inverse()
            new_normals, new_offsets = [], []
            for n, a in zip(normals, offsets):
                # <x, n> - a with x = inv(y)
                nn = tuple(int(sum(n[i] * inv.matrix[i][j] for i in range(m))) for j in range(m))
                new_normals.append(nn)
                new_offsets.append(a - dot(n, inv.shift))
            inner = validate(list(zip(new_normals, new_offsets)), normalize=False, name=name)
            return DelzantPolytope(
                inner.normals, inner.offsets, inner.vertices, inner.vertex_facets, normalization, name
            )
    return DelzantPolytope(
        tuple(normals), tuple(offsets), tuple(verts), tuple(active), normalization, name
    )


def _normalization(verts, active, normals) -> AffineMap:
    m = len(verts[0])
    zero = tuple(Fraction(0) for _ in range(m))
    if zero in verts and all(c >= 0 for v in verts for c in v):
        return AffineMap.identity(m)
    corner = tuple(min(v[i] for v in verts) for i in range(m))
    if corner in verts:
        return AffineMap(AffineMap.identity(m).matrix, tuple(-c for c in corner))
    v = verts[0]
    order = sorted(active[0])
    A = tuple(tuple(normals[r]) for r in order)
    shift = tuple(-dot(row, v) for row in A)
    return AffineMap(A, shift)


PRESETS: dict[str, list[tuple[tuple[int, ...], str]]] = {
    "CP1": [((1,), "0"), ((-1,), "-1")],
    "CP2": [((1, 0), "0"), ((0, 1), "0"), ((-1, -1), "-1")],
    "CP1xCP1": [((1, 0), "0"), ((0, 1), "0"), ((-1, 0), "-1"), ((0, -1), "-1")],
    "Hirzebruch1": [((1, 0), "0"), ((0, 1), "0"), ((0, -1), "-1"), ((-1, -1), "-2")],
}


def preset(name: str) -> DelzantPolytope:
    """One of ``CP1``, ``CP2``, ``CP1xCP1``, ``Hirzebruch1``."""
    try:
        facets = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return validate(facets, name=name)


def polytope_from_config(spec: Mapping) -> DelzantPolytope:
    """``{"preset": name}`` or ``{"facets": [{"normal": [...], "offset": "p/q"}, ...]}``."""
    if "preset" in spec:
        return preset(spec["preset"])
    if "facets" in spec:
        return validate(spec["facets"], name=spec.get("name"))
    raise KeyError("polytope spec needs 'preset' or 'facets'")
