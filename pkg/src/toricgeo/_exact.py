"""Small exact linear-algebra kernel over ``fractions.Fraction``."""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Sequence

Vector = tuple[Fraction, ...]


def as_fraction(value) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings. Floats are rejected."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected an exact rational, got {value!r}")


def solve(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Vector | None:
    """Solve a square system exactly; ``None`` if singular."""
    n = len(rows)
    aug = [[Fraction(x) for x in row] + [Fraction(b)] for row, b in zip(rows, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        piv = aug[col][col]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col] / piv
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return tuple(aug[i][n] / aug[i][i] for i in range(n))


def det(rows: Sequence[Sequence]) -> Fraction:
    n = len(rows)
    if n == 0:
        return Fraction(1)
    a = [[Fraction(x) for x in row] for row in rows]
    sign = 1
    out = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            sign = -sign
        out *= a[col][col]
        for r in range(col + 1, n):
            if a[r][col] != 0:
                factor = a[r][col] / a[col][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return sign * out


def rank(rows: Sequence[Sequence]) -> int:
    a = [[Fraction(x) for x in row] for row in rows]
    if not a:
        return 0
    ncols = len(a[0])
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(a)) if a[i][col] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        for i in range(len(a)):
            if i != r and a[i][col] != 0:
                factor = a[i][col] / a[r][col]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        r += 1
        if r == len(a):
            break
    return r


def inverse(rows: Sequence[Sequence]) -> list[list[Fraction]]:
    n = len(rows)
    cols = []
    for j in range(n):
        e = [Fraction(int(i == j)) for i in range(n)]
        x = solve(rows, e)
        if x is None:
            raise ZeroDivisionError("singular matrix")
        cols.append(x)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[Vector]:
    """Exact basis of ``{d : rows @ d = 0}``."""
    a = [[Fraction(x) for x in row] for row in rows]
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, len(a)) if a[i][col] != 0), None)
        if pivot is None:
            continue
        a[r], a[pivot] = a[pivot], a[r]
        p = a[r][col]
        a[r] = [x / p for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][col] != 0:
                factor = a[i][col]
                a[i] = [x - factor * y for x, y in zip(a[i], a[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        d = [Fraction(0)] * ncols
        d[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            d[pcol] = -a[i][fcol]
        basis.append(tuple(d))
    return basis


def dot(a: Sequence, b: Sequence) -> Fraction:
    return sum((Fraction(x) * Fraction(y) for x, y in zip(a, b)), Fraction(0))


def vector_gcd(v: Sequence[int]) -> int:
    g = 0
    for x in v:
        g = gcd(g, int(x))
    return g


def halfspace_vertices(
    normals: Sequence[Sequence[Fraction]], offsets: Sequence[Fraction], dim: int
) -> list[Vector]:
    """Vertices of ``{x : <x, n_r> >= a_r}`` by exact enumeration of dim-subsets."""
    found: dict[Vector, None] = {}
    idx = range(len(normals))
    for subset in combinations(idx, dim):
        x = solve([normals[i] for i in subset], [offsets[i] for i in subset])
        if x is None or x in found:
            continue
        if all(dot(x, n) >= a for n, a in zip(normals, offsets)):
            found[x] = None
    return sorted(found)


def affine_rank(points: Sequence[Sequence[Fraction]]) -> int:
    if not points:
        return -1
    base = points[0]
    diffs = [[Fraction(p) - Fraction(q) for p, q in zip(pt, base)] for pt in points[1:]]
    return rank(diffs) if diffs else 0


def simplex_volume(points: Sequence[Sequence[Fraction]]) -> Fraction:
    """Euclidean volume of the simplex spanned by ``dim + 1`` points."""
    dim = len(points) - 1
    base = points[0]
    rows = [[Fraction(p) - Fraction(q) for p, q in zip(pt, base)] for pt in points[1:]]
    fact = 1
    for i in range(2, dim + 1):
        fact *= i
    return abs(det(rows)) / fact


def triangulate(vertices: Sequence[Vector]) -> list[tuple[Vector, ...]]:
    """Simplices covering the convex hull of full-dimensional ``vertices``.

    One dimension is handled exactly; higher dimensions take the
    combinatorics from a Delaunay triangulation and keep the coordinates exact.
    """
    dim = len(vertices[0])
    if dim == 1:
        lo, hi = min(vertices), max(vertices)
        return [(lo, hi)]
    import numpy as np
    from scipy.spatial import Delaunay

    pts = np.array([[float(c) for c in v] for v in vertices])
    tri = Delaunay(pts)
    out = []
    for simplex in tri.simplices:
        simp = tuple(vertices[i] for i in simplex)
        if simplex_volume(simp) != 0:
            out.append(simp)
    return out
