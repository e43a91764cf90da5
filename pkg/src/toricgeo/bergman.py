"""Finite-level objects built from the monomial basis of ``H^0(L^N)``.

``N`` is the effective power of the line bundle (``N = k d`` for a test
configuration with denominator ``d``).  The norm-squares

    Q(alpha) = int_P exp(<alpha, rho(x)> - N phi(rho(x))) dx,   rho = grad u_0,

are computed once per level by Gauss-Legendre quadrature in the moment
polytope (the change of variables ``x = grad phi(rho)`` absorbs the Monge-Ampere
density).  The integrand is analytic on the closed polytope, so tensor rules
converge geometrically.  The constant factor ``(2 pi)^m`` is dropped; it
cancels in every normalized quantity.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import _exact, _quadrature
from .plconvex import PLConvexFunction
from .polytope import DelzantPolytope, Face
from .potentials import OrbitPoint, _phi_rows, lattice_table, legendre, orbit_point_at

__all__ = [
    "QuadratureFailure",
    "LevelBudgetExceeded",
    "QTable",
    "DiscreteMeasure",
    "DensityOfStates",
    "default_budget",
    "norming_constants",
    "density_of_states",
    "mu_k",
    "mu_k_tilted",
    "bernstein",
    "psi_k",
    "d_psi_k",
    "convention_shift",
]

FORMAT = "toricgeo-qtable-1"
NODE_TOL = 1e-14  # Newton tolerance for rho at quadrature nodes
CHUNK = 256


class QuadratureFailure(RuntimeError):
    pass


class LevelBudgetExceeded(ValueError):
    pass


def _is_box(P: DelzantPolytope) -> bool:
    return all(sum(abs(c) for c in n) == 1 for n in P.normals)


def default_budget(P: DelzantPolytope) -> int:
    """Largest level allowed by default: 128 for intervals and boxes, 48 otherwise."""
    return 128 if P.dim == 1 or _is_box(P) else 48


@dataclass
class QTable:
    """``log Q(alpha)`` for every ``alpha`` in ``N P``.

    ``meta`` records the rule size and the last refinement change.
    """

    polytope: DelzantPolytope
    level: int
    points: np.ndarray
    logq: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64)
        self.logq = np.asarray(self.logq, dtype=float)
        lo = self.points.min(axis=0)
        shape = tuple(self.points.max(axis=0) - lo + 1)
        dense = np.full(shape, -1, dtype=np.int64)
        dense[tuple((self.points - lo).T)] = np.arange(len(self.points))
        self._lo, self._dense = lo, dense
        self._atoms: dict = {}

    def index(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.int64).reshape(-1, self.polytope.dim)
        idx = self._dense[tuple((alpha - self._lo).T)]
        if np.any(idx < 0):
            raise KeyError("lattice point outside N P")
        return idx

    def __getitem__(self, alpha) -> float:
        return float(self.logq[self.index(alpha)[0]])

    # -- cache file -------------------------------------------------------
    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with open(tmp, "w") as fh:
            fh.write(json.dumps(self.meta, sort_keys=True) + "\n")
            for a, lq in zip(self.points, self.logq):
                fh.write(",".join(str(int(c)) for c in a) + f",{lq:.17g}\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, polytope: DelzantPolytope) -> "QTable":
        with open(path) as fh:
            meta = json.loads(fh.readline())
            rows = [line.strip().split(",") for line in fh if line.strip()]
        if meta.get("format") != FORMAT or meta.get("polytope") != polytope.digest:
            raise ValueError(f"{path} does not belong to this polytope")
        m = polytope.dim
        pts = np.array([[int(c) for c in r[:m]] for r in rows], dtype=np.int64)
        logq = np.array([float(r[m]) for r in rows])
        return cls(polytope, int(meta["level"]), pts, logq, meta)


def _cache_name(P: DelzantPolytope, N: int, rel_tol: float) -> str:
    return f"qtable-{P.digest}-N{N}-tol{rel_tol:.0e}.txt"


def _rule(P: DelzantPolytope, n: int):
    simplices = _exact.triangulate(list(P.vertices))
    parts = [_quadrature.simplex_rule([[float(c) for c in v] for v in s], n) for s in simplices]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _logq_from_rule(lattice, nodes, logw, alphas, N, threads) -> np.ndarray:
    rho = legendre(lattice, nodes, tol=NODE_TOL)[1]
    phi_n, _, _ = _phi_rows(lattice, rho, order=0)
    base = logw - N * phi_n
    alphas = np.asarray(alphas, dtype=float)
    chunks = [alphas[i : i + CHUNK] for i in range(0, len(alphas), CHUNK)]

    def work(block):
        return logsumexp(base[None, :] + block @ rho.T, axis=1)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(work, chunks))
    else:
        out = [work(b) for b in chunks]
    return np.concatenate(out)


def _refine(compute, n0: int, rel_tol: float, max_refine: int):
    prev = compute(n0)
    n, change = n0, float("inf")
    for _ in range(max_refine):
        n = int(ceil(1.5 * n))
        cur = compute(n)
        change = float(np.max(np.abs(cur - prev)))
        if change <= rel_tol:
            return cur, n, change
        prev = cur
    raise QuadratureFailure(f"log Q changed by {change:.3e} after {max_refine} refinements (n={n})")


def norming_constants(
    P: DelzantPolytope,
    level: int,
    *,
    rel_tol: float = 1e-12,
    max_refine: int = 4,
    budget: int | None = None,
    cache_dir=None,
    threads: int = 1,
) -> QTable:
    """Table of ``log Q(alpha)`` at line-bundle power ``level``.

    Parameters
    ----------
    level : int
        Effective power ``N``.
    rel_tol : float
        Accepted change of ``log Q`` (i.e. relative change of ``Q``) between
        successive rules, each 1.5 times finer per dimension.
    cache_dir : path, optional
        Directory of cached tables; read if present, written otherwise.
    """
    N = int(level)
    if N < 1:
        raise ValueError("level must be a positive integer")
    limit = default_budget(P) if budget is None else budget
    if N > limit:
        raise LevelBudgetExceeded(f"level {N} exceeds the budget {limit} for this polytope")
    if cache_dir is not None:
        path = Path(cache_dir) / _cache_name(P, N, rel_tol)
        if path.exists():
            return QTable.load(path, P)

    alphas = P.lattice_points(N)
    n0 = max(24, int(ceil(0.6 * N + 8)))
    if _is_box(P):
        # product of intervals: Q factorizes over coordinates
        m = P.dim
        logq = np.zeros(len(alphas))
        n_used, change = 0, 0.0
        for i in range(m):
            lo = int(min(v[i] for v in P.vertices))
            hi = int(max(v[i] for v in P.vertices))
            lattice = np.arange(lo, hi + 1, dtype=float)[:, None]
            axis_alpha = np.arange(N * lo, N * hi + 1, dtype=float)[:, None]

            def compute(n, lo=lo, hi=hi, lattice=lattice, axis_alpha=axis_alpha):
                nodes, logw = _quadrature.box_rule([lo], [hi], n)
                return _logq_from_rule(lattice, nodes, logw, axis_alpha, N, threads)

            table, n_i, ch = _refine(compute, n0, rel_tol, max_refine)
            logq += table[alphas[:, i] - N * lo]
            n_used, change = max(n_used, n_i), max(change, ch)
    else:
        lattice = lattice_table(P, P.interior)

        def compute(n):
            nodes, logw = _rule(P, n)
            return _logq_from_rule(lattice, nodes, logw, alphas, N, threads)

        logq, n_used, change = _refine(compute, n0, rel_tol, max_refine)

    meta = {
        "format": FORMAT,
        "polytope": P.digest,
        "level": N,
        "rel_tol": rel_tol,
        "nodes_per_dim": n_used,
        "last_change": change,
    }
    table = QTable(P, N, alphas, logq, meta)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        table.save(Path(cache_dir) / _cache_name(P, N, rel_tol))
    return table


# -- measures ---------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms ``alpha / N`` with log-weights."""

    alphas: np.ndarray
    atoms: np.ndarray
    logw: np.ndarray
    normalized: bool = True

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.logw)

    def log_mass(self) -> float:
        return float(logsumexp(self.logw)) if len(self.logw) else -np.inf

    def normalize(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.alphas, self.atoms, self.logw - self.log_mass(), True)

    def expect(self, g) -> np.ndarray:
        vals = np.asarray(g(self.atoms), dtype=float)
        w = np.exp(self.logw - self.log_mass())
        return np.tensordot(w, vals, axes=(0, 0))

    def mean(self) -> np.ndarray:
        return self.expect(lambda x: x)


def _face_atoms(Q: QTable, face: Face):
    if face.active not in Q._atoms:
        P = Q.polytope
        alphas = P.lattice_points(Q.level, face=face)
        if face.is_interior:
            c = alphas.astype(float)
        else:
            V = np.array([P.normals[r] for r in face.coord_facets], dtype=np.int64).reshape(-1, P.dim)
            off = np.array([Q.level * P.offsets[r] for r in face.coord_facets], dtype=object)
            c = (alphas @ V.T - off.astype(float)) if face.dim else np.zeros((len(alphas), 0))
        Q._atoms[face.active] = (alphas, np.asarray(c, dtype=float), Q.logq[Q.index(alphas)])
    return Q._atoms[face.active]


def _log_terms(Q: QTable, point: OrbitPoint):
    """Lattice points of ``N F`` and ``log P(alpha)`` for each row of ``rho``."""
    face = point.face
    alphas, c, logq = _face_atoms(Q, face)
    rows = point.rows()
    if face.dim == 0:
        return alphas, np.tile(-logq, (len(rows), 1))
    phi_v, _, _ = _phi_rows(lattice_table(Q.polytope, face), rows, order=0)
    return alphas, rows @ c.T - Q.level * phi_v[:, None] - logq[None, :]


@dataclass(frozen=True)
class DensityOfStates:
    alphas: np.ndarray
    log_terms: np.ndarray  # log P(alpha) per row
    log_pi: np.ndarray

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi)


def density_of_states(Q: QTable, point: OrbitPoint) -> DensityOfStates:
    """``Pi = sum_alpha P(alpha)`` over the lattice points of the stratum's face."""
    alphas, lt = _log_terms(Q, point)
    lp = logsumexp(lt, axis=1)
    if not point.batched:
        return DensityOfStates(alphas, lt[0], lp[0])
    return DensityOfStates(alphas, lt, lp)


def _measure(Q: QTable, point: OrbitPoint, extra=None) -> DiscreteMeasure:
    if point.batched:
        raise ValueError("measures are built for one orbit point at a time")
    alphas, lt = _log_terms(Q, point)
    logw = lt[0] if extra is None else lt[0] + extra(alphas)
    atoms = alphas / Q.level
    return DiscreteMeasure(alphas, atoms, logw, False).normalize()


def mu_k(Q: QTable, point: OrbitPoint) -> DiscreteMeasure:
    """The probability measure ``sum P(alpha)/Pi delta_{alpha/N}``."""
    return _measure(Q, point)


def mu_k_tilted(Q: QTable, point: OrbitPoint, f: PLConvexFunction, t: float) -> DiscreteMeasure:
    """``mu_k`` reweighted by ``exp(-t N f(alpha/N))`` and renormalized."""
    N = Q.level
    return _measure(Q, point, lambda a: -t * N * f(a / N))


def bernstein(Q: QTable, g, x) -> float:
    """``B_N(g)(x) = sum g(alpha/N) P(alpha)/Pi`` at ``rho = grad u_0(x)``."""
    point = orbit_point_at(Q.polytope, x)
    return float(mu_k(Q, point).expect(g))


def _tilted(Q, point, f, t):
    alphas, lt = _log_terms(Q, point)
    N = Q.level
    fa = np.asarray(f(alphas / N), dtype=float).reshape(-1)
    return alphas, lt, fa


def convention_shift(f: PLConvexFunction, level: int, t: float, *, factor2=False, add_tR=False, trace_normalize=False):
    """Time actually used and the ``z``-independent offset for a convention.

    ``factor2`` doubles time; ``add_tR`` adds ``s R``; ``trace_normalize``
    subtracts ``s mean(eta)/N`` with ``s`` the rescaled time.  All three
    together give the convention whose weights are ``exp(2 t lambda_alpha)``.
    """
    s = 2.0 * t if factor2 else float(t)
    shift = 0.0
    if add_tR:
        shift += s * f.R
    if trace_normalize:
        pts = f.polytope.lattice_points(level)
        mean_f = float(np.mean(f(pts / level)))
        shift -= s * (f.R - mean_f)
    return s, shift


def psi_k(
    Q: QTable,
    f: PLConvexFunction,
    t: float,
    point: OrbitPoint,
    *,
    factor2: bool = False,
    add_tR: bool = False,
    trace_normalize: bool = False,
):
    """Bergman approximant ``(1/N) log sum exp(-t N f(alpha/N)) P(alpha)/Pi``.

    The flags switch to the other common normalizations; see
    :func:`convention_shift`.
    """
    s, shift = convention_shift(
        f, Q.level, t, factor2=factor2, add_tR=add_tR, trace_normalize=trace_normalize
    )
    N = Q.level
    _, lt, fa = _tilted(Q, point, f, s)
    val = (logsumexp(lt - s * N * fa[None, :], axis=1) - logsumexp(lt, axis=1)) / N + shift
    return val if point.batched else float(val[0])


def d_psi_k(Q: QTable, f: PLConvexFunction, t: float, point: OrbitPoint):
    """Gradient in stratum coordinates and time derivative of :func:`psi_k`.

    The gradient is the difference of the barycenters (in face coordinates
    divided by ``N``) of the tilted and untilted measures; the time
    derivative is ``-int f d mu_tilted``.
    """
    N = Q.level
    face = point.face
    _, c, _ = _face_atoms(Q, face)
    _, lt, fa = _tilted(Q, point, f, t)
    w0 = np.exp(lt - logsumexp(lt, axis=1)[:, None])
    lt_t = lt - t * N * fa[None, :]
    wt = np.exp(lt_t - logsumexp(lt_t, axis=1)[:, None])
    grad = (wt - w0) @ c / N
    dt = -(wt @ fa)
    if point.batched:
        return grad, dt
    return grad[0], float(dt[0])
