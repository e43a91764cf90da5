"""Rate functions and large-deviations numerics for the measures ``mu_k^z``.

For an orbit point ``z`` on the stratum of a face ``F`` with coordinates
``rho``, the rate function is the Legendre gap

    I^z(x) = u_F(x) - <c(x), rho> + phi_F(rho)     for x in the closed face,

and ``+infinity`` elsewhere (``c(x)`` are the face coordinates).  Infinite
values are returned as :data:`INFINITE` for scalars and as masked entries of
a ``numpy.ma`` array for batches.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _newton
from .bergman import QTable, _face_atoms, _log_terms, mu_k_tilted, psi_k
from .geodesic import psi_t
from .plconvex import PLConvexFunction
from .polytope import OutsidePolytope
from .potentials import BOUNDARY_TOL, OrbitPoint, _phi_rows, lattice_table, moment0, u0

__all__ = [
    "INFINITE",
    "is_infinite",
    "EmptyIntersection",
    "RateFunction",
    "rate",
    "tilted_rate",
    "log_mgf",
    "grad_log_mgf",
    "conjugate_check",
    "LDPReport",
    "ldp_bounds",
    "varadhan_check",
]


class _Infinite:
    """Marker for an infinite rate; compares above every real number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITE"

    __str__ = __repr__

    def __float__(self) -> float:
        return float("inf")

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def __add__(self, other):
        raise TypeError("infinite rates cannot enter arithmetic")

    __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = __add__


INFINITE = _Infinite()


def is_infinite(value) -> bool:
    return value is INFINITE


class EmptyIntersection(ValueError):
    """A set contains no atom of the measure at this level."""


def _check_single(z: OrbitPoint) -> None:
    if z.batched:
        raise ValueError("rate functions are defined for one orbit point at a time")


def _phi_z(z: OrbitPoint, shift=None) -> np.ndarray:
    P = z.polytope
    if z.face.dim == 0:
        return np.zeros(1 if shift is None else len(shift))
    rho = z.rows() if shift is None else z.rows() + shift
    return _phi_rows(lattice_table(P, z.face), rho, order=0)[0]


def rate(z: OrbitPoint, x, tol: float = BOUNDARY_TOL):
    """``I^z(x)``; see the module docstring.

    Points within ``tol`` of a facet are treated as lying on it, where the
    symplectic potential of the face is the restriction of ``u_F``.
    """
    _check_single(z)
    P, F = z.polytope, z.face
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x.reshape(-1, P.dim)
    out = np.zeros(len(xs))
    mask = np.zeros(len(xs), dtype=bool)
    phi_rho = float(_phi_z(z)[0])
    groups: dict = {}
    for i, xi in enumerate(xs):
        try:
            G = P.locate(xi, tol=tol)
        except OutsidePolytope:
            mask[i] = True
            continue
        if not F.active <= G.active:
            mask[i] = True
            continue
        groups.setdefault(G.active, (G, []))[1].append(i)
    # one batched Newton solve per stratum
    for G, idx in groups.values():
        idx = np.asarray(idx)
        pts = xs[idx]
        uval = np.zeros(len(idx)) if G.dim == 0 else np.asarray(u0(P, G, pts, boundary_tol=0.0)[0], dtype=float)
        c = P.local_coords(F, pts) if F.dim else np.zeros((len(idx), 0))
        out[idx] = uval - c @ z.rho + phi_rho
    if single:
        return INFINITE if mask[0] else float(out[0])
    return np.ma.MaskedArray(out, mask=mask)


def tilted_rate(z: OrbitPoint, f: PLConvexFunction, t: float, x):
    """``I^{z,t}(x) = I^z(x) + t f(x) + sup_y(-t f(y) - I^z(y))``.

    The supremum equals ``psi_t(z)``.
    """
    P = z.polytope
    shift = psi_t(P, f, t, z).psi
    base = rate(z, x)
    if base is INFINITE:
        return INFINITE
    fx = f(np.asarray(x, dtype=float).reshape(-1, P.dim))
    if np.ma.isMaskedArray(base):
        return base + t * fx + shift
    return float(base + t * fx[0] + shift)


@dataclass(frozen=True, eq=False)
class RateFunction:
    """``I^z`` bundled with ``Lambda^z`` and its finite-level versions."""

    z: OrbitPoint

    def __call__(self, x):
        return rate(self.z, x)

    def log_mgf(self, tau, table: QTable | None = None):
        return log_mgf(self.z, tau, table)

    def tilted(self, f: PLConvexFunction, t: float, x):
        return tilted_rate(self.z, f, t, x)


def log_mgf(z: OrbitPoint, tau, table: QTable | None = None):
    """``Lambda^z(tau)``, or ``Lambda_N^z(tau)`` when a table is given.

    ``tau`` is in stratum coordinates, shape ``(dim,)`` or ``(n, dim)``.
    The limit is ``phi_F(rho + tau) - phi_F(rho)``; at a vertex both vanish.
    """
    _check_single(z)
    F = z.face
    tau = np.asarray(tau, dtype=float)
    single = tau.ndim <= 1
    n = 1 if single else tau.shape[0]
    taus = tau.reshape(n, F.dim)
    if F.dim == 0:
        out = np.zeros(n)
    elif table is None:
        out = _phi_z(z, taus) - _phi_z(z)[0]
    else:
        _, c, _ = _face_atoms(table, F)
        _, lt = _log_terms(table, z)
        lt = lt[0]
        base = logsumexp(lt)
        out = (logsumexp(lt[None, :] + taus @ c.T, axis=1) - base) / table.level
    return float(out[0]) if single else out


def grad_log_mgf(z: OrbitPoint, tau) -> np.ndarray:
    """``grad Lambda^z(tau) = grad phi_F(rho + tau)`` (face coordinates)."""
    F = z.face
    tau = np.asarray(tau, dtype=float)
    taus = tau.reshape(1 if tau.ndim <= 1 else tau.shape[0], F.dim)
    if F.dim == 0:
        return np.zeros((len(taus), 0))
    _, g, _ = _phi_rows(lattice_table(z.polytope, F), z.rows() + taus, order=1)
    return g[0] if np.ndim(tau) <= 1 else g


def conjugate_check(z: OrbitPoint, x):
    """Compare ``sup_tau(<c, tau> - Lambda^z(tau))`` with ``I^z(x)``.

    Returns
    -------
    residual : float
    tau_star : ndarray
        The maximizing ``tau``, which equals ``grad u_F(x) - rho``.
    """
    _check_single(z)
    P, F = z.polytope, z.face
    x = np.asarray(x, dtype=float)
    if F.dim == 0:
        val = rate(z, x)
        return (0.0 if val == 0.0 else float("nan")), np.zeros(0)
    c = P.local_coords(F, x[None])
    pts = lattice_table(P, F)
    shift = pts @ z.rho  # phi(rho + tau) as a log-sum-exp in tau

    def oracle(tau, idx):
        s = tau @ pts.T + shift[None, :]
        val = logsumexp(s, axis=1)
        w = np.exp(s - val[:, None])
        g = w @ pts
        H = np.einsum("na,ai,aj->nij", w, pts, pts) - g[:, :, None] * g[:, None, :]
        return val - np.einsum("ij,ij->i", c[idx], tau), g - c[idx], H

    tau, _ = _newton.minimize(oracle, np.zeros((1, F.dim)))
    sup = float(c[0] @ tau[0] - logsumexp(tau[0] @ pts.T + shift) + _phi_z(z)[0])
    residual = abs(sup - rate(z, x))
    return residual, tau[0]


# -- reports --------------------------------------------------------------


@dataclass
class LDPReport:
    """``(level, quantity, value)`` records, in computation order."""

    records: list[tuple[int, str, float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, level: int, quantity: str, value) -> None:
        self.records.append((int(level), quantity, float(value)))

    def series(self, quantity: str) -> list[tuple[int, float]]:
        return [(k, v) for k, q, v in self.records if q == quantity]

    def values(self, quantity: str) -> np.ndarray:
        return np.array([v for _, v in self.series(quantity)])


def _in_boxes(points: np.ndarray, boxes) -> np.ndarray:
    inside = np.zeros(len(points), dtype=bool)
    for lo, hi in boxes:
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        inside |= np.all((points >= lo - 1e-12) & (points <= hi + 1e-12), axis=1)
    return inside


def _inf_rate(z: OrbitPoint, boxes, resolution: int) -> tuple[float, np.ndarray]:
    """Minimum of ``I^z`` over the boxes intersected with the closed polytope."""
    P = z.polytope
    best, arg = np.inf, None
    mu = moment0(P, z)
    for lo, hi in boxes:
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        if P.dim == 1:
            # I^z is convex with minimum at mu_0(z): the box minimum is the projection
            cands = np.clip(mu, lo, hi)[None]
        else:
            axes = [np.linspace(lo[i], hi[i], resolution) for i in range(P.dim)]
            cands = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
            cands = np.vstack([cands, np.clip(mu, lo, hi)[None]])
        keep = np.min(P.slacks(cands), axis=1) >= -1e-12
        cands = cands[keep]
        if not len(cands):
            continue
        vals = rate(z, cands)
        if np.ma.isMaskedArray(vals):
            if vals.mask.all():
                continue
            i = int(np.ma.argmin(vals))
            val = float(vals[i])
        else:
            i, val = 0, float(vals)
        if val < best:
            best, arg = val, cands[i]
    return best, arg


def ldp_bounds(z: OrbitPoint, boxes, tables: list[QTable], resolution: int = 101, eps: float = 0.1, x0=None) -> LDPReport:
    """Upper and lower large-deviation bounds on a finite union of boxes.

    Records per level ``N``: ``log_mass`` ``(1/N) log mu_N^z(K)`` (omitted
    when ``K`` holds no atom of positive mass), ``inf_rate`` and the
    ``gap = log_mass + inf_rate``.  With ``x0`` given, also the mass of the
    sublevel set ``{I^z < I^z(x0) + eps}`` against ``-I^z(x0) - eps``.
    """
    _check_single(z)
    report = LDPReport()
    inf_rate, _ = _inf_rate(z, boxes, resolution)
    if x0 is not None:
        i0 = rate(z, np.asarray(x0, float))
    for Q in tables:
        N = Q.level
        alphas, lt = _log_terms(Q, z)
        lt = lt[0] - logsumexp(lt[0])
        atoms = alphas / N
        inside = _in_boxes(atoms, boxes)
        report.add(N, "inf_rate", inf_rate if np.isfinite(inf_rate) else np.inf)
        if not inside.any():
            report.notes.append(f"level {N}: {EmptyIntersection.__name__}: no support atom in K")
            report.add(N, "log_mass", -np.inf)
            continue
        lm = logsumexp(lt[inside]) / N
        report.add(N, "log_mass", lm)
        if np.isfinite(inf_rate):
            report.add(N, "gap", lm + inf_rate)
        if x0 is not None and not is_infinite(i0):
            full = rate(z, atoms)
            sub = np.zeros(len(atoms), dtype=bool)
            ok = ~np.ma.getmaskarray(full)
            sub[ok] = np.asarray(full[ok]) < i0 + eps
            if sub.any():
                report.add(N, "sublevel_log_mass", logsumexp(lt[sub]) / N)
                report.add(N, "sublevel_bound", -i0 - eps)
    return report


def varadhan_check(z: OrbitPoint, f: PLConvexFunction, t: float, tables: list[QTable]) -> LDPReport:
    """Laplace-principle and tilted-concentration diagnostics per level.

    Records ``delta`` ``|psi_N(t) - psi_t|`` (the Laplace limit
    ``sup(-t f - I^z)`` is ``psi_t(z)``), ``bary_error`` for the tilted
    barycenter against ``mu_t(z)`` and ``argmin_error`` for the minimizer of
    ``I^{z,t}`` over the level's atoms.
    """
    _check_single(z)
    P = z.polytope
    sol = psi_t(P, f, t, z)
    report = LDPReport()
    for Q in tables:
        N = Q.level
        report.add(N, "delta", abs(psi_k(Q, f, t, z) - sol.psi))
        bary = mu_k_tilted(Q, z, f, t).mean()
        report.add(N, "bary_error", float(np.max(np.abs(bary - sol.mu))))
        atoms = P.lattice_points(N, face=None) / N
        vals = tilted_rate(z, f, t, atoms)
        i = int(np.ma.argmin(vals))
        report.add(N, "argmin_error", float(np.max(np.abs(atoms[i] - sol.mu))))
    return report
