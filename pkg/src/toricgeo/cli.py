"""Command-line driver: ``python -m toricgeo COMMAND --config FILE``.

Every command writes ``<command>.csv`` and ``<command>.json`` into the output
directory.  Floats are printed with 17 significant digits and rows are
emitted in a fixed order, so repeated runs are byte-identical whatever the
thread count.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _newton, __version__
from .bergman import (
    LevelBudgetExceeded,
    QuadratureFailure,
    convention_shift,
    d_psi_k,
    default_budget,
    mu_k_tilted,
    norming_constants,
    psi_k,
)
from .geodesic import psi_t, regularity_probe
from .ldp import ldp_bounds, log_mgf, varadhan_check
from .plconvex import TOL_ACTIVE, PLConvexFunction, futaki, pl_from_config
from .polytope import DelzantPolytope, PolytopeError, polytope_from_config
from .potentials import NoConvergence, NoRegionAccepted, OrbitPoint

COMMANDS = ("validate", "geodesic", "bergman", "converge", "ldp", "futaki", "regularity")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    polytope: dict
    f: dict | None
    k_values: list[int]
    t_values: list[float]
    rho_min: list[float]
    rho_max: list[float]
    rho_count: list[int]
    strata: list[str]
    newton_tol: float = 1e-12
    quad_rel_tol: float = 1e-12
    active_tol: float = TOL_ACTIVE
    output_dir: str | None = None
    factor2: bool = False
    add_tR: bool = False
    trace_normalize: bool = False
    level_budget: int | None = None
    boxes: list = field(default_factory=list)
    tau_min: float = -2.0
    tau_max: float = 2.0
    tau_count: int = 41
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _load_raw(path: Path) -> dict:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(data)
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(data.decode())
    except Exception as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from None


def _as_list(value, name: str, kind) -> list:
    if value is None:
        raise ConfigError(f"missing field '{name}'")
    if not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return [kind(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"field '{name}' has entries of the wrong type") from None


def parse_config(raw: dict) -> ExperimentConfig:
    """Check a parsed TOML/JSON document and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a table")
    if "polytope" not in raw or not isinstance(raw["polytope"], dict):
        raise ConfigError("missing field 'polytope'")
    k_values = _as_list(raw.get("k_values", [8]), "k_values", int)
    if not k_values:
        raise ConfigError("field 'k_values' must be a nonempty list")
    if any(k < 1 for k in k_values):
        raise ConfigError("field 'k_values' must contain positive integers")
    t_values = _as_list(raw.get("t_values", [1.0]), "t_values", float)
    if not t_values:
        raise ConfigError("field 't_values' must be a nonempty list")
    if any(t < 0 for t in t_values):
        raise ConfigError("field 't_values' must be nonnegative")
    grid = raw.get("rho_grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("field 'rho_grid' must be a table with min/max/count")
    rmin = _as_list(grid.get("min", [-6.0]), "rho_grid.min", float)
    rmax = _as_list(grid.get("max", [6.0]), "rho_grid.max", float)
    rcount = _as_list(grid.get("count", [241]), "rho_grid.count", int)
    if not (len(rmin) == len(rmax) == len(rcount)) or not rmin:
        raise ConfigError("field 'rho_grid' needs min, max and count of equal length")
    if any(c < 1 for c in rcount):
        raise ConfigError("field 'rho_grid.count' must be positive")
    if any(lo > hi for lo, hi in zip(rmin, rmax)):
        raise ConfigError("field 'rho_grid' has min > max")
    strata = _as_list(raw.get("strata", ["interior"]), "strata", str)
    for s in strata:
        if s not in ("interior", "facets", "vertices"):
            raise ConfigError(f"field 'strata' has unknown entry {s!r}")
    tol = raw.get("tolerances", {})
    conv = raw.get("convention", {})
    ldp = raw.get("ldp", {})
    cfg = ExperimentConfig(
        polytope=raw["polytope"],
        f=raw.get("f"),
        k_values=k_values,
        t_values=t_values,
        rho_min=rmin,
        rho_max=rmax,
        rho_count=rcount,
        strata=strata,
        newton_tol=float(tol.get("newton_tol", 1e-12)),
        quad_rel_tol=float(tol.get("quad_rel_tol", 1e-12)),
        active_tol=float(tol.get("active_tol", TOL_ACTIVE)),
        output_dir=raw.get("output_dir"),
        factor2=bool(conv.get("factor2", False)),
        add_tR=bool(conv.get("add_tR", False)),
        trace_normalize=bool(conv.get("trace_normalize", False)),
        level_budget=raw.get("level_budget"),
        boxes=ldp.get("boxes", []),
        tau_min=float(ldp.get("tau_min", -2.0)),
        tau_max=float(ldp.get("tau_max", 2.0)),
        tau_count=int(ldp.get("tau_count", 41)),
        raw=raw,
    )
    for name in ("newton_tol", "quad_rel_tol", "active_tol"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"field 'tolerances.{name}' must be positive")
    if cfg.tau_count < 1:
        raise ConfigError("field 'ldp.tau_count' must be positive")
    return cfg


# -- formatting --------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return _fmt(v) if not np.isfinite(v) else float(_fmt(v))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


# -- runtime ------------------------------------------------------------------


@dataclass
class Context:
    cfg: ExperimentConfig
    P: DelzantPolytope
    f: PLConvexFunction
    threads: int
    cache: str | None
    phong_sturm: bool

    def table(self, k: int):
        level = k * self.f.d
        return norming_constants(
            self.P,
            level,
            rel_tol=self.cfg.quad_rel_tol,
            budget=self.cfg.level_budget,
            cache_dir=self.cache,
            threads=self.threads,
        )

    def flags(self) -> dict:
        if self.phong_sturm:
            return {"factor2": True, "add_tR": True, "trace_normalize": True}
        return {"factor2": self.cfg.factor2, "add_tR": self.cfg.add_tR, "trace_normalize": self.cfg.trace_normalize}


def _axes(cfg: ExperimentConfig, dim: int) -> list[np.ndarray]:
    n = len(cfg.rho_min)
    axes = []
    for i in range(dim):
        j = min(i, n - 1)
        axes.append(np.linspace(cfg.rho_min[j], cfg.rho_max[j], cfg.rho_count[j]))
    return axes


def _grid(cfg: ExperimentConfig, dim: int) -> np.ndarray:
    if dim == 0:
        return np.zeros((1, 0))
    axes = _axes(cfg, dim)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


def _points(ctx: Context) -> list[OrbitPoint]:
    """Batched orbit points, one per stratum, in a fixed order."""
    P = ctx.P
    out = []
    if "interior" in ctx.cfg.strata:
        out.append(OrbitPoint(P, P.interior, _grid(ctx.cfg, P.dim)))
    if "facets" in ctx.cfg.strata:
        for F in P.facet_faces():
            if F.dim > 0:
                out.append(OrbitPoint(P, F, _grid(ctx.cfg, F.dim)))
    if "vertices" in ctx.cfg.strata:
        for i in range(len(P.vertices)):
            out.append(OrbitPoint(P, P.vertex_face(i), np.zeros((1, 0))))
    return out


def _chunks(point: OrbitPoint, size: int = 512) -> list[OrbitPoint]:
    rows = point.rows()
    return [OrbitPoint(point.polytope, point.face, rows[i : i + size]) for i in range(0, len(rows), size)]


def _map(ctx: Context, fn, items):
    if ctx.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(ctx.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _padded(v: np.ndarray, width: int) -> list:
    v = list(np.asarray(v, dtype=float).ravel())
    return v + [""] * (width - len(v))


def _cols(prefix: str, width: int) -> list[str]:
    return [prefix] if width == 1 else [f"{prefix}_{i + 1}" for i in range(width)]


# -- commands --------------------------------------------------------------------


def cmd_validate(ctx: Context):
    P, f = ctx.P, ctx.f
    header = ["kind", "index"] + _cols("x", P.dim) + ["info"]
    rows = []
    for i, (v, act) in enumerate(zip(P.vertices, P.vertex_facets)):
        rows.append(["vertex", i] + [Fraction(c) for c in v] + [" ".join(str(r) for r in sorted(act))])
    for j, (nu, vv) in enumerate(zip(f.nus, f.vs)):
        vol = next((c.volume for c in f.chambers if c.piece == j), Fraction(0))
        rows.append(["piece", j] + list(nu) + [f"v={vv} chamber_volume={vol}"])
    summary = {
        "dimension": P.dim,
        "facets": [[list(n), str(a)] for n, a in P.facets],
        "normalization": {
            "matrix": [list(r) for r in P.normalization.matrix],
            "shift": [str(c) for c in P.normalization.shift],
        },
        "n_vertices": len(P.vertices),
        "n_faces": len(P.faces),
        "volume": str(P.volume),
        "denominator_d": f.d,
        "R": f.R,
        "level_budget": ctx.cfg.level_budget or default_budget(P),
    }
    return header, rows, summary


def cmd_futaki(ctx: Context):
    P, f = ctx.P, ctx.f
    F1 = futaki(f)
    rows = [
        ["futaki", F1, float(F1)],
        ["volume", P.volume, float(P.volume)],
        ["boundary_volume", P.boundary_volume, float(P.boundary_volume)],
    ]
    return ["quantity", "exact", "value"], rows, {"futaki": str(F1)}


def cmd_geodesic(ctx: Context):
    P, f = ctx.P, ctx.f
    dmax = P.dim
    header = ["t"] + _cols("rho", dmax) + ["psi"] + _cols("mu", P.dim) + ["region", "stratum"]
    rows = []
    for t in ctx.cfg.t_values:
        for point in _points(ctx):
            sols = _map(ctx, lambda p: psi_t(P, f, t, p), _chunks(point))
            for sol in sols:
                for r, ps, mu, reg in zip(sol.point.rows(), sol.psi, sol.mu, sol.region):
                    rows.append([t] + _padded(r, dmax) + [ps] + list(mu) + [reg.label, point.face.label])
    return header, rows, {}


def cmd_bergman(ctx: Context):
    P, f = ctx.P, ctx.f
    flags = ctx.flags()
    dmax = P.dim
    header = ["k", "level", "t"] + _cols("rho", dmax) + ["psi_k"] + _cols("dpsi_rho", dmax) + ["dpsi_t", "stratum"]
    rows = []
    shifts = {}
    for k in ctx.cfg.k_values:
        Q = ctx.table(k)
        for t in ctx.cfg.t_values:
            s, shift = convention_shift(f, Q.level, t, **flags)
            shifts[f"k={k},t={_fmt(t)}"] = {"time": s, "offset": shift}
            for point in _points(ctx):
                def work(p):
                    return psi_k(Q, f, t, p, **flags), d_psi_k(Q, f, t, p)

                for p, (vals, (grad, dt)) in zip(_chunks(point), _map(ctx, work, _chunks(point))):
                    for r, v, g, d in zip(p.rows(), vals, grad, dt):
                        rows.append([k, Q.level, t] + _padded(r, dmax) + [v] + _padded(g, dmax) + [d, point.face.label])
    return header, rows, {"convention": flags, "shifts": shifts}


def cmd_converge(ctx: Context):
    """Sup-norm errors of psi_k, the tilted barycenter and d/dt psi_k."""
    P, f = ctx.P, ctx.f
    flags = ctx.flags()
    header = ["k", "level", "t", "sup_err_psi", "sup_err_bary", "sup_err_dt", "rate_ratio"]
    rows = []
    points = _points(ctx)
    for k in ctx.cfg.k_values:
        Q = ctx.table(k)
        for t in ctx.cfg.t_values:
            s, shift = convention_shift(f, Q.level, t, **flags)
            e_psi = e_bary = e_dt = 0.0
            for point in points:
                def work(p):
                    lim = psi_t(P, f, s, p)
                    val = psi_k(Q, f, t, p, **flags)
                    err_psi = np.max(np.abs(val - (lim.psi + shift)))
                    sol = psi_t(P, f, t, p) if s != t else lim
                    _, dt = d_psi_k(Q, f, t, p)
                    err_dt = np.max(np.abs(dt + f(sol.mu)))
                    err_b = 0.0
                    for r, mu in zip(p.rows(), sol.mu):
                        b = mu_k_tilted(Q, OrbitPoint(P, p.face, r), f, t).mean()
                        err_b = max(err_b, float(np.max(np.abs(b - mu))))
                    return err_psi, err_b, err_dt

                for a, b, c in _map(ctx, work, _chunks(point, 128)):
                    e_psi, e_bary, e_dt = max(e_psi, a), max(e_bary, b), max(e_dt, c)
            ratio = e_psi * k / np.log(k) if k > 1 else float("nan")
            rows.append([k, Q.level, t, e_psi, e_bary, e_dt, ratio])
    return header, rows, {"convention": flags}


def cmd_ldp(ctx: Context):
    P, f = ctx.P, ctx.f
    header = ["z_index", "stratum"] + _cols("rho", P.dim) + ["k", "level", "t", "quantity", "value"]
    rows = []
    tables = [ctx.table(k) for k in ctx.cfg.k_values]
    taus = np.linspace(ctx.cfg.tau_min, ctx.cfg.tau_max, ctx.cfg.tau_count)
    zi = 0
    for point in _points(ctx):
        dim = point.face.dim
        tau_grid = np.stack(np.meshgrid(*([taus] * dim), indexing="ij"), axis=-1).reshape(-1, dim) if dim else np.zeros((1, 0))
        singles = [OrbitPoint(P, point.face, r) for r in point.rows()]

        def work(z):
            out = []
            lim = log_mgf(z, tau_grid)
            for k, Q in zip(ctx.cfg.k_values, tables):
                fin = log_mgf(z, tau_grid, Q)
                out.append((k, Q.level, "", "lambda_sup_err", float(np.max(np.abs(np.atleast_1d(fin - lim))))))
            for t in ctx.cfg.t_values:
                rep = varadhan_check(z, f, t, tables)
                lv = {Q.level: k for k, Q in zip(ctx.cfg.k_values, tables)}
                for level, q, v in rep.records:
                    out.append((lv[level], level, t, q, v))
            if ctx.cfg.boxes:
                boxes = [(b["lo"], b["hi"]) for b in ctx.cfg.boxes]
                rep = ldp_bounds(z, boxes, tables)
                lv = {Q.level: k for k, Q in zip(ctx.cfg.k_values, tables)}
                for level, q, v in rep.records:
                    out.append((lv[level], level, "", q, v))
            return out

        for z, out in zip(singles, _map(ctx, work, singles)):
            for k, level, t, q, v in out:
                rows.append([zi, point.face.label] + _padded(z.rho, P.dim) + [k, level, t, q, v])
            zi += 1
    return header, rows, {}


def cmd_regularity(ctx: Context):
    P, f = ctx.P, ctx.f
    if P.dim > 2:
        raise ConfigError("field 'polytope': regularity probes support dimension 1 or 2")
    axes = _axes(ctx.cfg, P.dim)
    header = ["t"] + _cols("rho", P.dim) + ["psi", "psi_plus_phi", "det_hessian", "corner_cell"] + _cols("mu", P.dim) + ["region"]
    rows = []
    summary = {}
    for t in ctx.cfg.t_values:
        rep = regularity_probe(P, f, t, axes)
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, P.dim)
        for idx, r in enumerate(mesh):
            pos = np.unravel_index(idx, rep.psi.shape)
            rows.append(
                [t]
                + list(r)
                + [rep.psi[pos], rep.total[pos], rep.det_hessian[pos], bool(rep.corner_cells[pos])]
                + list(rep.mu[pos])
                + [rep.regions[pos]]
            )
        summary[f"t={_fmt(t)}"] = {
            "max_second_difference": rep.max_second_difference,
            "max_second_difference_total": rep.max_second_difference_total,
            "jumps": [[float(a), float(b)] for a, b in rep.jumps],
            "max_det_corner": rep.max_det_corner,
            "min_det_far": rep.min_det_far,
            "lipschitz_mu": rep.lipschitz_mu,
            "corner_band": rep.band,
        }
    return header, rows, summary


HANDLERS = {
    "validate": cmd_validate,
    "geodesic": cmd_geodesic,
    "bergman": cmd_bergman,
    "converge": cmd_converge,
    "ldp": cmd_ldp,
    "futaki": cmd_futaki,
    "regularity": cmd_regularity,
}


def run(command: str, cfg: ExperimentConfig, out_dir, threads: int = 1, cache=None, convention: str = "internal") -> Path:
    """Execute one command and write its CSV and JSON files; returns the CSV path."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        P = polytope_from_config(cfg.polytope)
    except (PolytopeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'polytope': {exc}") from None
    try:
        f = pl_from_config(P, cfg.f)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'f': {exc}") from None
    budget = cfg.level_budget or default_budget(P)
    if command in ("bergman", "converge", "ldp"):
        for k in cfg.k_values:
            if k * f.d > budget:
                raise ConfigError(f"field 'k_values': level k*d = {k * f.d} exceeds the budget {budget}")
    ctx = Context(cfg, P, f, max(1, int(threads)), None if cache is None else str(cache), convention == "phong-sturm")
    old_tol = _newton.NEWTON_TOL
    _newton.NEWTON_TOL = cfg.newton_tol
    try:
        header, rows, extra = HANDLERS[command](ctx)
    finally:
        _newton.NEWTON_TOL = old_tol
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = _csv_text(header, rows)
    csv_path = out / f"{command}.csv"
    csv_path.write_text(text)
    summary = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "convention": convention,
        "versions": {
            "toricgeo": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
            "python": platform.python_version(),
        },
        "columns": header,
        "rows": len(rows),
        "csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "details": extra,
    }
    (out / f"{command}.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return csv_path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="toricgeo", description="Toric geodesic rays, Bergman approximants and rate functions.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="TOML or JSON experiment file")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir or ./out)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cache", type=Path, default=None, help="directory for cached norming-constant tables")
    p.add_argument("--convention", choices=("internal", "phong-sturm"), default="internal")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(_load_raw(args.config))
        out = args.out or Path(cfg.output_dir or "out")
        path = run(args.command, cfg, out, threads=args.threads, cache=args.cache, convention=args.convention)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevelBudgetExceeded as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, NoRegionAccepted, QuadratureFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(path)
    return EXIT_OK
