"""Task orchestration: landscape, geometry, capacities, dynamics, reports."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .asymptotics import check_convex_profile, d_eps_formula, error_scale, v_eps_formula
from .capacity import (CapacityEstimate, assemble_capacity, classical_eyring_kramers,
                       saddle_geometry)
from .catalog import get_entry
from .config import POLY_PREFIX, ExperimentConfig, parse_polynomial
from .dynamics import (SimConfig, default_dt, exit_time_upper_bound, gibbs_mass_estimate,
                       predict_mean_exit_time, simulate_transition)
from .errors import EmptyResult, MissingData
from .landscape import extract_network, find_critical_points
from .lattice import build_lattice
from .potential import Modulus, Potential, fit_modulus
from .scaled import ScaledValue, scaled_inv, scaled_sum
from .transport import (geodesic_distance, min_separating_surface, potential_oscillation_on_islands,
                        solve_capacity_pde)

SCHEMA_VERSION = "1.0"

@dataclass
class ResultBundle:
    config: dict
    config_sha256: str
    records: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    landscape: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r["status"] == "ok" for r in self.records)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "package_version": __version__,
                "config": self.config, "config_sha256": self.config_sha256,
                "landscape": self.landscape, "status": "ok" if self.ok else "error",
                "records": self.records, "tables": self.tables, "timings": self.timings}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def find(self, task: str, eps: Optional[float] = None) -> list:
        return [r for r in self.records if r["task"] == task and (eps is None or r["eps"] == eps)]


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


@dataclass
class Problem:
    F: Potential
    box: np.ndarray
    h: float
    delta: float
    x_a: Optional[np.ndarray]
    x_b: Optional[np.ndarray]


def resolve_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.potential.startswith(POLY_PREFIX):
        F = parse_polynomial(cfg.potential, cfg.dim)
        box = np.asarray(cfg.lattice.box, dtype=float)
        h = cfg.lattice.h or float(np.min(box[:, 1] - box[:, 0])) / 100
        delta = cfg.delta if cfg.delta is not None else 0.3
        x_a = x_b = None
    else:
        e = get_entry(cfg.potential)
        F = e.potential
        box = np.asarray(cfg.lattice.box, dtype=float) if cfg.lattice.box else e.box
        h = cfg.lattice.h or e.h
        delta = cfg.delta if cfg.delta is not None else e.delta
        x_a, x_b = e.x_a, e.x_b
    if cfg.x_a is not None:
        x_a = np.asarray(cfg.x_a, dtype=float)
    if cfg.x_b is not None:
        x_b = np.asarray(cfg.x_b, dtype=float)
    return Problem(F, box, float(h), float(delta), x_a, x_b)


class _Context:
    """Lazily computed shared state; failures are cached and re-raised."""

    def __init__(self, cfg: ExperimentConfig, threads: int):
        self.cfg = cfg
        self.threads = threads
        self.problem = resolve_problem(cfg)
        self.out: Optional[Path] = None
        self._cache: dict = {}

    def get(self, key: str, build: Callable):
        if key not in self._cache:
            try:
                self._cache[key] = (True, build())
            except Exception as exc:  # noqa: BLE001 - recorded per task
                self._cache[key] = (False, exc)
        ok, val = self._cache[key]
        if not ok:
            raise val
        return val

    @property
    def cps(self):
        def build():
            P = self.problem
            cps = find_critical_points(P.F, P.box)
            if P.F.known:
                return cps
            # inline potentials: fit the modulus once critical points are known
            P.F = _with_modulus(P.F, cps, P.delta)
            return find_critical_points(P.F, P.box)
        return self.get("cps", build)

    @property
    def lattice(self):
        P = self.problem
        return self.get("lattice", lambda: build_lattice(P.F, P.box, P.h,
                                                         budget=self.cfg.lattice.budget))

    @property
    def endpoints(self):
        def build():
            P = self.problem
            if P.x_a is not None and P.x_b is not None:
                return P.x_a, P.x_b
            mins = [c for c in self.cps if c.kind == "minimum"]
            if len(mins) < 2:
                raise EmptyResult("need two minima to pick x_a and x_b")
            return P.x_a if P.x_a is not None else mins[0].location, \
                P.x_b if P.x_b is not None else mins[1].location
        return self.get("endpoints", build)

    @property
    def network(self):
        def build():
            x_a, x_b = self.endpoints
            return extract_network(self.problem.F, x_a, x_b, self.problem.delta, self.lattice,
                                   self.cps)
        return self.get("network", build)

    def geometric(self, eps: float) -> CapacityEstimate:
        net = self.network
        return self.get(f"geo{eps!r}", lambda: assemble_capacity(
            net, [saddle_geometry(b.saddle, eps) for b in net.bridges], eps))

    def balls(self, eps: float):
        x_a, x_b = self.endpoints
        L = self.lattice
        return L.ball(x_a, eps), L.ball(x_b, eps)

    def group_a(self):
        net = self.network
        return list(next(i for i in net.islands if i.id == net.island_a).minima)


def _with_modulus(F: Potential, cps, delta: float) -> Potential:
    from dataclasses import replace
    try:
        omega = fit_modulus(F, [c for c in cps if c.profile is not None], delta)
    except Exception:  # noqa: BLE001 - keep the default modulus
        return F
    return replace(F, omega=omega)


def _sv(v: ScaledValue, eps: float) -> dict:
    return v.to_dict(eps)


# --------------------------------------------------------------------------
# tasks


def task_critical_points(ctx: _Context, eps):
    return {"count": len(ctx.cps), "points": [c.to_dict() for c in ctx.cps]}


def task_network(ctx: _Context, eps):
    return ctx.network.to_dict()


def task_d_eps(ctx: _Context, eps):
    net = ctx.network
    bridges = [_sv(d_eps_formula(b.saddle.profile.g, b.saddle.value, eps), eps)
               for b in net.bridges]
    A, B = ctx.balls(eps)
    lat = geodesic_distance(ctx.lattice, A, B, eps, shift=net.height)
    return {"formula": bridges, "lattice": _sv(lat.value, eps)}


def task_v_eps(ctx: _Context, eps):
    net = ctx.network
    bridges = [_sv(v_eps_formula(b.saddle.profile.G, b.saddle.value, eps), eps)
               for b in net.bridges]
    A, B = ctx.balls(eps)
    cut = min_separating_surface(ctx.lattice, A, B, eps, shift=net.height)
    return {"formula": bridges, "lattice": _sv(cut.value, eps), "duality_gap": cut.duality_gap}


def task_capacity_geometric(ctx: _Context, eps):
    return ctx.geometric(eps).to_dict(eps)


def task_capacity_pde(ctx: _Context, eps):
    A, B = ctx.balls(eps)
    sol = solve_capacity_pde(ctx.lattice, A, B, eps, shift=ctx.network.height)
    osc = potential_oscillation_on_islands(sol, ctx.network)
    d = _sv(sol.energy, eps)
    d.update({"method": sol.method, "residual": sol.residual, "oscillation": osc.to_dict(),
              "checks": {"oscillation_below_5eps": osc.passed}})
    return d


def task_ek_classical(ctx: _Context, eps):
    net = ctx.network
    xmin = min(ctx.group_a(), key=lambda c: c.value)
    times = []
    for b in net.bridges:
        z = b.saddle
        lam1 = -float(np.min(z.spectrum))
        times.append(classical_eyring_kramers(lam1, z.spectrum, xmin.spectrum,
                                              z.value - xmin.value, eps))
    out = {"per_saddle": [_sv(t, eps) for t in times]}
    if net.topology == "parallel":
        rate = scaled_sum([scaled_inv(t, eps) for t in times], eps)
        out["prediction"] = _sv(scaled_inv(rate, eps), eps)
    return out


def task_simulate(ctx: _Context, eps):
    cfg, P = ctx.cfg, ctx.problem
    x_a, x_b = ctx.endpoints
    dt = cfg.sim.dt or default_dt(P.F, P.box, eps)
    sim = SimConfig(eps=eps, dt=dt, max_steps=cfg.sim.max_steps, seed=cfg.seed,
                    paths=cfg.sim.paths, hit_radius=cfg.sim.hit_radius, threads=ctx.threads)
    raw = None
    if cfg.sim.raw_csv and ctx.out is not None:
        raw = ctx.out / f"simulate_paths_eps{eps:g}.csv"
    stats = simulate_transition(P.F, x_a, [(x_b, None)], P.box, sim, csv_path=raw)
    out = stats.to_dict()
    out["dt"] = dt
    try:
        mass = gibbs_mass_estimate(P.F, ctx.group_a(), eps)
        pred = predict_mean_exit_time(mass, ctx.geometric(eps), eps)
        out["prediction"] = _sv(pred, eps)
        out["ratio_to_prediction"] = stats.mean / pred.value_at(eps)
    except Exception as exc:  # noqa: BLE001 - the simulation itself succeeded
        out["prediction_error"] = f"{type(exc).__name__}: {exc}"
    return out


def task_exit_bound(ctx: _Context, eps):
    b = exit_time_upper_bound(ctx.network, ctx.group_a(), eps, ctx.cfg.bound_C)
    return b.to_dict(eps)


def task_convex_checks(ctx: _Context, eps):
    rows = []
    for k, c in enumerate(ctx.cps):
        if c.profile is None:
            continue
        for which in ("G", "g"):
            G = getattr(c.profile, which)
            if G is None:
                continue
            r = check_convex_profile(G, eps)
            rows.append({"point": k, "profile": which, "name": G.name, "k": r.k,
                         "ratio": r.ratio, "ratio_ok": r.ratio_ok, "doubling_ok": r.doubling_ok,
                         "tail_ok": r.tail_ok, "passed": r.passed})
    return {"profiles": rows, "checks": {"all_passed": all(r["passed"] for r in rows)}}


TASK_FUNCS = {
    "critical_points": task_critical_points,
    "network": task_network,
    "d_eps": task_d_eps,
    "v_eps": task_v_eps,
    "capacity_geometric": task_capacity_geometric,
    "capacity_pde": task_capacity_pde,
    "ek_classical": task_ek_classical,
    "simulate": task_simulate,
    "exit_bound": task_exit_bound,
    "convex_checks": task_convex_checks,
}
EPS_FREE = ("critical_points", "network")


# --------------------------------------------------------------------------
# run


def run(cfg: ExperimentConfig, out: Optional[Path | str] = None,
        threads: Optional[int] = None) -> ResultBundle:
    """Execute the requested tasks in dependency order and write the results.

    Tasks run in the order of ``TASKS`` (landscape, geometry, capacities,
    dynamics); shared prerequisites are computed once on demand.  ``out``
    overrides ``cfg.output``; ``out=False`` writes nothing.
    """
    out = Path(out if out is not None else cfg.output) if out is not False else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg, threads or cfg.sim.threads)
    ctx.out = out
    bundle = ResultBundle(config=cfg.canonical(), config_sha256=cfg.sha256())
    for task in cfg.tasks:
        eps_values = [None] if task in EPS_FREE else list(cfg.eps_list)
        t0 = time.perf_counter()
        for eps in eps_values:
            rec = {"task": task, "eps": eps}
            try:
                rec["values"] = TASK_FUNCS[task](ctx, eps)
                rec["status"] = "ok"
            except Exception as exc:  # noqa: BLE001 - recorded, siblings continue
                rec["status"] = "error"
                rec["error"] = {"type": type(exc).__name__, "message": str(exc)}
            bundle.records.append(rec)
        bundle.timings[task] = time.perf_counter() - t0
    F = ctx.problem.F
    bundle.landscape = {"dim": F.dim, "name": F.name, "delta": ctx.problem.delta,
                        "h": ctx.problem.h, "box": ctx.problem.box,
                        "omega": {"K": F.omega.K, "power": F.omega.power}}
    try:
        table = compare_report(bundle)
    except MissingData:
        table = None
    if out is not None:
        _write_tables(bundle, out, table)
        (out / "results.json").write_text(bundle.to_json(), encoding="utf-8")
    return bundle


# --------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class CompareTable:
    rows: list
    trend: bool

    def to_dict(self) -> dict:
        return {"rows": self.rows, "trend": self.trend}


def _records(bundle) -> tuple[list, dict]:
    if isinstance(bundle, ResultBundle):
        return bundle.records, bundle.landscape
    return bundle["records"], bundle.get("landscape", {})


def _value(rec) -> Optional[float]:
    v = rec.get("values") or {}
    m, s = v.get("mantissa"), v.get("shift")
    if m is None or s is None:
        return None
    return ScaledValue(m, s).value_at(rec["eps"])


def compare_report(bundle, Cs=(1.0, 10.0)) -> CompareTable:
    """Ratio geometric / PDE capacity per noise level, with the error scale.

    ``trend`` is true when ``|ratio - 1|`` does not grow as the noise
    level decreases.
    """
    records, land = _records(bundle)
    geo = {r["eps"]: _value(r) for r in records
           if r["task"] == "capacity_geometric" and r["status"] == "ok"}
    pde = {r["eps"]: _value(r) for r in records
           if r["task"] == "capacity_pde" and r["status"] == "ok"}
    common = sorted((e for e in geo if e in pde and geo[e] and pde[e]), reverse=True)
    if len(common) < 2:
        raise MissingData("need geometric and pde capacities at two or more noise levels")
    om = land.get("omega") or {}
    omega = Modulus(om.get("K", 1.0), om.get("power", 1.5))
    n = int(land.get("dim", 1))
    rows = []
    for e in common:
        row = {"eps": e, "geometric": geo[e], "pde": pde[e], "ratio": geo[e] / pde[e]}
        for C in Cs:
            try:
                es = error_scale(omega, e, n, C, strict=False)
                row[f"eta_hat_C{C:g}"] = es.eta_hat
                row[f"within_assumptions_C{C:g}"] = es.within_assumptions
            except Exception:  # noqa: BLE001 - diagnostic only
                row[f"eta_hat_C{C:g}"] = None
                row[f"within_assumptions_C{C:g}"] = False
        rows.append(row)
    dev = [abs(r["ratio"] - 1.0) for r in rows]
    trend = all(b <= a + 1e-12 for a, b in zip(dev, dev[1:]))
    return CompareTable(rows, trend)


# --------------------------------------------------------------------------
# tables


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_tables(bundle: ResultBundle, out: Path, table: Optional[CompareTable]) -> None:
    rec = bundle.records
    files = {}
    cp = [r for r in rec if r["task"] == "critical_points" and r["status"] == "ok"]
    if cp:
        pts = cp[0]["values"]["points"]
        n = len(pts[0]["location"]) if pts else 0
        rows = [[k, p["kind"], p["value"], *p["location"],
                 " ".join(repr(float(v)) for v in (p["spectrum"] or []))]
                for k, p in enumerate(pts)]
        _write_csv(out / "critical_points.csv",
                   ["index", "kind", "value"] + [f"x{j + 1}" for j in range(n)] + ["spectrum"],
                   rows)
        files["critical_points"] = "critical_points.csv"
    nw = [r for r in rec if r["task"] == "network" and r["status"] == "ok"]
    if nw:
        v = nw[0]["values"]
        rows = [[k, v["topology"], b["height"], " ".join(repr(x) for x in b["saddle"]),
                 " ".join(str(x) for x in b["endpoints"])] for k, b in enumerate(v["bridges"])]
        _write_csv(out / "network.csv", ["bridge", "topology", "height", "saddle", "islands"],
                   rows)
        files["network"] = "network.csv"
    geo = [r for r in rec if r["task"] in ("d_eps", "v_eps") and r["status"] == "ok"]
    if geo:
        rows = []
        for r in geo:
            for k, b in enumerate(r["values"]["formula"]):
                rows.append([r["task"], r["eps"], "formula", k, b["mantissa"], b["shift"],
                             b["value_at_eps"]])
            b = r["values"]["lattice"]
            rows.append([r["task"], r["eps"], "lattice", "", b["mantissa"], b["shift"],
                         b["value_at_eps"]])
        _write_csv(out / "geometry.csv",
                   ["task", "eps", "source", "bridge", "mantissa", "shift", "value"], rows)
        files["geometry"] = "geometry.csv"
    caps = [r for r in rec if r["task"] in ("capacity_geometric", "capacity_pde", "exit_bound")
            and r["status"] == "ok"]
    if caps:
        rows = [[r["task"], r["eps"], r["values"]["mantissa"], r["values"]["shift"],
                 r["values"]["value_at_eps"]] for r in caps]
        _write_csv(out / "capacity.csv", ["task", "eps", "mantissa", "shift", "value"], rows)
        files["capacity"] = "capacity.csv"
    ek = [r for r in rec if r["task"] == "ek_classical" and r["status"] == "ok"]
    if ek:
        rows = [[r["eps"], k, t["mantissa"], t["shift"], t["value_at_eps"]]
                for r in ek for k, t in enumerate(r["values"]["per_saddle"])]
        _write_csv(out / "ek_classical.csv", ["eps", "saddle", "prefactor", "shift", "time"],
                   rows)
        files["ek_classical"] = "ek_classical.csv"
    sim = [r for r in rec if r["task"] == "simulate" and r["status"] == "ok"]
    if sim:
        rows = [[r["eps"], r["values"]["mean"], r["values"]["stderr"],
                 r["values"]["censored_fraction"], r["values"]["n_paths"], r["values"]["dt"],
                 (r["values"].get("prediction") or {}).get("value_at_eps")] for r in sim]
        _write_csv(out / "simulate.csv", ["eps", "mean", "stderr", "censored_fraction",
                                          "n_paths", "dt", "predicted"], rows)
        files["simulate"] = "simulate.csv"
    cc = [r for r in rec if r["task"] == "convex_checks" and r["status"] == "ok"]
    if cc:
        rows = [[r["eps"], p["point"], p["profile"], p["name"], p["ratio"], p["passed"]]
                for r in cc for p in r["values"]["profiles"]]
        _write_csv(out / "convex_checks.csv",
                   ["eps", "point", "profile", "name", "ratio", "passed"], rows)
        files["convex_checks"] = "convex_checks.csv"
    if table is not None:
        keys = list(table.rows[0])
        _write_csv(out / "compare.csv", keys + ["trend"],
                   [[r[k] for k in keys] + [table.trend] for r in table.rows])
        files["compare"] = "compare.csv"
    bundle.tables = files
