"""Experiment configuration: a flat TOML document mapped onto dataclasses."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import sympy
import tomli
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .catalog import catalog_names, get_entry
from .errors import ConfigInvalid
from .lattice import NODE_BUDGET
from .potential import Potential, polynomial_potential

TASKS = ("critical_points", "network", "d_eps", "v_eps", "capacity_geometric", "capacity_pde",
         "ek_classical", "simulate", "exit_bound", "convex_checks")
POLY_PREFIX = "poly:"
_VARS = ("x", "y", "z")


@dataclass(frozen=True)
class LatticeSettings:
    box: Optional[tuple] = None
    h: Optional[float] = None
    budget: int = NODE_BUDGET


@dataclass(frozen=True)
class SimSettings:
    #: None picks 0.1 eps / max|grad F|^2 per noise level
    dt: Optional[float] = None
    paths: int = 500
    max_steps: int = 5_000_000
    hit_radius: float = 0.1
    threads: int = 1
    raw_csv: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    potential: str
    eps_list: tuple
    tasks: tuple
    delta: Optional[float] = None
    lattice: LatticeSettings = field(default_factory=LatticeSettings)
    sim: SimSettings = field(default_factory=SimSettings)
    output: str = "results"
    seed: int = 0
    x_a: Optional[tuple] = None
    x_b: Optional[tuple] = None
    #: constant in the exit-time bound
    bound_C: float = 1.0
    #: dimension of an inline polynomial when it exceeds the variables used
    dim: Optional[int] = None

    def canonical(self) -> dict:
        """Everything that can change results; output path and thread count excluded."""
        d = asdict(self)
        d.pop("output")
        d["sim"].pop("threads")
        return d

    def sha256(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------
# inline polynomials


def parse_polynomial(text: str, dim: Optional[int] = None) -> Potential:
    """``"poly: 0.25*x**4 - 0.5*x**2 + 0.5*y**2"`` as a :class:`Potential`.

    Variables are ``x, y, z`` or ``x1 ... x9``; only sums of monomials with
    real coefficients are accepted.
    """
    body = text[len(POLY_PREFIX):] if text.startswith(POLY_PREFIX) else text
    if not re.fullmatch(r"[\sA-Za-z0-9_.+\-*/()^eE]*", body):
        raise ConfigInvalid("potential", "inline polynomial has illegal characters")
    body = body.replace("^", "**")
    names = set(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", body))
    indexed = sorted(n for n in names if re.fullmatch(r"x[1-9]", n))
    plain = [n for n in _VARS if n in names]
    if indexed and plain and plain != ["x"]:
        raise ConfigInvalid("potential", "mix of x1.. and x, y, z variables")
    if indexed:
        n = max(int(v[1:]) for v in indexed)
        syms = sympy.symbols(" ".join(f"x{k}" for k in range(1, n + 1)), real=True)
    else:
        n = max([_VARS.index(v) + 1 for v in plain] or [1])
        syms = sympy.symbols(" ".join(_VARS[:n]), real=True)
    syms = tuple(np.atleast_1d(syms))
    if dim is not None:
        if dim < n:
            raise ConfigInvalid("dim", f"polynomial uses {n} variables")
        extra = sympy.symbols(" ".join(f"_pad{k}" for k in range(dim - n)), real=True) \
            if dim > n else ()
        syms = syms + tuple(np.atleast_1d(extra))
    local = {str(s): s for s in syms}
    unknown = names - set(local) - {"e", "E"}
    if unknown:
        raise ConfigInvalid("potential", f"unknown names {sorted(unknown)}")
    try:
        expr = parse_expr(body, local_dict=local, global_dict={"Integer": sympy.Integer,
                                                                "Float": sympy.Float,
                                                                "Rational": sympy.Rational,
                                                                "Symbol": sympy.Symbol},
                          transformations=standard_transformations)
        poly = sympy.Poly(sympy.expand(expr), *syms)
    except (SyntaxError, TypeError, sympy.PolynomialError, sympy.SympifyError) as exc:
        raise ConfigInvalid("potential", f"not a polynomial: {exc}") from None
    terms = poly.terms()
    if poly.is_zero:
        raise ConfigInvalid("potential", "polynomial is zero")
    coeffs = [float(c) for _, c in terms]
    exps = [list(m) for m, _ in terms]
    return polynomial_potential(coeffs, exps, name=text.strip())


# --------------------------------------------------------------------------
# loading


def _get(doc: dict, key: str, typ, default=None, path: str | None = None):
    path = path or key
    if key not in doc:
        return default
    val = doc[key]
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
        raise ConfigInvalid(path, f"expected {getattr(typ, '__name__', typ)}, got {val!r}")
    return val


def _point(doc: dict, key: str) -> Optional[tuple]:
    v = doc.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or not all(isinstance(t, (int, float)) for t in v):
        raise ConfigInvalid(key, "expected a list of numbers")
    return tuple(float(t) for t in v)


def config_from_dict(doc: dict) -> ExperimentConfig:
    known = {"potential", "eps", "tasks", "delta", "lattice", "sim", "output", "seed", "x_a",
             "x_b", "bound_C", "dim"}
    for k in doc:
        if k not in known:
            raise ConfigInvalid(k, "unknown key")
    pot = _get(doc, "potential", str)
    if pot is None:
        raise ConfigInvalid("potential", "required")
    inline = pot.startswith(POLY_PREFIX)
    if inline:
        parse_polynomial(pot, _get(doc, "dim", int))
    elif pot not in catalog_names():
        raise ConfigInvalid("potential", f"unknown catalog entry {pot!r}")

    eps = doc.get("eps")
    if not isinstance(eps, list) or not eps:
        raise ConfigInvalid("eps", "need a nonempty list of noise levels")
    for k, e in enumerate(eps):
        if not isinstance(e, (int, float)) or isinstance(e, bool) or e <= 0:
            raise ConfigInvalid(f"eps[{k}]", "must be a positive number")
    eps = [float(e) for e in eps]
    if any(a <= b for a, b in zip(eps, eps[1:])):
        raise ConfigInvalid("eps", "must be strictly decreasing")

    tasks = doc.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        raise ConfigInvalid("tasks", "need a nonempty task list")
    for k, t in enumerate(tasks):
        if t not in TASKS:
            raise ConfigInvalid(f"tasks[{k}]", f"unknown task {t!r}")
    tasks = tuple(t for t in TASKS if t in tasks)

    lat = doc.get("lattice", {})
    if not isinstance(lat, dict):
        raise ConfigInvalid("lattice", "expected a table")
    for k in lat:
        if k not in ("box", "h", "budget"):
            raise ConfigInvalid(f"lattice.{k}", "unknown key")
    box = lat.get("box")
    if box is not None:
        try:
            arr = np.asarray(box, dtype=float)
        except (TypeError, ValueError):
            raise ConfigInvalid("lattice.box", "expected [[lo, hi], ...]") from None
        if arr.ndim != 2 or arr.shape[1] != 2 or np.any(arr[:, 1] <= arr[:, 0]):
            raise ConfigInvalid("lattice.box", "expected [[lo, hi], ...] with lo < hi")
        box = tuple(tuple(float(v) for v in row) for row in arr)
    h = _get(lat, "h", float, path="lattice.h")
    if h is not None and h <= 0:
        raise ConfigInvalid("lattice.h", "must be positive")
    budget = _get(lat, "budget", int, NODE_BUDGET, "lattice.budget")
    if inline and box is None:
        raise ConfigInvalid("lattice.box", "required for an inline polynomial")
    if not inline:
        entry = get_entry(pot)
        box_arr = np.asarray(box if box is not None else entry.box)
        h_eff = h if h is not None else entry.h
        if box is not None and box_arr.shape[0] != entry.potential.dim:
            raise ConfigInvalid("lattice.box", f"expected {entry.potential.dim} rows")
    else:
        box_arr = np.asarray(box)
        h_eff = h if h is not None else float(np.min(box_arr[:, 1] - box_arr[:, 0])) / 100
    nodes = np.prod([int(np.floor((b - a) / h_eff + 1e-9)) + 1 for a, b in box_arr],
                    dtype=float)
    if nodes > budget:
        raise ConfigInvalid("lattice.h", f"{nodes:.3g} nodes exceed the budget {budget}")

    s = doc.get("sim", {})
    if not isinstance(s, dict):
        raise ConfigInvalid("sim", "expected a table")
    for k in s:
        if k not in SimSettings.__dataclass_fields__:
            raise ConfigInvalid(f"sim.{k}", "unknown key")
    sim = SimSettings(
        dt=_get(s, "dt", float, None, "sim.dt"),
        paths=_get(s, "paths", int, SimSettings.paths, "sim.paths"),
        max_steps=_get(s, "max_steps", int, SimSettings.max_steps, "sim.max_steps"),
        hit_radius=_get(s, "hit_radius", float, SimSettings.hit_radius, "sim.hit_radius"),
        threads=_get(s, "threads", int, 1, "sim.threads"),
        raw_csv=_get(s, "raw_csv", bool, False, "sim.raw_csv"),
    )
    if sim.paths < 1:
        raise ConfigInvalid("sim.paths", "need at least one path")
    if sim.dt is not None and sim.dt <= 0:
        raise ConfigInvalid("sim.dt", "must be positive")
    if sim.hit_radius <= 0:
        raise ConfigInvalid("sim.hit_radius", "must be positive")
    if sim.threads < 1:
        raise ConfigInvalid("sim.threads", "must be at least 1")

    delta = _get(doc, "delta", float)
    if delta is not None and delta <= 0:
        raise ConfigInvalid("delta", "must be positive")
    seed = _get(doc, "seed", int, 0)
    if seed < 0:
        raise ConfigInvalid("seed", "must be nonnegative")
    return ExperimentConfig(
        potential=pot, eps_list=tuple(eps), tasks=tasks, delta=delta,
        lattice=LatticeSettings(box, h, budget), sim=sim,
        output=_get(doc, "output", str, "results"), seed=seed,
        x_a=_point(doc, "x_a"), x_b=_point(doc, "x_b"),
        bound_C=_get(doc, "bound_C", float, 1.0),
        dim=_get(doc, "dim", int),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid(str(path), "file not found") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigInvalid(str(path), f"TOML syntax: {exc}") from None
    return config_from_dict(doc)
