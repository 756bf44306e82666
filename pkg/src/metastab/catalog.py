"""Named test landscapes with their critical points and local profiles.

Entries
-------
double_well_{1,2,3}d
    ``(x_1^2-1)^2/4 + |x'|^2/2``: two minima, one non-degenerate saddle.
degenerate_p4, degenerate_p6
    saddle whose descent profile is ``|s|^p`` (zero Hessian eigenvalue).
triple_parallel
    three identical saddles at height 1/4 joining the same two islands.
triple_parallel_staggered
    same geometry with saddle heights near 0.25, 0.30 and 0.40.
chain_series_2, chain_series_3
    wells in a row joined by 2 or 3 saddles of equal height.
harmonic_2d
    a convex quadratic with a single minimum.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import profiles as pr
from .errors import NoConvergence
from .potential import (CriticalPoint, LocalProfile, Modulus, Potential, chain, chain_knots,
                        degenerate, double_well, fit_modulus, quadratic_potential,
                        triple_saddle)


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    name: str
    potential: Potential
    critical_points: tuple
    #: one of single, parallel, series
    expected_topology: str
    box: np.ndarray
    delta: float
    x_a: np.ndarray
    x_b: np.ndarray
    h: float
    description: str = ""

    @property
    def saddles(self) -> list:
        return [c for c in self.critical_points if is_saddle_like(c)]

    @property
    def minima(self) -> list:
        return [c for c in self.critical_points if c.kind == "minimum"]


def is_saddle_like(cp: CriticalPoint) -> bool:
    """Index-one saddles, and degenerate points that carry a saddle profile."""
    if cp.kind == "saddle":
        return True
    return cp.kind == "degenerate" and cp.profile is not None and cp.profile.kind == "saddle"


def _oriented(vecs: np.ndarray) -> np.ndarray:
    # fix eigenvector signs so frames are reproducible
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    return vecs * np.where(signs == 0, 1.0, signs)


def profile_from_hessian(center, H, kind: str) -> LocalProfile:
    """Quadratic profiles read off a non-degenerate Hessian."""
    center = np.asarray(center, dtype=float)
    lam, vecs = np.linalg.eigh(np.atleast_2d(H))
    vecs = _oriented(vecs)
    if kind == "minimum":
        if lam.min() <= 0:
            raise ValueError("a minimum profile needs a positive definite Hessian")
        return LocalProfile("minimum", center, vecs,
                            pr.separable(*(pr.quadratic(v) for v in lam)))
    if kind == "saddle":
        if lam[0] >= 0 or (lam.size > 1 and lam[1] <= 0):
            raise ValueError("a saddle profile needs exactly one negative eigenvalue")
        G = pr.separable(*(pr.quadratic(v) for v in lam[1:])) if lam.size > 1 else None
        return LocalProfile("saddle", center, vecs, G, pr.quadratic(-lam[0]))
    raise ValueError(f"unknown kind {kind!r}")


def _cp(F: Potential, x, kind: str, profile: LocalProfile | None = None) -> CriticalPoint:
    x = np.asarray(x, dtype=float)
    H = F.hessian(x)
    lam, vecs = np.linalg.eigh(H)
    if profile is None and kind in ("minimum", "saddle"):
        profile = profile_from_hessian(x, H, kind)
    return CriticalPoint(x, float(F.eval(x)), kind, lam, profile, vecs)


def newton_refine(F: Potential, x0, tol: float = 1e-13, maxit: int = 100) -> np.ndarray:
    """Newton iteration on ``grad F = 0``."""
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(maxit):
        step = np.linalg.lstsq(F.hessian(x), F.grad(x), rcond=None)[0]
        x -= step
        if np.linalg.norm(step) < tol:
            return x
    raise NoConvergence(f"Newton did not converge from {x0}")


def _finish(F: Potential, cps: list, delta: float, **kw) -> tuple[Potential, tuple]:
    omega = fit_modulus(F, cps, delta)
    F = replace(F, omega=omega, known=tuple(cps))
    return F, tuple(cps)


def _double_well(n: int) -> CatalogEntry:
    F = double_well(n)
    e = np.eye(n)[0]
    cps = [_cp(F, -e, "minimum"), _cp(F, np.zeros(n), "saddle"), _cp(F, e, "minimum")]
    delta = 0.3
    F, cps = _finish(F, cps, delta)
    box = np.array([[-2.2, 2.2]] + [[-2.0, 2.0]] * (n - 1))
    h = {1: 0.005, 2: 0.01, 3: 0.05}[n] if n <= 3 else 0.1
    return CatalogEntry(f"double_well_{n}d", F, cps, "single", box, delta, -e, e, h,
                        "quartic double well with quadratic transverse confinement")


def _degenerate(p: int) -> CatalogEntry:
    F = degenerate(p)
    saddle_prof = LocalProfile("saddle", np.zeros(2), np.eye(2), pr.quadratic(1.0),
                               pr.power(float(p)))
    cps = [_cp(F, [-1.0, 0.0], "minimum"),
           _cp(F, [0.0, 0.0], "degenerate", saddle_prof),
           _cp(F, [1.0, 0.0], "minimum")]
    delta = 0.3
    F, cps = _finish(F, cps, delta)
    box = np.array([[-1.6, 1.6], [-1.6, 1.6]])
    return CatalogEntry(f"degenerate_p{p}", F, cps, "single", box, delta,
                        np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 0.01,
                        f"saddle with descent profile |s|^{p}")


def _triple(staggered: bool) -> CatalogEntry:
    L = 1.6
    a = (1.0, -0.2, 0.4) if staggered else (1.0, 0.0, 0.0)
    name = "triple_parallel_staggered" if staggered else "triple_parallel"
    F = triple_saddle(L, a, name=name)
    ys = L * np.sqrt(np.sqrt(5.0) - 2.0)
    guesses = []
    for u in (-1.0, 1.0):
        for y in (-L, 0.0, L):
            guesses.append(([u, y], "minimum"))
        for y in (-ys, ys):
            guesses.append(([u, y], "saddle"))
    for y in (-L, 0.0, L):
        guesses.append(([0.0, y], "saddle"))
    for y in (-ys, ys):
        guesses.append(([0.0, y], "maximum"))
    cps = [_cp(F, newton_refine(F, x), kind) for x, kind in guesses]
    cps.sort(key=lambda c: (c.value, tuple(c.location)))
    delta = 0.3
    F, cps = _finish(F, cps, delta)
    box = np.array([[-2.0, 2.0], [-3.0, 3.0]])
    desc = ("three saddles near heights 0.25, 0.30, 0.40" if staggered
            else "three identical saddles at height 0.25")
    return CatalogEntry(name, F, cps, "parallel", box, delta, np.array([-1.0, 0.0]),
                        np.array([1.0, 0.0]), 0.02, desc)


def _chain(values, name: str) -> CatalogEntry:
    F = chain(values, name=name)
    kx = chain_knots(values)
    cps = []
    for i, (x, v) in enumerate(zip(kx, values)):
        cps.append(_cp(F, [x, 0.0], "minimum" if i % 2 == 0 else "saddle"))
    delta = 0.3
    F, cps = _finish(F, cps, delta)
    half = 0.5 * (kx[-1] - kx[0]) + 1.4
    box = np.array([[-half, half], [-1.6, 1.6]])
    nw = (len(values) + 1) // 2
    return CatalogEntry(name, F, cps, "series", box, delta, np.array([kx[0], 0.0]),
                        np.array([kx[-1], 0.0]), 0.02,
                        f"{nw} wells in a row joined by {nw - 1} saddles at height 0")


def _harmonic() -> CatalogEntry:
    c = np.array([0.3, -0.2])
    F = quadratic_potential(np.diag([1.0, 2.0]), c, name="harmonic_2d")
    cps = [_cp(F, c, "minimum")]
    F = replace(F, omega=Modulus(1e-12, 1.5), known=tuple(cps))
    box = np.array([[-2.0, 2.0], [-2.0, 2.0]])
    return CatalogEntry("harmonic_2d", F, tuple(cps), "single", box, 0.3, c, c, 0.02,
                        "convex quadratic with one minimum")


CHAIN_2 = (-0.3, 0.0, -0.25, 0.0, -0.3)
CHAIN_3 = (-0.3, 0.0, -0.25, 0.0, -0.25, 0.0, -0.3)

_BUILDERS: dict[str, Callable[[], CatalogEntry]] = {
    "double_well_1d": lambda: _double_well(1),
    "double_well_2d": lambda: _double_well(2),
    "double_well_3d": lambda: _double_well(3),
    "degenerate_p4": lambda: _degenerate(4),
    "degenerate_p6": lambda: _degenerate(6),
    "triple_parallel": lambda: _triple(False),
    "triple_parallel_staggered": lambda: _triple(True),
    "chain_series_2": lambda: _chain(CHAIN_2, "chain_series_2"),
    "chain_series_3": lambda: _chain(CHAIN_3, "chain_series_3"),
    "harmonic_2d": _harmonic,
}


def catalog_names() -> list[str]:
    return list(_BUILDERS)


@lru_cache(maxsize=None)
def get_entry(name: str) -> CatalogEntry:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; known: {', '.join(_BUILDERS)}") from None


def make_quadratic_double_well(n: int) -> Potential:
    """Quartic double well in ``R^n`` with its critical points attached."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    if n <= 3:
        return get_entry(f"double_well_{n}d").potential
    return _double_well(n).potential


def make_degenerate_saddle(p: int) -> Potential:
    """Two wells joined by a saddle with descent profile ``|s|^p``."""
    if p in (4, 6):
        return get_entry(f"degenerate_p{p}").potential
    return _degenerate(p).potential
