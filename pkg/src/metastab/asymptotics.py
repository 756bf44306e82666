"""Laplace integrals of convex profiles, level-set volumes and the error scale.

All integrals here have the form ``int exp(-G(y)/eps) dy`` for a convex
``G`` with a proper minimum ``0`` at the origin.  The integrand is
negligible once ``G > 40 eps`` (the discarded mass is below ``e^-39``
relative), so every integral is truncated there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import BoxTooSmall, NoRoot, NotProper
from .potential import Modulus
from .profiles import Profile, radial_root, sublevel_box
from .scaled import ScaledValue

TRUNCATION = 40.0


@dataclass(frozen=True)
class LaplaceResult:
    value: float
    method: str = "quadrature"
    stderr: float = 0.0


# --------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=None)
def _sphere_rule(k: int, resolution: int = 256):
    """Directions and weights integrating over the unit sphere ``S^{k-1}``."""
    if k == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if k == 2:
        th = 2 * np.pi * np.arange(4 * resolution) / (4 * resolution)
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(th.size, 2 * np.pi / th.size)
    if k == 3:
        z, wz = np.polynomial.legendre.leggauss(resolution // 4)
        nphi = resolution // 2
        phi = 2 * np.pi * np.arange(nphi) / nphi
        Z, P = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1 - Z ** 2)
        u = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()])
        w = (wz[:, None] * np.full(nphi, 2 * np.pi / nphi)[None, :]).ravel()
        return u, w
    raise ValueError("radial quadrature supports k <= 3")


@lru_cache(maxsize=None)
def _radial_rule(panels: int = 12, order: int = 16):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x[None, :] + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel()
    return nodes, weights


def _eval_rays(G: Profile, u: np.ndarray, r: np.ndarray) -> np.ndarray:
    # r has shape (m, q): radii per direction
    if G.dim == 1:
        return G(r * u[:, :1])
    pts = r[:, :, None] * u[:, None, :]
    return G(pts)


def radial_integral(G: Profile, fn: Callable[[np.ndarray], np.ndarray], r_lo, r_hi,
                    resolution: int = 256) -> float:
    """``int_{S} int_{r_lo(u)}^{r_hi(u)} fn(G(r u)) r^{k-1} dr du`` by product quadrature.

    ``r_lo`` and ``r_hi`` are callables mapping directions to radii.
    """
    k = G.dim
    u, wu = _sphere_rule(k, resolution)
    t, wt = _radial_rule()
    lo, hi = r_lo(u), r_hi(u)
    r = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    vals = fn(_eval_rays(G, u, r)) * r ** (k - 1)
    return float(np.sum(wu * (hi - lo) * (vals @ wt)))


# --------------------------------------------------------------------------
# Laplace integrals


def laplace_1d(g: Profile, eps: float, epsrel: float = 1e-11) -> LaplaceResult:
    """``int_R exp(-g(s)/eps) ds`` by adaptive quadrature on each half-line."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if g.dim != 1:
        raise ValueError("laplace_1d needs a one-dimensional profile")
    if abs(float(g(np.array([0.0]))[0])) > 1e-12:
        raise NotProper("profile must vanish at the origin")
    rp, rm = radial_root(g, TRUNCATION * eps, np.array([[1.0], [-1.0]]))

    def f(s):
        return math.exp(-float(g(np.array([s]))[0]) / eps)

    total = 0.0
    for a, b in ((0.0, rp), (-rm, 0.0)):
        val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=400)
        total += val
    return LaplaceResult(total)


def laplace_nd(G: Optional[Profile], eps: float, method: str = "quadrature",
               samples: int = 1_000_000, seed: int = 0) -> LaplaceResult:
    """``int_{R^k} exp(-G/eps)``: product rule when separable, radial otherwise.

    ``method="mc"`` gives a Monte-Carlo estimate over the truncation box with
    its standard error, useful as an independent cross-check.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if G is None:
        return LaplaceResult(1.0)
    if method == "mc":
        return _laplace_mc(G, eps, samples, seed)
    if G.dim == 1:
        return laplace_1d(G, eps)
    if G.separable:
        return LaplaceResult(float(np.prod([laplace_1d(f, eps).value for f in G.factors])))
    level = TRUNCATION * eps
    val = radial_integral(G, lambda v: np.exp(-v / eps), lambda u: np.zeros(u.shape[0]),
                          lambda u: radial_root(G, level, u))
    return LaplaceResult(val)


def _laplace_mc(G: Profile, eps: float, samples: int, seed: int) -> LaplaceResult:
    half = sublevel_box(G, TRUNCATION * eps)
    rng = np.random.Generator(np.random.Philox(key=seed))
    y = rng.uniform(-half, half, size=(samples, G.dim))
    vals = np.exp(-(G(y[:, 0]) if G.dim == 1 else G(y)) / eps)
    vol = float(np.prod(2 * half))
    return LaplaceResult(vol * float(vals.mean()), "levelset_mc",
                         vol * float(vals.std(ddof=1)) / math.sqrt(samples))


# --------------------------------------------------------------------------
# level sets


def levelset_volume(G: Profile, t: float, method: str = "auto", box=None,
                    samples: int = 1_000_000, seed: int = 0) -> LaplaceResult:
    """Lebesgue measure of ``{G < t}``.

    In one dimension the two boundary roots are found by bisection.  In
    higher dimension the default integrates ``r(u)^k / k`` over directions;
    ``method="mc"`` samples uniformly from ``box`` (half-widths) instead.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    k = G.dim
    if method == "auto":
        method = "bisection" if k == 1 else "radial"
    if box is not None:
        half = np.broadcast_to(np.asarray(box, dtype=float), (k,))
        reach = sublevel_box(G, t, safety=1.0)
        if np.any(reach >= half):
            raise BoxTooSmall(f"{{G < {t:g}}} reaches the sampler box {half}")
    if method == "bisection":
        u = np.array([[1.0], [-1.0]]) if k == 1 else None
        if u is None:
            raise ValueError("bisection volumes are one-dimensional")
        r = radial_root(G, t, u, iters=200)
        return LaplaceResult(float(r.sum()), "bisection")
    if method == "radial":
        u, w = _sphere_rule(k)
        r = radial_root(G, t, u)
        return LaplaceResult(float(np.sum(w * r ** k) / k), "radial")
    if method == "mc":
        half = sublevel_box(G, t) if box is None else half
        rng = np.random.Generator(np.random.Philox(key=seed))
        y = rng.uniform(-half, half, size=(samples, k))
        inside = (G(y[:, 0]) if k == 1 else G(y)) < t
        vol = float(np.prod(2 * half))
        p = float(inside.mean())
        return LaplaceResult(vol * p, "levelset_mc", vol * math.sqrt(p * (1 - p) / samples))
    raise ValueError(f"unknown method {method!r}")


def sandwich_constant(k: int) -> float:
    """``2^k sum_{j>=0} e^{-j} (j+1)^k``."""
    j = np.arange(400)
    return float(2 ** k * np.sum(np.exp(-j) * (j + 1.0) ** k))


def tail_constant(k: int) -> float:
    """Constant in the tail bound ``int_{G >= L eps} / int <= C e^{-L} L^k``."""
    return math.e ** 2 * 2 ** k * sandwich_constant(k)


def tail_fraction(G: Profile, eps: float, Lambda: float) -> float:
    """Share of ``int exp(-G/eps)`` carried by ``{G >= Lambda eps}``."""
    total = laplace_nd(G, eps).value
    lo_level, hi_level = Lambda * eps, (Lambda + TRUNCATION) * eps
    if G.dim == 1:
        f = lambda s: math.exp(-float(G(np.array([s]))[0]) / eps)
        a = radial_root(G, lo_level, np.array([[1.0], [-1.0]]))
        b = radial_root(G, hi_level, np.array([[1.0], [-1.0]]))
        tail = (integrate.quad(f, a[0], b[0], epsabs=0.0, epsrel=1e-10)[0]
                + integrate.quad(f, -b[1], -a[1], epsabs=0.0, epsrel=1e-10)[0])
    else:
        tail = radial_integral(G, lambda v: np.exp(-v / eps),
                               lambda u: radial_root(G, lo_level, u),
                               lambda u: radial_root(G, hi_level, u))
    return tail / total


@dataclass(frozen=True)
class ConvexProfileReport:
    k: int
    eps: float
    integral: float
    volume: float
    ratio: float
    ratio_bounds: tuple
    ratio_ok: bool
    doubling: tuple
    doubling_ok: bool
    Lambda: float
    tail: float
    tail_bound: float
    tail_ok: bool

    @property
    def passed(self) -> bool:
        return self.ratio_ok and self.doubling_ok and self.tail_ok


def check_convex_profile(G: Profile, eps: float, Lambda: float = 20.0) -> ConvexProfileReport:
    """Sandwich, doubling and tail inequalities for a convex profile."""
    k = G.dim
    I = laplace_nd(G, eps).value
    vol = levelset_volume(G, eps).value
    ratio = I / vol
    lo, hi = math.exp(-1.0), sandwich_constant(k)
    dbl = []
    for t in (eps, 2 * eps, 4 * eps):
        dbl.append(levelset_volume(G, 2 * t).value / levelset_volume(G, t).value)
    tail = tail_fraction(G, eps, Lambda)
    bound = tail_constant(k) * math.exp(-Lambda) * Lambda ** k
    return ConvexProfileReport(k, eps, I, vol, ratio, (lo, hi), lo <= ratio <= hi, tuple(dbl),
                             all(d <= 2 ** k * (1 + 1e-9) for d in dbl), Lambda, tail, bound,
                             tail <= bound)


# --------------------------------------------------------------------------
# error scale


def eta(x: float, n: int) -> float:
    """``exp(-1/x) x^n``, extended by 0 at 0."""
    if x <= 0:
        return 0.0
    return math.exp(-1.0 / x) * x ** n


@dataclass(frozen=True)
class ErrorScale:
    eps: float
    eps1: float
    eta_hat: float
    C: float
    n: int
    #: omega(eps1) / eps, which tends to 0 with eps
    omega_ratio: float
    #: False when the root lies outside [eps, 4 delta0]
    within_assumptions: bool = True


def error_scale(omega: Modulus, eps: float, n: int, C: float = 1.0,
                strict: bool = True) -> ErrorScale:
    """Solve ``sqrt(omega(eps1) eps1) = eps`` and evaluate ``eta(C eps / eps1)``.

    The root is bracketed in ``[eps, 4 delta0]``.  With ``strict=False`` the
    bracket is widened when needed and the result is flagged.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    phi = lambda s: math.sqrt(float(omega(s)) * s)
    lo, hi = eps, 4 * omega.delta0
    within = True
    if not (phi(lo) <= eps <= phi(hi)) or lo > hi:
        if strict:
            raise NoRoot(f"no root of sqrt(omega(s) s) = {eps:g} in [{lo:g}, {hi:g}]")
        within = False
        lo = min(lo, hi)
        while phi(lo) > eps and lo > 1e-300:
            lo *= 0.5
        hi = max(hi, eps)
        while phi(hi) < eps:
            hi *= 2.0
            if hi > 1e12:
                raise NoRoot("modulus grows too slowly to reach eps")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) < eps:
            lo = mid
        else:
            hi = mid
    eps1 = 0.5 * (lo + hi)
    return ErrorScale(eps, eps1, eta(C * eps / eps1, n), C, n, float(omega(eps1)) / eps, within)


# --------------------------------------------------------------------------
# geometric quantities


def d_eps_formula(g: Profile, F_z: float, eps: float) -> ScaledValue:
    """Geodesic distance through a saddle, ``e^{F_z/eps} int exp(-g/eps)``."""
    return ScaledValue(laplace_1d(g, eps).value, float(F_z))


def v_eps_formula(G: Optional[Profile], F_z: float, eps: float) -> ScaledValue:
    """Separating surface through a saddle, ``e^{-F_z/eps} int exp(-G/eps)``.

    ``G=None`` stands for an empty transverse space (dimension one).
    """
    return ScaledValue(laplace_nd(G, eps).value, -float(F_z))


@dataclass(frozen=True)
class LocalizationReport:
    eps: float
    delta: float
    ratio_lower: float
    ratio_upper: float
    eta_hat: float
    passed: bool


def localization_check(G: Profile, omega: Modulus, delta: float, eps: float,
                       C: float = 10.0) -> LocalizationReport:
    """Restricting to ``{G < delta}`` and perturbing by ``e^{+-omega(G)/eps}``.

    Both modified integrals should stay within ``1 +- eta_hat`` of the full
    Laplace integral.
    """
    full = laplace_nd(G, eps).value
    es = error_scale(omega, eps, G.dim, C, strict=False)
    out = []
    for sign in (1.0, -1.0):
        fn = lambda v, s=sign: np.exp(-(v + s * omega(v)) / eps)
        if G.dim == 1:
            f = lambda y, s=sign: float(fn(G(np.array([y])))[0])
            r = radial_root(G, delta, np.array([[1.0], [-1.0]]))
            val = (integrate.quad(f, 0, r[0], epsrel=1e-10)[0]
                   + integrate.quad(f, -r[1], 0, epsrel=1e-10)[0])
        else:
            val = radial_integral(G, fn, lambda u: np.zeros(u.shape[0]),
                                  lambda u: radial_root(G, delta, u))
        out.append(val / full)
    lo, hi = min(out), max(out)
    ok = (1 - es.eta_hat) <= lo and hi <= (1 + es.eta_hat)
    return LocalizationReport(eps, delta, lo, hi, es.eta_hat, ok)
