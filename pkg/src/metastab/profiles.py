"""Convex profile functions used to describe potentials near critical points.

A profile is a convex function with a proper minimum ``0`` at the origin.
One-dimensional profiles act elementwise on arrays of any shape; profiles
on ``R^k`` with ``k >= 2`` expect the coordinates on the trailing axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class Profile:
    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    name: str = ""
    #: separable profiles carry their one-dimensional summands
    factors: Optional[tuple["Profile", ...]] = None
    #: degree p when G(t y) = t^p G(y) for t > 0
    homogeneity: Optional[float] = None
    #: Hessian at the origin when the profile is exactly quadratic
    quadratic: Optional[np.ndarray] = field(default=None, repr=False)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.dim == 1:
            return self.fn(y)
        if y.shape[-1] != self.dim:
            raise ValueError(f"expected trailing axis of length {self.dim}, got {y.shape}")
        return self.fn(y)

    @property
    def separable(self) -> bool:
        return self.factors is not None

    def rescaled(self, t: float) -> "Profile":
        """Return ``G / t``."""
        fn = self.fn
        q = None if self.quadratic is None else self.quadratic / t
        factors = None if self.factors is None else tuple(f.rescaled(t) for f in self.factors)
        return Profile(lambda y: fn(y) / t, self.dim, f"{self.name}/{t:g}", factors,
                       self.homogeneity, q)


def quadratic(a: float = 1.0) -> Profile:
    """``a s^2 / 2`` on the line."""
    a = float(a)
    return Profile(lambda s: 0.5 * a * s * s, 1, f"quadratic({a:g})", None, 2.0,
                   np.array([[a]]))


def power(p: float, c: float = 1.0) -> Profile:
    """``c |s|^p`` on the line; convex for ``p >= 1``."""
    p, c = float(p), float(c)
    return Profile(lambda s: c * np.abs(s) ** p, 1, f"power({p:g},{c:g})", None, p,
                   np.array([[2.0 * c]]) if p == 2.0 else None)


def separable(*parts: Profile) -> Profile:
    """``G(y) = sum_j g_j(y_j)`` for one-dimensional ``g_j``."""
    if any(p.dim != 1 for p in parts):
        raise ValueError("separable() takes one-dimensional profiles")
    if len(parts) == 1:
        return parts[0]
    parts = tuple(parts)

    def fn(y):
        out = parts[0](y[..., 0])
        for j, g in enumerate(parts[1:], start=1):
            out = out + g(y[..., j])
        return out

    degs = {p.homogeneity for p in parts}
    hom = degs.pop() if len(degs) == 1 else None
    quad = None
    if all(p.quadratic is not None for p in parts):
        quad = np.diag([p.quadratic[0, 0] for p in parts])
    name = "+".join(p.name for p in parts)
    return Profile(fn, len(parts), name, parts, hom, quad)


def quadratic_form(H) -> Profile:
    """``y.H.y / 2`` for a symmetric positive definite ``H``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    H = 0.5 * (H + H.T)
    k = H.shape[0]
    if k == 1:
        return quadratic(H[0, 0])
    if np.allclose(H, np.diag(np.diag(H))):
        return separable(*(quadratic(a) for a in np.diag(H)))

    def fn(y):
        return 0.5 * np.einsum("...i,ij,...j->...", y, H, y)

    return Profile(fn, k, "quadratic_form", None, 2.0, H.copy())


def conical(c: float = 1.0, dim: int = 1) -> Profile:
    """``c |y|``: convex and homogeneous of degree one."""
    c = float(c)
    if dim == 1:
        return Profile(lambda s: c * np.abs(s), 1, f"conical({c:g})", None, 1.0)
    return Profile(lambda y: c * np.linalg.norm(y, axis=-1), dim, f"conical({c:g})", None, 1.0)


def max_of(*parts: Profile) -> Profile:
    """Pointwise maximum of profiles on the same space."""
    dims = {p.dim for p in parts}
    if len(dims) != 1:
        raise ValueError("max_of() needs profiles on a common space")
    parts = tuple(parts)

    def fn(y):
        out = parts[0](y)
        for g in parts[1:]:
            out = np.maximum(out, g(y))
        return out

    return Profile(fn, dims.pop(), "max(" + ",".join(p.name for p in parts) + ")")


def shifted_quadratic_max(a: float, b: float, c: float) -> Profile:
    """``max(a s^2/2, b s^2/2 + c s)`` on the line, a kinked convex profile."""
    return max_of(quadratic(a), Profile(lambda s: 0.5 * b * s * s + c * s, 1,
                                        f"quad_lin({b:g},{c:g})"))


def is_midpoint_convex(G: Profile, a: np.ndarray, b: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Midpoint inequality ``G((a+b)/2) <= (G(a)+G(b))/2`` for paired samples."""
    lhs = G(0.5 * (a + b))
    rhs = 0.5 * (G(a) + G(b))
    return lhs <= rhs + rtol * np.maximum(1.0, np.abs(rhs))


def catalog_profiles(dim: int) -> dict[str, Profile]:
    """Five reference convex profiles on ``R^dim`` (dim 1 or 2)."""
    if dim == 1:
        return {
            "quadratic": quadratic(1.0),
            "quartic": power(4.0),
            "conical": conical(1.0, 1),
            "anisotropic": quadratic(3.0),
            "max_quadratics": shifted_quadratic_max(1.0, 4.0, 1.0),
        }
    if dim == 2:
        return {
            "quadratic": quadratic_form(np.eye(2)),
            "quartic": separable(power(4.0), power(4.0)),
            "conical": conical(1.0, 2),
            "anisotropic": quadratic_form([[3.0, 1.0], [1.0, 0.5]]),
            "max_quadratics": max_of(quadratic_form(np.eye(2)),
                                     quadratic_form([[4.0, 0.0], [0.0, 0.25]])),
        }
    raise ValueError("reference profiles exist for dim 1 and 2")


def _eval_along(G: Profile, r: np.ndarray, u: np.ndarray) -> np.ndarray:
    if G.dim == 1:
        return G(r * u[:, 0])
    return G(r[:, None] * u)


def radial_root(G: Profile, t: float, directions: np.ndarray, rmax: float = 1e4,
                iters: int = 90) -> np.ndarray:
    """Radius ``r(u)`` with ``G(r u) = t`` for each unit direction ``u``.

    Sublevel sets of a convex profile with a proper minimum are star-shaped
    around the origin, so bisection along rays is enough.
    """
    from .errors import NotProper

    u = np.atleast_2d(np.asarray(directions, dtype=float))
    m = u.shape[0]
    lo = np.zeros(m)
    hi = np.full(m, 1e-3)
    for _ in range(200):
        low = _eval_along(G, hi, u) < t
        if not low.any():
            break
        hi = np.where(low, 2.0 * hi, hi)
        if hi.max() > rmax:
            raise NotProper(f"profile {G.name!r} stays below {t:g} out to radius {rmax:g}")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = _eval_along(G, mid, u) < t
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def unit_directions(k: int, count: int = 0, rng=None) -> np.ndarray:
    """Signed coordinate axes, diagonals, and optionally random unit vectors."""
    axes = np.vstack([np.eye(k), -np.eye(k)])
    if k > 1:
        corners = np.array(np.meshgrid(*([[-1.0, 1.0]] * k))).reshape(k, -1).T
        axes = np.vstack([axes, corners / np.sqrt(k)])
    if count:
        rng = np.random.default_rng(rng)
        z = rng.standard_normal((count, k))
        axes = np.vstack([axes, z / np.linalg.norm(z, axis=1, keepdims=True)])
    return axes


def sublevel_box(G: Profile, t: float, safety: float = 1.25, rng=0) -> np.ndarray:
    """Half-widths of an axis-aligned box containing ``{G < t}``."""
    k = G.dim
    u = unit_directions(k, 0 if k == 1 else 256, rng)
    r = radial_root(G, t, u)
    half = np.max(np.abs(u) * r[:, None], axis=0)
    return safety * half


def sample_sublevel(G: Profile, t: float, count: int, rng) -> np.ndarray:
    """Uniform samples from ``{G < t}`` by rejection from a bounding box."""
    k = G.dim
    if count <= 0 or t <= 0:
        return np.empty((0, k))
    half = sublevel_box(G, t)
    out = []
    have = 0
    while have < count:
        y = rng.uniform(-half, half, size=(max(2 * count, 256), k))
        vals = G(y[:, 0]) if k == 1 else G(y)
        keep = y[vals < t]
        out.append(keep)
        have += keep.shape[0]
    return np.vstack(out)[:count]
