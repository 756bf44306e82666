"""Smooth potentials, moduli of continuity, local profiles, and the kernels behind them.

Every potential is backed by three numba point kernels sharing one
parameter vector::

    value(x, p) -> float
    grad(x, p, out)          # out has shape (n,)
    hess(x, p, out)          # out has shape (n, n)

The same kernels feed the vectorised Python interface, the Newton search for
critical points and the jitted Euler-Maruyama loop, so there is a single
source of truth for each landscape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numba
import numpy as np

from .errors import MissingProfile, NoRoot
from .profiles import Profile, sample_sublevel

# --------------------------------------------------------------------------
# batch wrappers


# the batch drivers take a kernel argument; numba's disk cache cannot pickle
# dispatcher types reliably, so they are compiled per process
@numba.njit
def _batch_value(kern, X, p):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        out[i] = kern(X[i], p)
    return out


@numba.njit
def _batch_grad(kern, X, p):
    out = np.empty_like(X)
    for i in range(X.shape[0]):
        kern(X[i], p, out[i])
    return out


@numba.njit
def _batch_hess(kern, X, p):
    n = X.shape[1]
    out = np.empty((X.shape[0], n, n))
    for i in range(X.shape[0]):
        kern(X[i], p, out[i])
    return out


# --------------------------------------------------------------------------
# kernels


@numba.njit(cache=True)
def _dw_value(x, p):
    s = 0.25 * (x[0] * x[0] - 1.0) ** 2
    for j in range(1, x.shape[0]):
        s += 0.5 * x[j] * x[j]
    return s


@numba.njit(cache=True)
def _dw_grad(x, p, out):
    out[0] = x[0] * (x[0] * x[0] - 1.0)
    for j in range(1, x.shape[0]):
        out[j] = x[j]


@numba.njit(cache=True)
def _dw_hess(x, p, out):
    out[:, :] = 0.0
    out[0, 0] = 3.0 * x[0] * x[0] - 1.0
    for j in range(1, x.shape[0]):
        out[j, j] = 1.0


# F = -x^m + m/(2m-2) x^(2m-2) + y^2/2 with m = p[0]


@numba.njit(cache=True)
def _deg_value(x, p):
    m = int(p[0])
    c = m / (2.0 * m - 2.0)
    return -x[0] ** m + c * x[0] ** (2 * m - 2) + 0.5 * x[1] * x[1]


@numba.njit(cache=True)
def _deg_grad(x, p, out):
    m = int(p[0])
    out[0] = -m * x[0] ** (m - 1) + m * x[0] ** (2 * m - 3)
    out[1] = x[1]


@numba.njit(cache=True)
def _deg_hess(x, p, out):
    m = int(p[0])
    out[0, 0] = -m * (m - 1.0) * x[0] ** (m - 2) + m * (2.0 * m - 3.0) * x[0] ** (2 * m - 4)
    out[0, 1] = 0.0
    out[1, 0] = 0.0
    out[1, 1] = 1.0


# F = f(x) a(y) + P(y)^2 / 2, f = (x^2-1)^2/4, P = y (y^2-L^2)/(y^2+L^2),
# a(y) = a0 + a1 (y/L) + a2 (y/L)^2 with p = [L, a0, a1, a2]


@numba.njit(cache=True)
def _tri_parts(x, p):
    L, a0, a1, a2 = p[0], p[1], p[2], p[3]
    u, y = x[0], x[1]
    f = 0.25 * (u * u - 1.0) ** 2
    f1 = u * (u * u - 1.0)
    f2 = 3.0 * u * u - 1.0
    a = a0 + a1 * y / L + a2 * (y / L) ** 2
    a_1 = a1 / L + 2.0 * a2 * y / (L * L)
    a_2 = 2.0 * a2 / (L * L)
    L2 = L * L
    D = y * y + L2
    P = y * (y * y - L2) / D
    P1 = (y ** 4 + 4.0 * L2 * y * y - L2 * L2) / (D * D)
    P2 = 4.0 * L2 * y * (3.0 * L2 - y * y) / (D * D * D)
    return f, f1, f2, a, a_1, a_2, P, P1, P2


@numba.njit(cache=True)
def _tri_value(x, p):
    f, f1, f2, a, a_1, a_2, P, P1, P2 = _tri_parts(x, p)
    return f * a + 0.5 * P * P


@numba.njit(cache=True)
def _tri_grad(x, p, out):
    f, f1, f2, a, a_1, a_2, P, P1, P2 = _tri_parts(x, p)
    out[0] = f1 * a
    out[1] = f * a_1 + P * P1


@numba.njit(cache=True)
def _tri_hess(x, p, out):
    f, f1, f2, a, a_1, a_2, P, P1, P2 = _tri_parts(x, p)
    out[0, 0] = f2 * a
    out[0, 1] = f1 * a_1
    out[1, 0] = f1 * a_1
    out[1, 1] = f * a_2 + P1 * P1 + P * P2


# F = c(x_1) + |x'|^2/2 with c a C^2 chain of half-cosine arcs through knots.
# p = [kappa, m, knots_x (m), knots_v (m)]


@numba.njit(cache=True)
def _chain_c(s, p):
    kappa = p[0]
    m = int(p[1])
    kx = p[2:2 + m]
    kv = p[2 + m:2 + 2 * m]
    if s <= kx[0]:
        d = s - kx[0]
        return kv[0] + 0.5 * kappa * d * d, kappa * d, kappa
    if s >= kx[m - 1]:
        d = s - kx[m - 1]
        return kv[m - 1] + 0.5 * kappa * d * d, kappa * d, kappa
    i = 0
    while s > kx[i + 1]:
        i += 1
    width = kx[i + 1] - kx[i]
    dv = kv[i + 1] - kv[i]
    t = (s - kx[i]) / width
    c0 = kv[i] + 0.5 * dv * (1.0 - math.cos(math.pi * t))
    c1 = 0.5 * dv * math.pi * math.sin(math.pi * t) / width
    c2 = 0.5 * dv * math.pi * math.pi * math.cos(math.pi * t) / (width * width)
    return c0, c1, c2


@numba.njit(cache=True)
def _chain_value(x, p):
    c0, c1, c2 = _chain_c(x[0], p)
    for j in range(1, x.shape[0]):
        c0 += 0.5 * x[j] * x[j]
    return c0


@numba.njit(cache=True)
def _chain_grad(x, p, out):
    c0, c1, c2 = _chain_c(x[0], p)
    out[0] = c1
    for j in range(1, x.shape[0]):
        out[j] = x[j]


@numba.njit(cache=True)
def _chain_hess(x, p, out):
    c0, c1, c2 = _chain_c(x[0], p)
    out[:, :] = 0.0
    out[0, 0] = c2
    for j in range(1, x.shape[0]):
        out[j, j] = 1.0


# F = (x-c).H.(x-c)/2 with p = [n, c (n), H (n*n)]


@numba.njit(cache=True)
def _quad_value(x, p):
    n = x.shape[0]
    s = 0.0
    for i in range(n):
        di = x[i] - p[1 + i]
        for j in range(n):
            s += 0.5 * di * p[1 + n + i * n + j] * (x[j] - p[1 + j])
    return s


@numba.njit(cache=True)
def _quad_grad(x, p, out):
    n = x.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += p[1 + n + i * n + j] * (x[j] - p[1 + j])
        out[i] = s


@numba.njit(cache=True)
def _quad_hess(x, p, out):
    n = x.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = p[1 + n + i * n + j]


# F = sum_k c_k prod_j x_j^e_kj with p = [nterms, n, (c, e_1..e_n) * nterms]


@numba.njit(cache=True)
def _ipow(v, e):
    if e <= 0:
        return 1.0
    return v ** e


@numba.njit(cache=True)
def _poly_value(x, p):
    nt = int(p[0])
    n = int(p[1])
    s = 0.0
    for k in range(nt):
        base = 2 + k * (n + 1)
        term = p[base]
        for j in range(n):
            term *= _ipow(x[j], int(p[base + 1 + j]))
        s += term
    return s


@numba.njit(cache=True)
def _poly_grad(x, p, out):
    nt = int(p[0])
    n = int(p[1])
    out[:] = 0.0
    for k in range(nt):
        base = 2 + k * (n + 1)
        for i in range(n):
            ei = int(p[base + 1 + i])
            if ei == 0:
                continue
            term = p[base] * ei * _ipow(x[i], ei - 1)
            for j in range(n):
                if j != i:
                    term *= _ipow(x[j], int(p[base + 1 + j]))
            out[i] += term


@numba.njit(cache=True)
def _poly_hess(x, p, out):
    nt = int(p[0])
    n = int(p[1])
    out[:, :] = 0.0
    for k in range(nt):
        base = 2 + k * (n + 1)
        for i in range(n):
            ei = int(p[base + 1 + i])
            if ei == 0:
                continue
            for l in range(i, n):
                el = int(p[base + 1 + l])
                if l == i:
                    if ei < 2:
                        continue
                    term = p[base] * ei * (ei - 1) * _ipow(x[i], ei - 2)
                else:
                    if el == 0:
                        continue
                    term = p[base] * ei * el * _ipow(x[i], ei - 1) * _ipow(x[l], el - 1)
                for j in range(n):
                    if j != i and j != l:
                        term *= _ipow(x[j], int(p[base + 1 + j]))
                out[i, l] += term
                if l != i:
                    out[l, i] += term


# --------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class Modulus:
    """Increasing modulus ``omega(s) = K s^power`` (or any callable via ``fn``)."""

    K: float = 1.0
    power: float = 1.5
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    name: str = ""

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.fn is not None:
            return self.fn(s)
        return self.K * np.maximum(s, 0.0) ** self.power

    @property
    def label(self) -> str:
        return self.name or f"{self.K:.6g}*s^{self.power:g}"

    def satisfies_delta(self, delta: float) -> bool:
        """``omega(s) <= s/8`` for all ``0 < s <= 4 delta`` (checked on a log grid)."""
        if delta <= 0:
            return True
        s = np.geomspace(4 * delta * 1e-12, 4 * delta, 400)
        return bool(np.all(self(s) <= s / 8.0 * (1 + 1e-12)))

    @property
    def delta0(self) -> float:
        """Largest ``delta`` in ``(0, 10]`` with ``omega(s) <= s/8`` for ``s <= 4 delta``."""
        if self.fn is None and self.power > 1:
            # closed form for the power law, K (4 d)^(p-1) = 1/8
            d = (1.0 / (8.0 * self.K)) ** (1.0 / (self.power - 1.0)) / 4.0
            return min(d, 10.0)
        if self.satisfies_delta(10.0):
            return 10.0
        lo, hi = 0.0, 10.0
        if not self.satisfies_delta(1e-12):
            raise NoRoot(f"modulus {self.label} exceeds s/8 arbitrarily close to 0")
        lo = 1e-12
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if self.satisfies_delta(mid):
                lo = mid
            else:
                hi = mid
        return lo


@dataclass(frozen=True, eq=False)
class LocalProfile:
    """Convex model of ``F`` near a critical point.

    Local coordinates are ``x = center + frame @ y``.  For a saddle the first
    column of ``frame`` is the unstable direction, ``g`` describes the descent
    along it and ``G`` the ascent transverse to it, so that
    ``F(center + frame @ (s, y')) ~ F(center) - g(s) + G(y')``.
    For a minimum ``G`` lives on all of ``R^n`` and ``g`` is ``None``.
    """

    kind: str
    center: np.ndarray
    frame: np.ndarray
    G: Optional[Profile]
    g: Optional[Profile] = None

    def to_world(self, y: np.ndarray) -> np.ndarray:
        return self.center + np.asarray(y) @ self.frame.T

    def to_local(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.center) @ self.frame


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    location: np.ndarray
    value: float
    kind: str
    spectrum: Optional[np.ndarray] = None
    profile: Optional[LocalProfile] = None
    #: eigenvectors matching ``spectrum`` (columns)
    eigvecs: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"location": [float(v) for v in self.location], "value": float(self.value),
             "kind": self.kind,
             "spectrum": None if self.spectrum is None else [float(v) for v in self.spectrum]}
        if self.profile is not None:
            d["profile"] = {"g": None if self.profile.g is None else self.profile.g.name,
                            "G": None if self.profile.G is None else self.profile.G.name}
        return d


@dataclass(frozen=True, eq=False)
class Potential:
    dim: int
    value_kernel: Callable
    grad_kernel: Callable
    hess_kernel: Optional[Callable]
    params: np.ndarray
    growth_const: float = 4.0
    omega: Modulus = field(default_factory=Modulus)
    name: str = ""
    #: critical points known in closed form (filled by the catalog)
    known: tuple = ()

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or (self.dim == 1 and x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points with trailing axis {self.dim}, got {x.shape}")
        return x

    def eval(self, x):
        x = self._points(x)
        lead = x.shape[:-1]
        out = _batch_value(self.value_kernel, np.ascontiguousarray(x.reshape(-1, self.dim)),
                           self.params)
        return out.reshape(lead) if lead else float(out[0])

    __call__ = eval

    def grad(self, x):
        x = self._points(x)
        out = _batch_grad(self.grad_kernel, np.ascontiguousarray(x.reshape(-1, self.dim)),
                          self.params)
        return out.reshape(x.shape)

    @property
    def has_hessian(self) -> bool:
        return self.hess_kernel is not None

    def hessian(self, x, fd_step: float = 1e-5):
        """Analytic Hessian, or central differences of ``grad`` if there is none."""
        x = self._points(x)
        flat = np.ascontiguousarray(x.reshape(-1, self.dim))
        if self.hess_kernel is not None:
            out = _batch_hess(self.hess_kernel, flat, self.params)
        else:
            out = np.empty((flat.shape[0], self.dim, self.dim))
            for j in range(self.dim):
                e = np.zeros(self.dim)
                e[j] = fd_step
                out[:, :, j] = (self.grad(flat + e) - self.grad(flat - e)) / (2 * fd_step)
            out = 0.5 * (out + out.transpose(0, 2, 1))
        return out.reshape(x.shape[:-1] + (self.dim, self.dim))


# --------------------------------------------------------------------------
# constructors


def double_well(n: int, omega: Modulus | None = None) -> Potential:
    """``(x_1^2-1)^2/4 + sum_{j>=2} x_j^2/2``: minima at ``(+-1, 0)``, saddle at 0."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return Potential(n, _dw_value, _dw_grad, _dw_hess, np.zeros(1), 4.0,
                     omega or Modulus(1.2, 1.5), f"double_well_{n}d")


def degenerate(p: int, omega: Modulus | None = None) -> Potential:
    """``-x^p + p/(2p-2) x^(2p-2) + y^2/2``: flat saddle at 0, wells at ``(+-1, 0)``."""
    if p < 4 or p % 2:
        raise ValueError("p must be an even integer >= 4")
    return Potential(2, _deg_value, _deg_grad, _deg_hess, np.array([float(p)]), 4.0,
                     omega or Modulus(2.0 / 3.0, 1.5), f"degenerate_p{p}")


def triple_saddle(L: float = 1.6, a=(1.0, 0.0, 0.0), omega: Modulus | None = None,
                  name: str = "triple_parallel") -> Potential:
    """Double well in ``x`` crossed with a three-well profile in ``y``.

    Three saddles sit near ``(0, 0)`` and ``(0, +-L)``; the factor
    ``a(y) = a0 + a1 y/L + a2 (y/L)^2`` tilts their heights.
    """
    a0, a1, a2 = a
    positive = (a0 > 0 and a1 == 0) if a2 == 0 else (a2 > 0 and 4 * a0 * a2 > a1 * a1)
    if not positive:
        raise ValueError("a(y) must stay positive")
    return Potential(2, _tri_value, _tri_grad, _tri_hess,
                     np.array([L, a0, a1, a2], dtype=float), 4.0,
                     omega or Modulus(1.5, 1.5), name)


def chain_knots(values, kappa: float = 1.0) -> np.ndarray:
    """Knot positions for alternating well/saddle values, centred at 0.

    Consecutive knots are spaced ``pi sqrt(|dv| / (2 kappa))`` apart so every
    half-cosine arc has curvature ``kappa`` at both ends and the chain is C^2.
    """
    v = np.asarray(values, dtype=float)
    widths = np.pi * np.sqrt(np.abs(np.diff(v)) / (2.0 * kappa))
    x = np.concatenate([[0.0], np.cumsum(widths)])
    return x - 0.5 * x[-1]


def chain(values, n: int = 2, kappa: float = 1.0, omega: Modulus | None = None,
          name: str = "chain") -> Potential:
    """Wells and saddles in a row along ``x_1``, confined by ``|x'|^2/2``."""
    v = np.asarray(values, dtype=float)
    x = chain_knots(v, kappa)
    p = np.concatenate([[kappa, len(v)], x, v])
    return Potential(n, _chain_value, _chain_grad, _chain_hess, p, 5.0,
                     omega or Modulus(1.0, 1.5), name)


def quadratic_potential(H, center=None, name: str = "quadratic") -> Potential:
    """``(x-c).H.(x-c)/2``; ``H = 0`` gives the flat potential."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = H.shape[0]
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    p = np.concatenate([[n], c, H.ravel()])
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    growth = math.inf if ev.min() <= 0 else max(1.0, 2.0 / ev.min(), 1 + float(c @ c))
    return Potential(n, _quad_value, _quad_grad, _quad_hess, p, growth, Modulus(0.0, 1.5), name)


def flat_potential(n: int) -> Potential:
    return quadratic_potential(np.zeros((n, n)), name=f"flat_{n}d")


def polynomial_potential(coeffs, exponents, growth_const: float = 4.0,
                         omega: Modulus | None = None, name: str = "polynomial") -> Potential:
    """``sum_k c_k prod_j x_j^{e_kj}`` from coefficient and exponent arrays."""
    c = np.asarray(coeffs, dtype=float).ravel()
    e = np.atleast_2d(np.asarray(exponents, dtype=float))
    if e.shape[0] != c.size:
        raise ValueError("one exponent row per coefficient")
    if np.any(e < 0) or np.any(e != np.round(e)):
        raise ValueError("exponents must be nonnegative integers")
    n = e.shape[1]
    p = np.concatenate([[c.size, n], np.hstack([c[:, None], e]).ravel()])
    return Potential(n, _poly_value, _poly_grad, _poly_hess, p, growth_const,
                     omega or Modulus(1.0, 1.5), name)


# --------------------------------------------------------------------------
# structural checks


@dataclass(frozen=True)
class StructuralReport:
    passed: bool
    max_violation: float
    n_samples: int
    delta: float
    delta0: float
    #: delta <= delta0, the regime where the profile bounds are meant to hold
    within_delta0: bool


def _sample_neighborhood(cp: CriticalPoint, delta: float, samples: int, rng):
    prof = cp.profile
    if prof.kind == "saddle":
        if prof.g is None:
            raise MissingProfile("saddle profile needs g")
        s = sample_sublevel(prof.g, delta, samples, rng)[:, 0]
        gval = prof.g(s)
        if prof.G is None:
            return s[:, None], gval, np.zeros_like(gval)
        yp = sample_sublevel(prof.G, delta, samples, rng)
        Gval = prof.G(yp[:, 0]) if prof.G.dim == 1 else prof.G(yp)
        return np.column_stack([s, yp]), gval, Gval
    y = sample_sublevel(prof.G, delta, samples, rng)
    Gval = prof.G(y[:, 0]) if prof.G.dim == 1 else prof.G(y)
    return y, np.zeros_like(Gval), Gval


def remainder_samples(F: Potential, cp: CriticalPoint, delta: float, samples: int = 10_000,
                      seed: int = 0):
    """Local coordinates, ``g``, ``G`` and ``|F - model|`` on the neighborhood of ``cp``."""
    if cp.profile is None or cp.profile.G is None and cp.profile.kind != "saddle":
        raise MissingProfile(f"critical point at {cp.location} has no local profile")
    rng = np.random.default_rng(seed)
    if delta <= 0 or samples <= 0:
        return np.empty((0, F.dim)), np.empty(0), np.empty(0), np.empty(0)
    y, gval, Gval = _sample_neighborhood(cp, delta, samples, rng)
    x = cp.profile.to_world(y)
    model = cp.value - gval + Gval
    return y, gval, Gval, np.abs(F.eval(x) - model)


def verify_structural_assumptions(F: Potential, cp: CriticalPoint, delta: float,
                                  samples: int = 10_000, omega: Modulus | None = None,
                                  tol: float = 1e-9, seed: int = 0) -> StructuralReport:
    """Sample the profile neighborhood and compare ``F`` with its convex model.

    The violation at a sample is ``|F - F(z) + g - G| - omega(g) - omega(G)``.
    """
    omega = omega or F.omega
    y, gval, Gval, rem = remainder_samples(F, cp, delta, samples, seed)
    d0 = omega.delta0
    if rem.size == 0:
        return StructuralReport(True, -math.inf, 0, delta, d0, delta <= d0)
    viol = rem - omega(gval) - omega(Gval)
    worst = float(viol.max())
    return StructuralReport(worst <= tol, worst, int(rem.size), delta, d0, delta <= d0)


def fit_modulus(F: Potential, cps, delta: float, power: float = 1.5, samples: int = 4000,
                seed: int = 0, safety: float = 1.05) -> Modulus:
    """Smallest ``K`` making ``K s^power`` dominate the sampled remainders."""
    K = 0.0
    for cp in cps:
        if cp.profile is None:
            continue
        _, gval, Gval, rem = remainder_samples(F, cp, delta, samples, seed)
        denom = gval ** power + Gval ** power
        ok = denom > 1e-14
        if ok.any():
            K = max(K, float(np.max(rem[ok] / denom[ok])))
    return Modulus(safety * K if K > 0 else 1e-12, power)
