"""Capacity estimates: geometric formula, Eyring-Kramers, network reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .asymptotics import d_eps_formula, v_eps_formula
from .errors import MissingProfile, ShiftMismatch, SpectrumInvalid, TopologyGeneral, ZeroCapacity
from .potential import CriticalPoint
from .scaled import (ScaledValue, scaled_add, scaled_div, scaled_inv, scaled_mul, scaled_scale,
                     scaled_sum)

__all__ = ["ScaledValue", "scaled_add", "CapacityEstimate", "capacity_geometric",
           "classical_eyring_kramers", "reduce_parallel", "reduce_series", "assemble_capacity",
           "saddle_geometry"]


@dataclass(frozen=True)
class CapacityEstimate:
    value: ScaledValue
    #: geometric, pde, classical_ek or network
    method: str
    components: tuple = ()
    topology: Optional[str] = None

    def at(self, eps: float) -> float:
        return self.value.value_at(eps)

    def to_dict(self, eps: float) -> dict:
        d = self.value.to_dict(eps)
        d["method"] = self.method
        d["components"] = [c.value.to_dict(eps) for c in self.components]
        if self.topology:
            d["topology"] = self.topology
        return d


def capacity_geometric(d: ScaledValue, V: ScaledValue, F_z: float, eps: float,
                       shift_tol: float = 1e-9) -> CapacityEstimate:
    """``eps * V / d * exp(F_z/eps)`` for a single saddle.

    ``d`` and ``V`` must carry opposite shifts (``+s`` and ``-s``), as both
    the Laplace formulas and the lattice oracles produce them.
    """
    if abs(d.shift + V.shift) > shift_tol:
        raise ShiftMismatch(f"d shift {d.shift} and V shift {V.shift} are not opposite")
    if d.mantissa == 0:
        raise ZeroCapacity("geodesic distance is zero")
    ratio = scaled_div(V, d, eps)
    val = scaled_mul(scaled_scale(ratio, eps, eps), ScaledValue(1.0, float(F_z)), eps)
    return CapacityEstimate(val, "geometric")


def saddle_geometry(cp: CriticalPoint, eps: float) -> tuple[ScaledValue, ScaledValue, float]:
    """``(d, V, F_z)`` from the local profiles of a saddle."""
    prof = cp.profile
    if prof is None or prof.kind != "saddle" or prof.g is None:
        raise MissingProfile(f"saddle at {cp.location} has no profile")
    return d_eps_formula(prof.g, cp.value, eps), v_eps_formula(prof.G, cp.value, eps), cp.value


def classical_eyring_kramers(lam1: float, hess_saddle, hess_min, dF: float,
                             eps: float | None = None) -> ScaledValue:
    """Mean transition time ``(2 pi/lam1) sqrt(|det H_z| / det H_x) e^{dF/eps}``.

    ``hess_saddle`` and ``hess_min`` are Hessian spectra (or matrices).
    """
    hs = _spectrum(hess_saddle)
    hm = _spectrum(hess_min)
    if lam1 <= 0:
        raise SpectrumInvalid("lam1 must be positive")
    if np.any(hm <= 0):
        raise SpectrumInvalid("minimum spectrum must be positive")
    if int(np.sum(hs < 0)) != 1 or np.any(hs == 0):
        raise SpectrumInvalid("saddle spectrum needs exactly one negative eigenvalue")
    pref = 2 * math.pi / lam1 * math.sqrt(abs(float(np.prod(hs))) / float(np.prod(hm)))
    return ScaledValue(pref, float(dF))


def _spectrum(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim == 2:
        return np.linalg.eigvalsh(0.5 * (h + h.T))
    return np.atleast_1d(h)


def reduce_parallel(parts: Sequence[CapacityEstimate], eps: float) -> CapacityEstimate:
    """Capacities of parallel bridges add."""
    if not parts:
        raise ValueError("need at least one part")
    if len(parts) == 1:
        return parts[0]
    return CapacityEstimate(scaled_sum([p.value for p in parts], eps), "network", tuple(parts),
                            "parallel")


def reduce_series(parts: Sequence[CapacityEstimate], eps: float) -> CapacityEstimate:
    """Inverse capacities of bridges in series add."""
    if not parts:
        raise ValueError("need at least one part")
    if any(p.value.mantissa == 0 for p in parts):
        raise ZeroCapacity("a bridge in series has zero capacity")
    if len(parts) == 1:
        return parts[0]
    inv = scaled_sum([scaled_inv(p.value, eps) for p in parts], eps)
    return CapacityEstimate(scaled_inv(inv, eps), "network", tuple(parts), "series")


def assemble_capacity(net, per_saddle, eps: float) -> CapacityEstimate:
    """Geometric capacity of every bridge, combined by the network topology.

    ``per_saddle`` maps bridge index to ``(d, V, F_z)``; a sequence aligned
    with ``net.bridges`` works too.
    """
    if net.topology not in ("parallel", "series"):
        raise TopologyGeneral(f"cannot reduce a {net.topology} network")
    if isinstance(per_saddle, Mapping):
        get = per_saddle.__getitem__
    else:
        seq = list(per_saddle)
        get = seq.__getitem__
    parts = []
    order = net.bridge_order if net.topology == "series" else range(len(net.bridges))
    for k in order:
        d, V, F_z = get(k)
        parts.append(capacity_geometric(d, V, F_z, eps))
    if len(parts) == 1:
        return CapacityEstimate(parts[0].value, "network", tuple(parts), net.topology)
    reduce = reduce_parallel if net.topology == "parallel" else reduce_series
    return reduce(parts, eps)
