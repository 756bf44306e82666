"""Overdamped Langevin simulation and exit-time predictors.

The simulated process is ``dX = -grad F(X) dt + sqrt(2 eps) dW``, whose
generator is ``eps * Laplacian - grad F . grad`` and whose invariant measure
is ``exp(-F/eps) dx``.  Every capacity formula in this package refers to
that generator, so the noise amplitude is fixed to ``sqrt(2 eps)``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .asymptotics import laplace_nd, levelset_volume
from .capacity import CapacityEstimate
from .errors import MissingProfile, TopologyGeneral, UnstableStep, ZeroCapacity
from .potential import CriticalPoint, Potential
from .scaled import ScaledValue, scaled_div, scaled_scale, scaled_sum

HIT, LEFT_BOX, MAX_STEPS, UNSTABLE = 0, 1, 2, 3
_BLOCK = 4096


@dataclass(frozen=True)
class SimConfig:
    eps: float
    dt: float
    max_steps: int = 10_000_000
    seed: int = 0
    paths: int = 1000
    hit_radius: float = 0.1
    threads: int = 1

    def __post_init__(self):
        if self.eps <= 0 or self.dt <= 0:
            raise ValueError("eps and dt must be positive")
        if self.paths < 1:
            raise ValueError("need at least one path")
        if self.hit_radius < 2 * math.sqrt(self.dt * self.eps):
            raise ValueError("hit_radius below 2 sqrt(dt eps): hits may be skipped")


@dataclass(frozen=True, eq=False)
class ExitTimeStats:
    mean: float
    stderr: float
    censored_fraction: float
    n_paths: int
    times: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)
    status: np.ndarray = field(repr=False)

    @property
    def biased_low(self) -> bool:
        """Censored paths enter with their censoring time, so the mean is a lower bound."""
        return self.censored_fraction > 0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr,
                "censored_fraction": self.censored_fraction, "n_paths": self.n_paths,
                "biased_low": self.biased_low}


# not disk-cached: the gradient kernel is an argument
@numba.njit(nogil=True)
def _path(grad, p, x0, centers, radii2, lo, hi, dt, sigma, max_steps, rng, diam):
    n = x0.shape[0]
    x = x0.copy()
    g = np.empty(n)
    noise = rng.standard_normal((_BLOCK, n))
    k = 0
    for step in range(max_steps):
        if k == _BLOCK:
            noise = rng.standard_normal((_BLOCK, n))
            k = 0
        grad(x, p, g)
        jump = 0.0
        for j in range(n):
            dx = -g[j] * dt + sigma * noise[k, j]
            x[j] += dx
            jump += dx * dx
        k += 1
        if jump > diam * diam:
            return (step + 1) * dt, -1, UNSTABLE
        for j in range(n):
            if x[j] < lo[j] or x[j] > hi[j]:
                return (step + 1) * dt, -1, LEFT_BOX
        for t in range(centers.shape[0]):
            d2 = 0.0
            for j in range(n):
                d2 += (x[j] - centers[t, j]) ** 2
            if d2 <= radii2[t]:
                return (step + 1) * dt, t, HIT
    return max_steps * dt, -1, MAX_STEPS


def _path_rng(seed: int, index: int) -> np.random.Generator:
    # counter-based stream per (seed, path), independent of how work is split
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def simulate_transition(F: Potential, start, targets: Sequence, domain_box, cfg: SimConfig,
                        csv_path=None) -> ExitTimeStats:
    """First hitting times of a union of balls by Euler-Maruyama paths.

    ``targets`` holds ``(center, radius)`` pairs; a radius of ``None`` takes
    ``cfg.hit_radius``.  Paths that leave ``domain_box`` or exhaust
    ``max_steps`` are censored at that time.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    box = np.atleast_2d(np.asarray(domain_box, dtype=float))
    lo, hi = box[:, 0].copy(), box[:, 1].copy()
    if np.any(start < lo) or np.any(start > hi):
        raise ValueError("start lies outside the domain box")
    centers = np.array([np.atleast_1d(np.asarray(c, dtype=float)) for c, _ in targets])
    radii = np.array([cfg.hit_radius if r is None else float(r) for _, r in targets])
    if np.any(np.linalg.norm(centers - start, axis=1) <= radii):
        raise ValueError("start lies inside a target")
    diam = float(np.linalg.norm(hi - lo))
    sigma = math.sqrt(2 * cfg.eps * cfg.dt)
    grad, p = F.grad_kernel, F.params

    def run(idx):
        out = []
        for i in idx:
            out.append(_path(grad, p, start, centers, radii ** 2, lo, hi, cfg.dt, sigma,
                             cfg.max_steps, _path_rng(cfg.seed, i), diam))
        return out

    chunks = np.array_split(np.arange(cfg.paths), max(1, cfg.threads))
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = [r for part in ex.map(run, chunks) for r in part]
    else:
        results = run(np.arange(cfg.paths))
    times = np.array([r[0] for r in results])
    target = np.array([r[1] for r in results], dtype=int)
    status = np.array([r[2] for r in results], dtype=int)
    if np.any(status == UNSTABLE):
        raise UnstableStep("a single step jumped further than the box diameter; reduce dt")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_index", "time", "hit_target_id", "censored"])
            for i, (t, tg, st) in enumerate(zip(times, target, status)):
                w.writerow([i, repr(float(t)), int(tg), int(st != HIT)])
    n = times.size
    se = float(times.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return ExitTimeStats(float(times.mean()), se, float(np.mean(status != HIT)), n, times,
                         target, status)


def default_dt(F: Potential, box, eps: float, factor: float = 0.1, samples: int = 4096,
               seed: int = 0) -> float:
    """``factor * eps / L^2`` with ``L`` the largest sampled ``|grad F|`` on the box."""
    box = np.atleast_2d(np.asarray(box, dtype=float))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(samples, box.shape[0]))
    corners = np.array(np.meshgrid(*box)).reshape(box.shape[0], -1).T
    g = np.linalg.norm(F.grad(np.vstack([pts, corners])), axis=-1)
    return factor * eps / max(float(g.max()), 1.0) ** 2


# --------------------------------------------------------------------------
# predictors


def predict_mean_exit_time(gibbs_mass: ScaledValue, cap, eps: float) -> ScaledValue:
    """Leading-order mean exit time, Gibbs mass over capacity."""
    value = cap.value if isinstance(cap, CapacityEstimate) else cap
    if value.mantissa == 0:
        raise ZeroCapacity("capacity is zero")
    return scaled_div(gibbs_mass, value, eps)


def _min_volume(cp: CriticalPoint, eps: float) -> float:
    if cp.profile is None or cp.profile.G is None:
        raise MissingProfile(f"minimum at {cp.location} has no profile")
    return levelset_volume(cp.profile.G, eps).value


def gibbs_mass_estimate(F: Potential, minima_group: Sequence[CriticalPoint], eps: float,
                        method: str = "levelset") -> ScaledValue:
    """``sum_x |{G_x < eps}| exp(-F(x)/eps)`` over a group of minima.

    ``method="laplace"`` replaces the level-set volume by the Laplace
    integral ``int exp(-G_x/eps)``, the sharp leading-order Gibbs mass.
    """
    if not minima_group:
        raise MissingProfile("empty group of minima")
    parts = []
    for cp in minima_group:
        if method == "laplace":
            if cp.profile is None or cp.profile.G is None:
                raise MissingProfile(f"minimum at {cp.location} has no profile")
            vol = laplace_nd(cp.profile.G, eps).value
        else:
            vol = _min_volume(cp, eps)
        parts.append(ScaledValue(vol, -float(cp.value)))
    return scaled_sum(parts, eps)


@dataclass(frozen=True)
class ExitBound:
    value: ScaledValue
    C: float
    #: additive error C eps^{alpha/2} for each assumed alpha, reported on its own
    additive: dict

    def to_dict(self, eps: float) -> dict:
        d = self.value.to_dict(eps)
        d["C"] = self.C
        d["additive"] = {str(k): v for k, v in self.additive.items()}
        return d


def _saddle_ratio(cp: CriticalPoint, eps: float) -> float:
    """``H^{n-1}({G_z < eps}) / H^1({g_z < eps})``."""
    prof = cp.profile
    if prof is None or prof.g is None:
        raise MissingProfile(f"saddle at {cp.location} has no profile")
    top = 1.0 if prof.G is None else levelset_volume(prof.G, eps).value
    return top / levelset_volume(prof.g, eps).value


def exit_time_upper_bound(net, minima_group: Sequence[CriticalPoint], eps: float,
                          C: float = 1.0, alphas=(0.5, 1.0)) -> ExitBound:
    """Upper bound on the mean exit time from a group of minima.

    Parallel bridges: ``C/eps * mass / sum_i e^{-F(z_i)/eps} ratio_i``.
    Series bridges: ``C/eps * mass * sum_i e^{F(z_i)/eps} / ratio_i``.
    Here ``mass = sum_x |{G_x < eps}| e^{-F_group/eps}`` with ``F_group``
    the lowest value in the group, and ``ratio_i`` is the level-set ratio
    of saddle ``z_i``.
    """
    if net.topology not in ("parallel", "series"):
        raise TopologyGeneral(f"no bound for a {net.topology} network")
    level = min(cp.value for cp in minima_group)
    vol = sum(_min_volume(cp, eps) for cp in minima_group)
    mass = ScaledValue(vol, -float(level))
    saddles = [b.saddle for b in net.bridges]
    if net.topology == "parallel":
        denom = scaled_sum([ScaledValue(_saddle_ratio(z, eps), -float(z.value)) for z in saddles],
                           eps)
        val = scaled_div(mass, denom, eps)
    else:
        resist = scaled_sum([ScaledValue(1.0 / _saddle_ratio(z, eps), float(z.value))
                             for z in saddles], eps)
        val = ScaledValue(mass.mantissa * resist.mantissa, mass.shift + resist.shift).normalized(eps)
    val = scaled_scale(val, C / eps, eps)
    return ExitBound(val, C, {a: C * eps ** (a / 2) for a in alphas})
