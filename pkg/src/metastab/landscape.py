"""Critical points, communication heights, islands and bridges."""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Optional

import networkx as nx
import numba
import numpy as np
from scipy import ndimage

from .catalog import is_saddle_like, profile_from_hessian
from .errors import Disconnected, EmptyResult, NotSeparated, UnreachedSaddleSet
from .lattice import LatticeDomain, axis_structure
from .potential import CriticalPoint, Potential

GRAD_TOL = 1e-10
SPEC_TOL = 1e-6
MERGE_RADIUS = 10 * np.sqrt(GRAD_TOL)

__all__ = ["CriticalPoint", "find_critical_points", "classify", "communication_height",
           "CommunicationHeight", "extract_network", "SaddleNetwork", "Island", "Bridge"]


# --------------------------------------------------------------------------
# critical points


def classify(spectrum: np.ndarray, spec_tol: float = SPEC_TOL) -> str:
    lam = np.asarray(spectrum)
    if np.any(np.abs(lam) < spec_tol):
        return "degenerate"
    neg = int(np.sum(lam < 0))
    if neg == 0:
        return "minimum"
    if neg == 1:
        return "saddle"
    return "maximum"


def _seed_grid(box: np.ndarray, seeds: int) -> np.ndarray:
    # cell-centred grid keeps seeds off the box boundary and off symmetry axes
    axes = [lo + (hi - lo) * (np.arange(seeds) + 0.5) / seeds for lo, hi in box]
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)


def _batched_newton(F: Potential, X: np.ndarray, box: np.ndarray, maxit: int, step_tol: float):
    X = X.copy()
    alive = np.ones(X.shape[0], dtype=bool)
    settled = np.zeros(X.shape[0], dtype=bool)
    span = box[:, 1] - box[:, 0]
    lo, hi = box[:, 0] - 0.1 * span, box[:, 1] + 0.1 * span
    max_step = 0.25 * span.min()
    for _ in range(maxit):
        act = alive & ~settled
        if not act.any():
            break
        x = X[act]
        g = F.grad(x)
        H = F.hessian(x)
        # least-squares step tolerates exactly singular Hessians
        step = np.empty_like(x)
        for i in range(x.shape[0]):
            step[i] = np.linalg.lstsq(H[i], g[i], rcond=None)[0]
        norm = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, max_step / np.maximum(norm, 1e-300))
        x = x - step * scale[:, None]
        X[act] = x
        out = np.any((x < lo) | (x > hi), axis=1) | ~np.all(np.isfinite(x), axis=1)
        idx = np.flatnonzero(act)
        alive[idx[out]] = False
        settled[idx[~out & (norm < step_tol)]] = True
    return X, alive


def find_critical_points(F: Potential, box, seeds: int = 25, grad_tol: float = GRAD_TOL,
                         spec_tol: float = SPEC_TOL, merge_radius: float = MERGE_RADIUS,
                         maxit: int = 200) -> list[CriticalPoint]:
    """Newton search from a ``seeds^n`` grid; duplicates merged, sorted by value.

    Profiles are taken from ``F.known`` when a known point lies within the
    merge radius, otherwise read off the Hessian for non-degenerate points.
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    X, alive = _batched_newton(F, _seed_grid(box, seeds), box, maxit, 1e-13)
    X = X[alive]
    inside = np.all((X >= box[:, 0] - 1e-9) & (X <= box[:, 1] + 1e-9), axis=1)
    X = X[inside]
    if X.shape[0]:
        gn = np.linalg.norm(F.grad(X), axis=1)
        X, gn = X[gn <= grad_tol], gn[gn <= grad_tol]
    if X.shape[0] == 0:
        raise EmptyResult("no critical point found in the box")
    order = np.argsort(gn, kind="stable")
    reps: list[np.ndarray] = []
    for i in order:
        if all(np.linalg.norm(X[i] - r) > merge_radius for r in reps):
            reps.append(X[i])
    out = []
    for x in reps:
        H = F.hessian(x)
        lam, vecs = np.linalg.eigh(H)
        kind = classify(lam, spec_tol)
        prof = None
        for k in F.known:
            if np.linalg.norm(k.location - x) <= merge_radius and k.profile is not None:
                prof = k.profile
        if prof is None and kind in ("minimum", "saddle"):
            prof = profile_from_hessian(x, H, kind)
        out.append(CriticalPoint(x, float(F.eval(x)), kind, lam, prof, vecs))
    out.sort(key=lambda c: (c.value, tuple(c.location)))
    return out


# --------------------------------------------------------------------------
# communication height


@numba.njit(cache=True)
def _bottleneck_dijkstra(values, active, dims, src, dst):
    n = dims.shape[0]
    N = values.shape[0]
    stride = np.ones(n, dtype=np.int64)
    for k in range(n - 2, -1, -1):
        stride[k] = stride[k + 1] * dims[k + 1]
    best = np.full(N, np.inf)
    pred = np.full(N, -1, dtype=np.int64)
    done = np.zeros(N, dtype=np.bool_)
    coord = np.empty(n, dtype=np.int64)
    best[src] = values[src]
    heap = [(values[src], np.int64(src))]
    while len(heap) > 0:
        c, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == dst:
            break
        rem = u
        for k in range(n):
            coord[k] = rem // stride[k]
            rem = rem % stride[k]
        for k in range(n):
            for s in (-1, 1):
                ck = coord[k] + s
                if ck < 0 or ck >= dims[k]:
                    continue
                v = u + s * stride[k]
                if not active[v] or done[v]:
                    continue
                nc = max(c, values[v])
                if nc < best[v]:
                    best[v] = nc
                    pred[v] = u
                    heapq.heappush(heap, (nc, v))
    return best[dst], pred


@dataclass(frozen=True, eq=False)
class CommunicationHeight:
    value: float
    witness_path: np.ndarray
    nodes: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0, dtype=np.int64))


def communication_height(F: Potential, x_a, x_b, lattice: LatticeDomain) -> CommunicationHeight:
    """Lowest possible maximum of ``F`` along axis-neighbor lattice paths."""
    x_a = np.atleast_1d(np.asarray(x_a, dtype=float))
    x_b = np.atleast_1d(np.asarray(x_b, dtype=float))
    if np.array_equal(x_a, x_b):
        return CommunicationHeight(float(F.eval(x_a)), np.empty((0, lattice.ndim)))
    src, dst = lattice.nearest(x_a), lattice.nearest(x_b)
    active = lattice.mask.ravel()
    if not (active[src] and active[dst]):
        raise Disconnected("endpoint outside the active lattice region")
    value, pred = _bottleneck_dijkstra(lattice.node_F.ravel(), active,
                                       np.array(lattice.dims, dtype=np.int64), src, dst)
    if not np.isfinite(value):
        raise Disconnected("no lattice path joins the two points")
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    nodes = np.array(path[::-1], dtype=np.int64)
    return CommunicationHeight(float(value), lattice.points(nodes), nodes)


# --------------------------------------------------------------------------
# islands and bridges


@dataclass(frozen=True, eq=False)
class Island:
    id: int
    label: int
    minima: tuple
    min_value: float
    n_nodes: int


@dataclass(frozen=True, eq=False)
class Bridge:
    saddle: CriticalPoint
    endpoints: tuple
    height: float
    #: lattice nodes of the profile neighborhood {g < delta, G < delta}
    nodes: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class SaddleNetwork:
    islands: list
    bridges: list
    topology: str
    island_a: int
    island_b: int
    height: float
    delta: float
    #: series only: island ids from x_a to x_b and the bridge order
    ordering: tuple = ()
    bridge_order: tuple = ()
    labels: Optional[np.ndarray] = field(default=None, repr=False)
    bridges_disjoint: bool = True

    @property
    def intermediate_minima(self) -> list:
        """Deepest minimum in each island of a series chain, x_a side first."""
        by_id = {i.id: i for i in self.islands}
        out = []
        for iid in self.ordering:
            ms = by_id[iid].minima
            out.append(min(ms, key=lambda c: c.value) if ms else None)
        return out

    def to_dict(self) -> dict:
        return {
            "topology": self.topology,
            "height": self.height,
            "delta": self.delta,
            "island_a": self.island_a,
            "island_b": self.island_b,
            "islands": [{"id": i.id, "minima": [[float(v) for v in m.location] for m in i.minima],
                         "min_value": i.min_value, "n_nodes": i.n_nodes} for i in self.islands],
            "bridges": [{"saddle": [float(v) for v in b.saddle.location], "height": b.height,
                         "endpoints": list(b.endpoints)} for b in self.bridges],
            "ordering": list(self.ordering),
            "bridges_disjoint": self.bridges_disjoint,
        }


def _unstable_direction(cp: CriticalPoint) -> np.ndarray:
    if cp.profile is not None and cp.profile.kind == "saddle":
        return cp.profile.frame[:, 0]
    return cp.eigvecs[:, 0]


def _descend(L: LatticeDomain, start: int, labels: np.ndarray) -> int:
    """Steepest-descent walk over the full neighborhood until an island is hit."""
    F = L.node_F
    act = L.mask
    offs = [o for o in itertools.product((-1, 0, 1), repeat=L.ndim) if any(o)]
    cur = np.array(np.unravel_index(start, L.dims))
    dims = np.array(L.dims)
    for _ in range(10 * sum(L.dims)):
        t = tuple(cur)
        if labels[t] > 0:
            return int(labels[t])
        best, best_v = None, F[t]
        for o in offs:
            nb = cur + o
            if np.any(nb < 0) or np.any(nb >= dims) or not act[tuple(nb)]:
                continue
            if F[tuple(nb)] < best_v:
                best, best_v = nb, F[tuple(nb)]
        if best is None:
            return 0
        cur = best
    return 0


def _bridge_nodes(L: LatticeDomain, cp: CriticalPoint, delta: float) -> np.ndarray:
    prof = cp.profile
    pts = L.points()
    y = prof.to_local(pts)
    inside = prof.g(y[:, 0]) < delta
    if prof.G is not None:
        yp = y[:, 1:]
        inside &= (prof.G(yp[:, 0]) if prof.G.dim == 1 else prof.G(yp)) < delta
    return inside.reshape(L.dims) & L.mask


def _representative_height(F: Potential, ch: CommunicationHeight, saddles, L: LatticeDomain):
    if ch.nodes.size == 0:
        return ch.value
    top = L.points(ch.nodes[np.argmax(L.node_F.ravel()[ch.nodes])])
    near = [c for c in saddles if np.linalg.norm(c.location - top) <= 3 * L.h * np.sqrt(L.ndim)]
    if near:
        return float(min(near, key=lambda c: np.linalg.norm(c.location - top)).value)
    return ch.value


def extract_network(F: Potential, x_a, x_b, delta: float, lattice: LatticeDomain, cps,
                    step: Optional[float] = None) -> SaddleNetwork:
    """Islands of ``{F < H - delta/3}`` and the saddle bridges joining them.

    ``H`` is the communication height, taken from the saddle nearest to the
    highest node of the lattice witness path when one is listed.
    """
    L = lattice
    x_a = np.atleast_1d(np.asarray(x_a, dtype=float))
    x_b = np.atleast_1d(np.asarray(x_b, dtype=float))
    saddles = [c for c in cps if is_saddle_like(c)]
    ch = communication_height(F, x_a, x_b, L)
    H = _representative_height(F, ch, saddles, L)

    struct = axis_structure(L.ndim)
    labels, _ = ndimage.label((L.node_F < H - delta / 3) & L.mask, structure=struct)
    la, lb = labels.flat[L.nearest(x_a)], labels.flat[L.nearest(x_b)]
    if la == 0 or lb == 0:
        raise NotSeparated("x_a or x_b lies above the island threshold")
    if la == lb:
        raise NotSeparated("x_a and x_b share an island")

    step = step if step is not None else max(3 * L.h, 0.05)
    edges = []
    for cp in saddles:
        if cp.value >= H + delta / 3 or cp.profile is None:
            continue
        if np.any(cp.location < L.box[:, 0]) or np.any(cp.location > L.box[:, 1]):
            continue
        u = _unstable_direction(cp)
        ends = tuple(_descend(L, L.nearest(cp.location + s * step * u), labels) for s in (-1, 1))
        if 0 in ends or ends[0] == ends[1]:
            continue
        edges.append((cp, ends))

    # keep bridges lying on some simple path between the two islands
    G = nx.Graph()
    G.add_nodes_from([la, lb])
    for _, (i, j) in edges:
        G.add_edge(i, j)
    used = set()
    for path in nx.all_simple_paths(G, la, lb):
        used.update(frozenset(e) for e in zip(path[:-1], path[1:]))
    relevant = [(cp, e) for cp, e in edges if frozenset(e) in used]

    island_labels = sorted({la, lb} | {i for _, e in relevant for i in e})
    remap = {lab: k for k, lab in enumerate(island_labels)}
    minima = [c for c in cps if c.kind == "minimum"]
    islands = []
    for lab in island_labels:
        members = tuple(m for m in minima if labels.flat[L.nearest(m.location)] == lab)
        vals = L.node_F[labels == lab]
        islands.append(Island(remap[lab], int(lab), members, float(vals.min()), int(vals.size)))

    bridges = []
    for cp, (i, j) in relevant:
        ends = tuple(sorted((remap[i], remap[j])))
        bridges.append(Bridge(cp, ends, float(cp.value), _bridge_nodes(L, cp, delta)))
    bridges.sort(key=lambda b: (b.height, tuple(b.saddle.location)))

    ia, ib = remap[la], remap[lb]
    topology, ordering, border = _classify_topology(bridges, ia, ib)

    disjoint = True
    for b1, b2 in itertools.combinations(bridges, 2):
        if np.any(b1.nodes & b2.nodes):
            disjoint = False

    # charge-capacity check: cutting out the bridges separates the islands
    blocked = np.zeros(L.dims, dtype=bool)
    for b in bridges:
        blocked |= b.nodes
    reach, _ = ndimage.label((L.node_F < H + delta / 3) & L.mask & ~blocked, structure=struct)
    ra, rb = reach.flat[L.nearest(x_a)], reach.flat[L.nearest(x_b)]
    if ra != 0 and ra == rb:
        raise UnreachedSaddleSet("removing the bridges leaves x_a and x_b connected")

    return SaddleNetwork(islands, bridges, topology, ia, ib, float(H), float(delta),
                         ordering, border, labels, disjoint)


def _classify_topology(bridges, ia: int, ib: int):
    if not bridges:
        return "general", (), ()
    if all(set(b.endpoints) == {ia, ib} for b in bridges):
        return "parallel", (ia, ib), ()
    G = nx.MultiGraph()
    for k, b in enumerate(bridges):
        G.add_edge(*b.endpoints, key=k)
    simple = nx.Graph(G)
    is_chain = (G.number_of_edges() == simple.number_of_edges()
                and all(d <= 2 for _, d in simple.degree())
                and simple.degree(ia) == 1 and simple.degree(ib) == 1
                and nx.is_connected(simple))
    if not is_chain:
        return "general", (), ()
    order = nx.shortest_path(simple, ia, ib)
    border = []
    for u, v in zip(order[:-1], order[1:]):
        k = next(k for k, b in enumerate(bridges) if set(b.endpoints) == {u, v})
        border.append(k)
    return "series", tuple(order), tuple(border)
