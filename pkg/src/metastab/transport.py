"""Lattice oracles: weighted geodesic distance, minimal separating surface, capacity.

All three work on the same lattice and take the same energy ``shift``:
weights are evaluated as ``exp((F - shift)/eps)`` so that only moderate
exponents appear, and the shift is carried in the returned ScaledValue.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pyamg
from scipy import ndimage, sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as spla

from .errors import Disconnected, NoConvergence, ShiftOverflow
from .lattice import (LatticeDomain, axis_structure, build_lattice, edge_midpoint_values,
                      lattice_edges, sublevel_rule)
from .scaled import ScaledValue

__all__ = ["LatticeDomain", "build_lattice", "sublevel_rule", "PathResult", "CutResult",
           "EllipticSolution", "geodesic_distance", "min_separating_surface",
           "solve_capacity_pde", "potential_oscillation_on_islands", "OscillationReport"]

MAX_EXPONENT = 700.0


@dataclass(frozen=True, eq=False)
class PathResult:
    value: ScaledValue
    polyline: np.ndarray
    nodes: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class CutResult:
    value: ScaledValue
    #: lattice faces crossed by the cut as (node on A side, node on B side)
    cut_faces: np.ndarray = field(repr=False)
    flow_value: float = 0.0
    #: |integer flow - integer cut| / integer cut, zero by max-flow/min-cut duality
    duality_gap: float = 0.0
    connected: bool = True


@dataclass(frozen=True, eq=False)
class EllipticSolution:
    h_values: np.ndarray = field(repr=False)
    energy: ScaledValue
    residual: float
    eps: float
    shift: float
    iterations: int = 0
    method: str = "cg"
    lattice: Optional[LatticeDomain] = field(default=None, repr=False)


def _check_sets(L: LatticeDomain, A: np.ndarray, B: np.ndarray):
    A = np.asarray(A, dtype=bool).reshape(L.dims)
    B = np.asarray(B, dtype=bool).reshape(L.dims)
    if not A.any() or not B.any():
        raise Disconnected("A and B must be nonempty")
    if np.any(A & B):
        raise Disconnected("A and B must be disjoint")
    return A & L.mask, B & L.mask


def _exponent(F_edge: np.ndarray, shift: float, eps: float, sign: float) -> np.ndarray:
    z = sign * (F_edge - shift) / eps
    if z.size and np.max(z) > MAX_EXPONENT:
        raise ShiftOverflow(f"local exponent {np.max(z):.1f} exceeds {MAX_EXPONENT}; "
                            "raise the shift or shrink the mask")
    return np.exp(z)


def default_shift(L: LatticeDomain, A: np.ndarray, B: np.ndarray) -> float:
    """Lattice communication height between ``A`` and ``B``."""
    from .landscape import _bottleneck_dijkstra

    A, B = _check_sets(L, A, B)
    src = int(np.flatnonzero(A.ravel())[0])
    dst = int(np.flatnonzero(B.ravel())[0])
    val, _ = _bottleneck_dijkstra(L.node_F.ravel(), L.mask.ravel(),
                                  np.array(L.dims, dtype=np.int64), src, dst)
    if not np.isfinite(val):
        raise Disconnected("A and B lie in different components")
    return float(val)


# --------------------------------------------------------------------------
# geodesic distance


def geodesic_distance(L: LatticeDomain, A, B, eps: float,
                      shift: Optional[float] = None) -> PathResult:
    """Shortest path for the metric ``exp(F/eps)|dx|`` on the full-neighborhood lattice.

    Edge weight is ``length * exp((F(midpoint) - shift)/eps)``.
    """
    A, B = _check_sets(L, A, B)
    if shift is None:
        shift = default_shift(L, A, B)
    rows, cols, wts = [], [], []
    for i, j, off, _, _ in lattice_edges(L, diagonal=True):
        if i.size == 0:
            continue
        length = L.h * math.sqrt(sum(o * o for o in off))
        w = length * _exponent(edge_midpoint_values(L, i, j, off), shift, eps, 1.0)
        rows += [i, j]
        cols += [j, i]
        wts += [w, w]
    N = L.size
    G = sparse.csr_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N))
    src = np.flatnonzero(A.ravel())
    dist, pred, _ = csgraph.dijkstra(G, directed=True, indices=src, min_only=True,
                                  return_predecessors=True)
    bidx = np.flatnonzero(B.ravel())
    k = int(bidx[np.argmin(dist[bidx])])
    if not np.isfinite(dist[k]):
        raise Disconnected("no lattice path joins A and B")
    path = [k]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    nodes = np.array(path[::-1], dtype=np.int64)
    return PathResult(ScaledValue(float(dist[k]), float(shift)), L.points(nodes), nodes)


# --------------------------------------------------------------------------
# minimal separating surface


INT_CAP = 2 ** 30


def _face_graph(L: LatticeDomain, eps: float, shift: float):
    """Axis edges with capacity ``area * exp(-(F(face) - shift)/eps)``."""
    I, J, C = [], [], []
    for i, j, off, src, ok in lattice_edges(L, diagonal=False):
        if i.size == 0:
            continue
        area = L.face_area(int(np.flatnonzero(off)[0]))[src][ok]
        c = area * _exponent(edge_midpoint_values(L, i, j, off), shift, eps, -1.0)
        I.append(i)
        J.append(j)
        C.append(c)
    if not I:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return np.concatenate(I), np.concatenate(J), np.concatenate(C)


def _max_flow_pass(i, j, c, s, t, n, clip, scale):
    cap = np.floor(np.minimum(c, clip) * scale)
    keep = cap > 0
    rows = np.concatenate([i[keep], j[keep]])
    cols = np.concatenate([j[keep], i[keep]])
    data = np.concatenate([cap[keep], cap[keep]])
    M = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    M.sum_duplicates()
    # dinic only accepts int32; wider integer types are silently truncated
    M = sparse.csr_matrix((np.minimum(M.data, INT_CAP).astype(np.int32), M.indices, M.indptr),
                          shape=(n, n))
    res = csgraph.maximum_flow(M, s, t, method="dinic")
    resid = M.astype(np.int64) - res.flow.tocsr().astype(np.int64)
    resid.data = (resid.data > 0).astype(np.int8)
    resid.eliminate_zeros()
    seen = np.zeros(n, dtype=bool)
    seen[csgraph.breadth_first_order(resid, s, directed=True, return_predecessors=False)] = True
    return int(res.flow_value), seen, M


def _bk_cut(ii, jj, cc, s, t, N):
    """Boykov-Kolmogorov max-flow on float capacities; returns flow and source side."""
    import maxflow

    g = maxflow.Graph[float](N, cc.size)
    g.add_nodes(N)
    inner = (ii < N) & (jj < N)
    g.add_edges(ii[inner].astype(np.int32), jj[inner].astype(np.int32), cc[inner], cc[inner])
    src = np.zeros(N)
    snk = np.zeros(N)
    for a, b in ((ii, jj), (jj, ii)):
        np.add.at(src, b[(a == s) & (b < N)], cc[(a == s) & (b < N)])
        np.add.at(snk, b[(a == t) & (b < N)], cc[(a == t) & (b < N)])
    nz = np.flatnonzero((src > 0) | (snk > 0))
    g.add_grid_tedges(nz.astype(np.int32), src[nz], snk[nz])
    flow = g.maxflow()
    seen = np.zeros(N + 2, dtype=bool)
    seen[:N] = ~np.asarray(g.get_grid_segments(np.arange(N, dtype=np.int32)), dtype=bool)
    seen[s] = True
    # s and t themselves carry direct s-t edges (A adjacent to B)
    direct = cc[((ii == s) & (jj == t)) | ((ii == t) & (jj == s))].sum()
    return float(flow) + float(direct), seen


def min_separating_surface(L: LatticeDomain, A, B, eps: float, shift: Optional[float] = None,
                           method: str = "bk") -> CutResult:
    """Minimal Gibbs-weighted set of lattice faces separating ``A`` from ``B``.

    ``A`` and ``B`` are contracted into a source and a sink.  The default
    solver is Boykov-Kolmogorov on float capacities.  ``method="dinic"``
    runs scipy's Dinic solver on int32 capacities in two passes: the first
    bounds the cut value ``U``, the second clips capacities at ``U`` (no
    edge above the minimum cut can be in it) and rescales ``U`` to ``2^30``.
    """
    A, B = _check_sets(L, A, B)
    if shift is None:
        shift = default_shift(L, A, B)
    i, j, c = _face_graph(L, eps, shift)
    N = L.size
    s, t = N, N + 1
    remap = np.arange(N + 2)
    remap[:N][A.ravel()] = s
    remap[:N][B.ravel()] = t
    ii, jj = remap[i], remap[j]
    keep = ii != jj
    i, j, ii, jj, cc = i[keep], j[keep], ii[keep], jj[keep], c[keep]
    empty = CutResult(ScaledValue(0.0, -float(shift)), np.empty((0, 2), np.int64), 0.0, 0.0,
                      False)
    src_side = cc[(ii == s) | (jj == s)].sum()
    sink_side = cc[(ii == t) | (jj == t)].sum()
    U = float(min(src_side, sink_side))
    if U <= 0:
        return empty

    def cut_of(seen):
        cross = seen[ii] != seen[jj]
        return cross, float(cc[cross].sum())

    if method == "bk":
        flow, seen = _bk_cut(ii, jj, cc, s, t, N)
        if flow <= 0:
            return empty
        cross, value = cut_of(seen)
        gap = abs(flow - value) / value
    elif method == "dinic":
        flow, seen, _ = _max_flow_pass(ii, jj, cc, s, t, N + 2, U, INT_CAP / U)
        if flow == 0:
            return empty
        _, U1 = cut_of(seen)
        scale = INT_CAP / U1
        flow, seen, _ = _max_flow_pass(ii, jj, cc, s, t, N + 2, U1, scale)
        cross, value = cut_of(seen)
        int_cut = float(np.floor(np.minimum(cc, U1) * scale)[cross].sum())
        gap = abs(flow - int_cut) / max(int_cut, 1.0)
        flow = flow / scale
    else:
        raise ValueError(f"unknown method {method!r}")
    a_side = seen[ii[cross]]
    faces = np.column_stack([np.where(a_side, i[cross], j[cross]),
                             np.where(a_side, j[cross], i[cross])])
    return CutResult(ScaledValue(value, -float(shift)), faces, float(flow), float(gap), True)


# --------------------------------------------------------------------------
# capacity by a finite-volume solve


def _anchored_region(L: LatticeDomain, A, B, keep=None) -> np.ndarray:
    keep = L.mask if keep is None else keep | A | B
    lab, _ = ndimage.label(keep, structure=axis_structure(L.ndim))
    touch = np.unique(lab[(A | B) & (lab > 0)])
    return np.isin(lab, touch) & (lab > 0)


def solve_capacity_pde(L: LatticeDomain, A, B, eps: float, shift: Optional[float] = None,
                       rtol: float = 1e-10, maxiter: int = 20000,
                       method: str = "amg", cutoff: Optional[float] = 12.0) -> EllipticSolution:
    """Equilibrium potential and capacity ``eps sum_f c_f (u_i - u_j)^2``.

    Face conductances are ``area/h * exp(-(F(face) - shift)/eps)``; ``u = 1``
    on ``A``, ``u = 0`` on ``B`` and no flux leaves the active region.
    The system is solved by conjugate gradients preconditioned with
    smoothed-aggregation multigrid, falling back to Jacobi; ``method="direct"``
    uses a sparse LU factorization instead.  Nodes with ``F >= shift +
    cutoff * eps`` are dropped (their conductance is below ``e^-cutoff``);
    ``cutoff=None`` keeps the whole mask.
    """
    A, B = _check_sets(L, A, B)
    if shift is None:
        shift = default_shift(L, A, B)
    keep = None if cutoff is None else L.mask & (L.node_F < shift + cutoff * eps)
    region = _anchored_region(L, A, B, keep)
    vals = L.node_F[region]
    spread = (vals.max() - vals.min()) / eps
    if spread > math.log(1e12):
        warnings.warn(f"conductance ratio e^{spread:.1f} across the region; expect slow PCG",
                      RuntimeWarning, stacklevel=2)
    sub = L.with_mask(region)
    i, j, c = [], [], []
    for ie, je, off, src, ok in lattice_edges(sub, diagonal=False):
        if ie.size == 0:
            continue
        area = L.face_area(int(np.flatnonzero(off)[0]))[src][ok]
        w = area / L.h * _exponent(edge_midpoint_values(L, ie, je, off), shift, eps, -1.0)
        i.append(ie)
        j.append(je)
        c.append(w)
    i, j, c = np.concatenate(i), np.concatenate(j), np.concatenate(c)

    N = L.size
    u = np.full(N, np.nan)
    Af, Bf = A.ravel(), B.ravel()
    u[Af] = 1.0
    u[Bf] = 0.0
    free = region.ravel() & ~Af & ~Bf
    fidx = np.full(N, -1, dtype=np.int64)
    fidx[free] = np.arange(int(free.sum()))
    n = int(free.sum())
    iters = 0
    residual = 0.0
    if n:
        fi, fj = free[i], free[j]
        both = fi & fj
        diag = np.zeros(n)
        np.add.at(diag, fidx[i[fi]], c[fi])
        np.add.at(diag, fidx[j[fj]], c[fj])
        off_r = np.concatenate([fidx[i[both]], fidx[j[both]]])
        off_c = np.concatenate([fidx[j[both]], fidx[i[both]]])
        off_v = -np.concatenate([c[both], c[both]])
        K = sparse.csr_matrix((np.concatenate([diag, off_v]),
                               (np.concatenate([np.arange(n), off_r]),
                                np.concatenate([np.arange(n), off_c]))), shape=(n, n))
        rhs = np.zeros(n)
        one_i = fi & ~fj
        np.add.at(rhs, fidx[i[one_i]], c[one_i] * np.nan_to_num(u[j[one_i]]))
        one_j = fj & ~fi
        np.add.at(rhs, fidx[j[one_j]], c[one_j] * np.nan_to_num(u[i[one_j]]))
        x, iters, method = _solve_spd(K, rhs, rtol, maxiter, method)
        u[free] = x
        residual = float(np.max(np.abs(K @ x - rhs)) / max(np.max(np.abs(rhs)), 1e-300))
    ui, uj = u[i], u[j]
    energy = eps * float(np.sum(c * (ui - uj) ** 2))
    return EllipticSolution(u.reshape(L.dims), ScaledValue(energy, -float(shift)), residual,
                            eps, float(shift), iters, method, L)


def _solve_spd(K, rhs, rtol, maxiter, method):
    if method == "direct":
        return spla.spsolve(K.tocsc(), rhs), 0, "direct"
    count = [0]

    def cb(_):
        count[0] += 1

    # algebraic multigrid handles conductance contrasts of e^12 in a few dozen steps
    # pyamg draws start vectors from the global legacy RNG; pin it for reproducible runs
    state = np.random.get_state()
    np.random.seed(0)
    try:
        ml = pyamg.smoothed_aggregation_solver(K.tocsr(), symmetry="symmetric")
    finally:
        np.random.set_state(state)
    x, info = spla.cg(K, rhs, rtol=rtol, atol=0.0, maxiter=min(maxiter, 500),
                      M=ml.aspreconditioner(), callback=cb)
    if info == 0:
        return x, count[0], "cg-amg"
    count[0] = 0
    d = K.diagonal()
    M = spla.LinearOperator(K.shape, lambda v: v / d)
    x, info = spla.cg(K, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=cb)
    if info != 0:
        raise NoConvergence(f"PCG stopped after {count[0]} iterations")
    return x, count[0], "cg-jacobi"


# --------------------------------------------------------------------------
# oscillation on islands


@dataclass(frozen=True)
class OscillationReport:
    eps: float
    threshold: float
    #: (island id, oscillation, flagged) per island
    islands: tuple

    @property
    def passed(self) -> bool:
        return not any(flag for _, _, flag in self.islands)

    @property
    def max_oscillation(self) -> float:
        return max((o for _, o, _ in self.islands), default=0.0)

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "max": self.max_oscillation,
                "islands": [{"id": i, "oscillation": o, "flagged": f}
                            for i, o, f in self.islands]}


def potential_oscillation_on_islands(sol: EllipticSolution, net, c_osc: float = 5.0
                                     ) -> OscillationReport:
    """``max - min`` of the equilibrium potential over each island."""
    thr = c_osc * sol.eps
    if net is None or not net.islands:
        return OscillationReport(sol.eps, thr, ())
    labels = net.labels
    hv = sol.h_values
    out = []
    for isl in net.islands:
        sel = labels == isl.label
        if labels.shape != hv.shape:
            raise ValueError("network and solution live on different lattices")
        vals = hv[sel]
        vals = vals[np.isfinite(vals)]
        osc = float(vals.max() - vals.min()) if vals.size else 0.0
        out.append((isl.id, osc, osc > thr))
    return OscillationReport(sol.eps, thr, tuple(out))


# --------------------------------------------------------------------------
# CSV dumps


def dump_solution_csv(sol: EllipticSolution, path) -> None:
    L = sol.lattice
    idx = np.flatnonzero(np.isfinite(sol.h_values.ravel()))
    pts = L.points(idx)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"x{k + 1}" for k in range(L.ndim)] + ["h"])
        for n, p, v in zip(idx, pts, sol.h_values.ravel()[idx]):
            w.writerow([int(n)] + [f"{c:.10g}" for c in p] + [f"{v:.12g}"])


def dump_polyline_csv(L: LatticeDomain, nodes, path) -> None:
    pts = L.points(np.asarray(nodes))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"x{k + 1}" for k in range(L.ndim)] + ["F"])
        for n, p in zip(nodes, pts):
            w.writerow([int(n)] + [f"{c:.10g}" for c in p] + [f"{L.node_F.flat[n]:.12g}"])


def dump_cut_csv(L: LatticeDomain, cut: CutResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_a", "node_b"] + [f"x{k + 1}" for k in range(L.ndim)])
        for a, b in cut.cut_faces:
            mid = 0.5 * (L.points(a) + L.points(b))
            w.writerow([int(a), int(b)] + [f"{c:.10g}" for c in mid])
