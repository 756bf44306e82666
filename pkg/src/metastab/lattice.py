"""Box lattices carrying cached potential values and an active-node mask."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from .errors import TooLarge

NODE_BUDGET = 10_000_000


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    box: np.ndarray
    h: float
    dims: tuple
    node_F: np.ndarray
    mask: np.ndarray
    n_components: int
    #: source of node values, used for exact midpoint evaluations
    potential: object = None

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def axes(self) -> list[np.ndarray]:
        return [self.box[k, 0] + self.h * np.arange(self.dims[k]) for k in range(self.ndim)]

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def points(self, idx=None) -> np.ndarray:
        """Coordinates of flat node indices (all nodes by default)."""
        if idx is None:
            idx = np.arange(self.size)
        sub = np.unravel_index(np.asarray(idx), self.dims)
        return np.stack([self.box[k, 0] + self.h * sub[k] for k in range(self.ndim)], axis=-1)

    def nearest(self, x) -> int:
        """Flat index of the node closest to ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        sub = np.rint((x - self.box[:, 0]) / self.h).astype(int)
        sub = np.clip(sub, 0, np.array(self.dims) - 1)
        return int(np.ravel_multi_index(tuple(sub), self.dims))

    def ball(self, center, radius: float) -> np.ndarray:
        """Boolean node set ``{|x - center| <= radius}`` intersected with the mask.

        Always contains at least the node nearest to ``center``.
        """
        center = np.atleast_1d(np.asarray(center, dtype=float))
        d2 = np.zeros(self.dims)
        for k, ax in enumerate(self.axes):
            shape = [1] * self.ndim
            shape[k] = -1
            d2 = d2 + ((ax - center[k]) ** 2).reshape(shape)
        out = (d2 <= radius * radius) & self.mask
        out.flat[self.nearest(center)] = True
        return out

    def with_mask(self, mask: np.ndarray) -> "LatticeDomain":
        mask = np.asarray(mask, dtype=bool)
        _, nc = ndimage.label(mask, structure=axis_structure(self.ndim))
        return LatticeDomain(self.box, self.h, self.dims, self.node_F, mask, int(nc),
                             self.potential)

    def face_area(self, axis: int) -> np.ndarray:
        """Dual-cell face areas for edges along ``axis``, shaped like the node grid.

        The area is the product of dual widths in the other directions; the
        dual width is ``h`` inside and ``h/2`` on the box boundary, so a flat
        cross-section of the box has exactly its continuum area.
        """
        area = np.ones(self.dims)
        for k in range(self.ndim):
            if k == axis:
                continue
            w = np.full(self.dims[k], self.h)
            if self.dims[k] > 1:
                w[0] = w[-1] = 0.5 * self.h
            shape = [1] * self.ndim
            shape[k] = -1
            area = area * w.reshape(shape)
        return area


def axis_structure(n: int) -> np.ndarray:
    return ndimage.generate_binary_structure(n, 1)


def sublevel_rule(level: float) -> Callable:
    """Mask rule ``{F < level}``."""
    return lambda values, lattice: values < level


def build_lattice(F, box, h: float, mask_rule: Optional[Callable] = None,
                  budget: int = NODE_BUDGET) -> LatticeDomain:
    """Regular grid ``box[k,0] + h i`` with ``F`` cached on every node.

    ``mask_rule(values, lattice)`` returns the active-node mask; the default
    marks every node active.
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    if h <= 0:
        raise ValueError("h must be positive")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be nonempty")
    dims = tuple(int(np.floor((hi - lo) / h + 1e-9)) + 1 for lo, hi in box)
    total = int(np.prod(dims, dtype=np.int64))
    if total > budget:
        raise TooLarge(f"{total} nodes exceed the budget of {budget}")
    grids = np.meshgrid(*[lo + h * np.arange(d) for (lo, _), d in zip(box, dims)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    values = np.asarray(F.eval(pts)).reshape(dims)
    full = LatticeDomain(box, float(h), dims, values, np.ones(dims, dtype=bool), 1, F)
    mask = np.ones(dims, dtype=bool) if mask_rule is None else np.asarray(mask_rule(values, full))
    return full.with_mask(mask)


def neighbor_offsets(n: int, diagonal: bool) -> list[tuple]:
    """Half of the neighbor offsets (one of each +-pair)."""
    out = []
    for off in itertools.product((-1, 0, 1), repeat=n):
        if not any(off):
            continue
        if not diagonal and sum(map(abs, off)) != 1:
            continue
        # keep the representative whose first nonzero entry is positive
        first = next(v for v in off if v)
        if first > 0:
            out.append(off)
    return out


def lattice_edges(L: LatticeDomain, diagonal: bool = False, active=None):
    """Edges between active nodes as ``(i, j, offset)`` blocks, one per offset."""
    active = L.mask if active is None else active
    idx = np.arange(L.size).reshape(L.dims)
    blocks = []
    for off in neighbor_offsets(L.ndim, diagonal):
        src = tuple(slice(max(0, -o), d - max(0, o)) for o, d in zip(off, L.dims))
        dst = tuple(slice(max(0, o), d - max(0, -o)) for o, d in zip(off, L.dims))
        ok = active[src] & active[dst]
        blocks.append((idx[src][ok], idx[dst][ok], off, src, ok))
    return blocks


def edge_midpoint_values(L: LatticeDomain, i: np.ndarray, j: np.ndarray, off) -> np.ndarray:
    """``F`` at midpoints of the edges ``i -> j = i + off``.

    Falls back to the endpoint average when the lattice has no potential.
    """
    if L.potential is None:
        return 0.5 * (L.node_F.ravel()[i] + L.node_F.ravel()[j])
    mid = L.points(i) + 0.5 * L.h * np.asarray(off, dtype=float)
    return np.asarray(L.potential.eval(mid), dtype=float).reshape(-1)
