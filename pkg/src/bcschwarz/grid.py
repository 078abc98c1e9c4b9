"""Structured grids, processor partitions, and composite restrictions.

Cells of an (nx, ny, nz) grid are numbered naturally, x fastest:
``index = i + nx * (j + ny * k)``. Processors own contiguous axis-aligned
boxes, split along x only or along x and y. A composite restriction is the
per-processor view used by boundary-conditioned Schwarz: the processor's own
cells at full resolution, neighbouring processors' cells aggregated into
small coarsening blocks, and the remaining distant cells aggregated more
coarsely still, with the distant grouping identical from every processor's
point of view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lumping import LumpingMap

__all__ = [
    "StructuredGrid",
    "Partition",
    "CompositeRestriction",
    "partition",
    "build_coarsening",
    "build_composite_restriction",
    "restriction_as_lumping",
]


@dataclass(frozen=True)
class StructuredGrid:
    """Cell counts per axis; natural ordering with x fastest, then y, then z."""

    nx: int
    ny: int
    nz: int

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self}")

    @property
    def ncells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def strides(self) -> tuple[int, int, int]:
        """Linear-index step per unit move along x, y, z."""
        return (1, self.nx, self.nx * self.ny)

    def index(self, i, j, k):
        return i + self.nx * (j + self.ny * k)

    def coords(self, cell):
        cell = np.asarray(cell)
        return cell % self.nx, (cell // self.nx) % self.ny, cell // (self.nx * self.ny)

    def box_cells(self, lo: tuple[int, int, int], hi: tuple[int, int, int]) -> np.ndarray:
        """Cells of the half-open box [lo, hi), in natural order."""
        xs = np.arange(lo[0], hi[0])
        ys = np.arange(lo[1], hi[1])
        zs = np.arange(lo[2], hi[2])
        return (
            xs[None, None, :] + self.nx * (ys[None, :, None] + self.ny * zs[:, None, None])
        ).reshape(-1)


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of grid cells to K processors, each a contiguous box."""

    grid: StructuredGrid
    K: int
    boxes: tuple[tuple[tuple[int, int, int], tuple[int, int, int]], ...]
    mode: str

    def __post_init__(self):
        owner = np.full(self.grid.ncells, -1, dtype=np.int64)
        for p, (lo, hi) in enumerate(self.boxes):
            cells = self.grid.box_cells(lo, hi)
            if np.any(owner[cells] >= 0):
                raise ValueError("partition boxes overlap")
            owner[cells] = p
        if np.any(owner < 0):
            raise ValueError("partition boxes do not cover the grid")
        owner.setflags(write=False)
        object.__setattr__(self, "_owner", owner)

    @property
    def owner(self) -> np.ndarray:
        """Processor index of every cell."""
        return self._owner

    def cells(self, p: int) -> np.ndarray:
        """Cells owned by processor p, in natural order."""
        lo, hi = self.boxes[p]
        return self.grid.box_cells(lo, hi)

    def neighbors(self, p: int) -> tuple[int, ...]:
        """Processors whose boxes share a face with processor p's box."""
        lo_p, hi_p = self.boxes[p]
        out = []
        for q, (lo_q, hi_q) in enumerate(self.boxes):
            if q == p:
                continue
            touch = overlap = 0
            for ax in range(3):
                lo = max(lo_p[ax], lo_q[ax])
                hi = min(hi_p[ax], hi_q[ax])
                if hi > lo:
                    overlap += 1
                elif hi == lo:
                    touch += 1
            if overlap == 2 and touch == 1:
                out.append(q)
        return tuple(out)


def _split_axis(extent: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous near-equal ranges; earlier parts take the remainder."""
    if parts > extent:
        raise ValueError(f"cannot split {extent} planes into {parts} parts")
    base, extra = divmod(extent, parts)
    bounds, start = [], 0
    for p in range(parts):
        size = base + (1 if p < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def _square_factors(k: int) -> tuple[int, int]:
    """Factor k = kx * ky with the factors as close as possible, kx >= ky."""
    ky = int(np.sqrt(k))
    while k % ky:
        ky -= 1
    return k // ky, ky


def partition(grid: StructuredGrid, K: int, mode: str = "x") -> Partition:
    """Split the grid into K contiguous boxes along x, or along x and y."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if mode not in ("x", "xy"):
        raise ValueError(f"unknown decomposition mode {mode!r}")

    if mode == "x" or K == 1:
        boxes = tuple(
            ((x0, 0, 0), (x1, grid.ny, grid.nz))
            for x0, x1 in _split_axis(grid.nx, K)
        )
    else:
        kx, ky = _square_factors(K)
        x_bounds = _split_axis(grid.nx, kx)
        y_bounds = _split_axis(grid.ny, ky)
        # x varies fastest in the processor numbering, matching cell order
        boxes = tuple(
            ((x0, y0, 0), (x1, y1, grid.nz))
            for y0, y1 in y_bounds
            for x0, x1 in x_bounds
        )
    return Partition(grid, K, boxes, mode)


def build_coarsening(grid: StructuredGrid, region: np.ndarray, c: int) -> LumpingMap:
    """Tile a cell region with axis-aligned c x c x c blocks.

    Blocks are anchored at the region's bounding-box origin and clipped at
    its far edges; each clipped block is one group. Groups are numbered by
    the natural order of their origin cell, so the map is deterministic.
    The returned map spans the whole grid with cells outside the region
    marked as not covered.
    """
    region = np.asarray(region, dtype=np.int64)
    if region.size == 0:
        raise ValueError("empty coarsening region")
    if c < 1:
        raise ValueError(f"coarsening block size must be >= 1, got {c}")
    x, y, z = grid.coords(region)
    bx = (x - x.min()) // c
    by = (y - y.min()) // c
    bz = (z - z.min()) // c
    keys = bx + (bx.max() + 1) * (by + (by.max() + 1) * bz)
    _, group = np.unique(keys, return_inverse=True)
    group_of = np.full(grid.ncells, -1, dtype=np.int64)
    group_of[region] = group
    return LumpingMap(group_of, int(group.max()) + 1)


@dataclass(frozen=True, eq=False)
class CompositeRestriction:
    """One processor's reduced view of the whole grid.

    Reduced indices are ordered: own cells first (natural order, one group
    each), then near-field groups (by neighbour processor, then group), then
    far-field groups (by processor, then group). Cells outside all three
    ranges (possible when a level is switched off) are dropped.
    """

    proc: int
    group_of: np.ndarray
    n_groups: int
    n_own: int
    n_near_groups: int
    n_far_groups: int
    own_cells: np.ndarray

    @property
    def m(self) -> int:
        """Total reduced dimension (in cells/groups)."""
        return self.n_groups

    def as_lumping(self) -> LumpingMap:
        return LumpingMap(self.group_of, self.n_groups)

    def own_reduced_indices(self) -> np.ndarray:
        """Reduced index of each own cell (own cells are singleton groups)."""
        return self.group_of[self.own_cells]


def build_composite_restriction(
    part: Partition,
    proc: int,
    c: int,
    c_far: int | str = "domain",
    include_near: bool = True,
    include_far: bool = True,
) -> CompositeRestriction:
    """Assemble processor ``proc``'s composite restriction.

    Own cells stay at full resolution. Face-neighbour processors' subdomains
    are tiled with ``c``-blocks; every other processor's subdomain is tiled
    with ``c_far``-blocks, or lumped whole when ``c_far="domain"``. Both
    aggregation levels tile each subdomain independently of the viewer, so
    all processors agree on the groupings they share. Either level can be
    switched off, which drops those cells from the view entirely.
    """
    grid = part.grid
    own = part.cells(proc)
    group_of = np.full(grid.ncells, -1, dtype=np.int64)
    group_of[own] = np.arange(own.size)
    next_group = own.size

    near = part.neighbors(proc) if include_near else ()
    n_near = 0
    for q in near:
        sub = build_coarsening(grid, part.cells(q), c)
        covered = sub.group_of >= 0
        group_of[covered] = sub.group_of[covered] + next_group
        next_group += sub.n_groups
        n_near += sub.n_groups

    n_far = 0
    if include_far:
        for q in range(part.K):
            if q == proc or q in near:
                continue
            cells_q = part.cells(q)
            if c_far == "domain":
                group_of[cells_q] = next_group
                next_group += 1
                n_far += 1
            else:
                sub = build_coarsening(grid, cells_q, int(c_far))
                covered = sub.group_of >= 0
                group_of[covered] = sub.group_of[covered] + next_group
                next_group += sub.n_groups
                n_far += sub.n_groups

    return CompositeRestriction(
        proc=proc,
        group_of=group_of,
        n_groups=next_group,
        n_own=own.size,
        n_near_groups=n_near,
        n_far_groups=n_far,
        own_cells=own,
    )


def restriction_as_lumping(r: CompositeRestriction) -> LumpingMap:
    """Flatten a composite restriction into a single fine-to-reduced map."""
    return r.as_lumping()
