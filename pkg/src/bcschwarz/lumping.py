"""Lumping operators: 0/1 aggregation maps and the sums they induce.

A lumping map sends each fine index to at most one coarse group; applying it
to a vector sums the entries of each group, and applying it to a matrix from
both sides sums whole blocks into coarse blocks (the Galerkin triple product
E a E^T for a 0/1 matrix E). Solving the lumped system drives the summed
residual of every group to zero, which is what makes these maps useful as
coarse corrections: they conserve material in a coarse-grid sense.

For block matrices the coarse entries are block sums; the b variables of a
cell are never mixed across block slots.

Maps may deliberately cover only part of the domain (group -1 marks dropped
indices); that is how subdomain restrictions that discard far-away cells are
expressed. Accidentally incomplete maps are rejected at construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blockmat import BlockSparseMatrix, BlockVector

__all__ = ["LumpingMap", "lump_matrix", "lump_vector", "prolong_vector"]


@dataclass(frozen=True, eq=False)
class LumpingMap:
    """Assignment of fine indices to coarse groups (-1 = not covered)."""

    group_of: np.ndarray
    n_groups: int

    def __post_init__(self):
        group_of = np.ascontiguousarray(self.group_of, dtype=np.int64)
        if group_of.ndim != 1:
            raise ValueError("group_of must be 1-D")
        if self.n_groups < 0:
            raise ValueError("n_groups must be >= 0")
        if group_of.size and group_of.min() < -1:
            raise ValueError("group indices must be >= -1")
        if group_of.size and group_of.max() >= self.n_groups:
            raise ValueError("group index out of range")
        sizes = np.bincount(group_of[group_of >= 0], minlength=self.n_groups)
        if self.n_groups and sizes.min() == 0:
            raise ValueError("every group must contain at least one fine index")
        group_of.setflags(write=False)
        object.__setattr__(self, "group_of", group_of)

    @property
    def n_fine(self) -> int:
        return self.group_of.size

    @property
    def is_full_cover(self) -> bool:
        return bool(np.all(self.group_of >= 0))

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_of[self.group_of >= 0], minlength=self.n_groups)

    @classmethod
    def identity(cls, n: int) -> "LumpingMap":
        return cls(np.arange(n, dtype=np.int64), n)

    @classmethod
    def from_groups(
        cls,
        groups: Sequence[np.ndarray],
        n_fine: int,
        allow_partial: bool = False,
    ) -> "LumpingMap":
        """Build from explicit member lists, checking exactly-once coverage."""
        group_of = np.full(n_fine, -1, dtype=np.int64)
        for g, members in enumerate(groups):
            members = np.asarray(members, dtype=np.int64)
            if members.size == 0:
                raise ValueError(f"group {g} is empty")
            if members.min() < 0 or members.max() >= n_fine:
                raise ValueError(f"group {g}: fine index out of range")
            taken = group_of[members] >= 0
            if np.any(taken):
                raise ValueError(
                    f"fine index {int(members[taken][0])} covered more than once"
                )
            group_of[members] = g
        if not allow_partial and np.any(group_of < 0):
            raise ValueError(
                f"fine index {int(np.flatnonzero(group_of < 0)[0])} not covered"
            )
        return cls(group_of, len(groups))

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group_of == g)


def lump_matrix(
    e: LumpingMap, a: BlockSparseMatrix, allow_partial: bool = False
) -> BlockSparseMatrix:
    """Coarse matrix whose (I, J) block is the sum of fine blocks (i, j),
    i in group I, j in group J.

    With a partial map (and ``allow_partial=True``) rows and columns of
    dropped fine indices simply do not contribute; otherwise an incomplete
    cover is an error.
    """
    if e.n_fine != a.nrows_blocks or not a.is_square:
        raise ValueError(
            f"map covers {e.n_fine} fine indices, matrix is "
            f"{a.nrows_blocks}x{a.ncols_blocks}"
        )
    if not e.is_full_cover and not allow_partial:
        raise ValueError("lumping map does not cover every fine index")

    gi = e.group_of[a.block_row_of_entry()]
    gj = e.group_of[a.col_indices]
    keep = (gi >= 0) & (gj >= 0)
    gi, gj = gi[keep], gj[keep]
    blocks = a.blocks[keep]

    n = e.n_groups
    if gi.size == 0:
        return BlockSparseMatrix.from_coo(
            n,
            n,
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros((0, a.block_size, a.block_size)),
        )
    return BlockSparseMatrix.from_coo(n, n, gi, gj, blocks)


def lump_vector(e: LumpingMap, x: BlockVector) -> BlockVector:
    """Coarse vector of within-group sums, X_I = sum of x_i over i in I."""
    if e.n_fine != x.nblocks:
        raise ValueError(f"map covers {e.n_fine} fine indices, vector has {x.nblocks}")
    xb = x.reshaped()
    out = np.zeros((e.n_groups, x.block_size))
    covered = e.group_of >= 0
    np.add.at(out, e.group_of[covered], xb[covered])
    return BlockVector(out.reshape(-1), x.block_size)


def prolong_vector(e: LumpingMap, x_coarse: BlockVector) -> BlockVector:
    """Replicate each coarse value onto all member cells (transpose of lump).

    Fine indices outside the map receive zero.
    """
    if x_coarse.nblocks != e.n_groups:
        raise ValueError(
            f"map has {e.n_groups} groups, coarse vector has {x_coarse.nblocks}"
        )
    xb = x_coarse.reshaped()
    out = np.zeros((e.n_fine, x_coarse.block_size))
    covered = e.group_of >= 0
    out[covered] = xb[e.group_of[covered]]
    return BlockVector(out.reshape(-1), x_coarse.block_size)
