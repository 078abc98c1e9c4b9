"""Problem ingestion: Matrix Market files, right-hand sides, and a seeded
generator of reservoir-style test matrices.

The generator builds the classic seven-band finite-volume pattern on a
structured grid: one symmetric transmissibility block per cell face, scaled
up on vertical faces (vertical flow dominates areal flow in a reservoir) and
multiplied by a seeded log-uniform heterogeneity factor. Diagonal blocks are
set so that every scalar column sums to the dominance margin, mimicking the
marginal diagonal dominance of the real Jacobians. Optional wells couple
cells along a vertical column or a horizontal row all-to-all, breaking the
banded pattern the way wellbore connections do.

The SPE-style matrices this stands in for are not public; nothing here
claims to reproduce them beyond grid shape, sparsity, and rough scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .blockmat import BlockSparseMatrix, BlockVector, matvec
from .errors import MatrixMarketError
from .grid import StructuredGrid

__all__ = [
    "ProblemInstance",
    "GeneratorSpec",
    "read_matrix_market",
    "write_matrix_market",
    "make_rhs",
    "generate_reservoir_matrix",
    "orsreg_like",
]


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A matrix plus the benchmark right-hand side and its provenance."""

    matrix: BlockSparseMatrix
    rhs: BlockVector
    label: str
    provenance: str
    grid: StructuredGrid | None = None

    def __post_init__(self):
        if self.rhs.values.size != self.matrix.n:
            raise ValueError(
                f"rhs length {self.rhs.values.size} != matrix dimension {self.matrix.n}"
            )
        if self.grid is not None and self.grid.ncells != self.matrix.nrows_blocks:
            raise ValueError(
                f"grid has {self.grid.ncells} cells, matrix has "
                f"{self.matrix.nrows_blocks} block rows"
            )

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def nnz(self) -> int:
        """Stored scalar entries (blocks expanded)."""
        return int(np.count_nonzero(self.matrix.blocks)) if self.matrix.block_size > 1 \
            else self.matrix.nnz_blocks


def read_matrix_market(path, block_size: int = 1) -> ProblemInstance:
    """Read a coordinate real general Matrix Market file.

    Scalar entries are regrouped into blocks by cell = index // block_size;
    duplicate entries are summed. The instance right-hand side defaults to
    the all-ones vector.
    """
    rows, cols, vals = [], [], []
    n_rows = n_cols = None
    with open(path, "r") as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise MatrixMarketError("missing %%MatrixMarket header", 1)
        fields = header.strip().lower().split()
        if fields[1:3] != ["matrix", "coordinate"]:
            raise MatrixMarketError(f"unsupported object/format in {header.strip()!r}", 1)
        if fields[3] != "real":
            raise MatrixMarketError(f"unsupported field type {fields[3]!r}", 1)
        if fields[4] != "general":
            raise MatrixMarketError(f"unsupported symmetry {fields[4]!r}", 1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            parts = line.split()
            if n_rows is None:
                if len(parts) != 3:
                    raise MatrixMarketError("malformed size line", lineno)
                try:
                    n_rows, n_cols, _ = (int(p) for p in parts)
                except ValueError as exc:
                    raise MatrixMarketError(str(exc), lineno) from exc
                continue
            if len(parts) != 3:
                raise MatrixMarketError("malformed entry line", lineno)
            try:
                r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise MatrixMarketError(str(exc), lineno) from exc
            if not (1 <= r <= n_rows and 1 <= c <= n_cols):
                raise MatrixMarketError(f"index ({r}, {c}) out of range", lineno)
            rows.append(r - 1)
            cols.append(c - 1)
            vals.append(v)
    if n_rows is None:
        raise MatrixMarketError("file has no size line")
    if n_rows % block_size or n_cols % block_size:
        raise ValueError(
            f"dimension {n_rows}x{n_cols} not divisible by block size {block_size}"
        )

    b = block_size
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    brow, bcol = rows // b, cols // b
    # one block per distinct (cell row, cell col); scatter scalar entries in
    keys = brow * (n_cols // b) + bcol
    uniq, inverse = np.unique(keys, return_inverse=True)
    blocks = np.zeros((uniq.size, b, b))
    np.add.at(blocks, (inverse, rows % b, cols % b), vals)
    matrix = BlockSparseMatrix.from_coo(
        n_rows // b, n_cols // b, uniq // (n_cols // b), uniq % (n_cols // b), blocks,
        sum_duplicates=False,
    )
    return ProblemInstance(
        matrix=matrix,
        rhs=BlockVector(np.ones(n_rows), b),
        label=str(path),
        provenance=f"file:{path}",
    )


def write_matrix_market(instance: ProblemInstance, path) -> None:
    """Write the instance matrix in 1-based coordinate real general form.

    Entries are emitted in row-major order at 17 significant digits, so a
    write/read round trip is lossless. Explicitly stored zeros are kept.
    """
    a = instance.matrix
    if a.nnz_blocks == 0:
        raise ValueError("refusing to write a matrix with no stored entries")
    b = a.block_size
    lines = [
        "%%MatrixMarket matrix coordinate real general\n",
        f"{a.n} {a.ncols_blocks * b} {a.nnz_blocks * b * b}\n",
    ]
    rows = a.block_row_of_entry()
    order = np.arange(a.nnz_blocks)
    for br in range(b):
        pass  # entries are grouped per block; expand below in row-major order
    with open(path, "w") as fh:
        fh.writelines(lines)
        for r in range(a.nrows_blocks):
            lo, hi = a.row_offsets[r], a.row_offsets[r + 1]
            for sub in range(b):
                for k in range(lo, hi):
                    c = a.col_indices[k]
                    for sc in range(b):
                        v = a.blocks[k, sub, sc]
                        fh.write(f"{r * b + sub + 1} {c * b + sc + 1} {v:.17g}\n")


def make_rhs(instance: ProblemInstance, kind: str = "ones", k: int | None = None) -> BlockVector:
    """Benchmark right-hand sides: all ones, a basis vector, or A times ones."""
    n = instance.n
    b = instance.matrix.block_size
    if kind == "ones":
        return BlockVector(np.ones(n), b)
    if kind == "unit":
        if k is None or not (0 <= k < n):
            raise ValueError(f"unit vector index {k} out of range [0, {n})")
        values = np.zeros(n)
        values[k] = 1.0
        return BlockVector(values, b)
    if kind == "from-solution-ones":
        return matvec(instance.matrix, BlockVector(np.ones(n), b))
    raise ValueError(f"unknown rhs kind {kind!r}")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of the synthetic reservoir-style matrix generator."""

    nx: int
    ny: int
    nz: int
    block_size: int = 1
    anisotropy: float = 10.0
    heterogeneity: float = 2.0
    dominance: float = 0.1
    wells: tuple[tuple[int, int], ...] = ()
    horizontal_well: tuple[int, int] | None = None  # (j, k) row along x
    seed: int = 0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.block_size not in (1, 2, 3, 4):
            raise ValueError(f"unsupported block size {self.block_size}")
        if self.heterogeneity < 1.0:
            raise ValueError("heterogeneity spread must be >= 1")
        if self.dominance < 0.0:
            raise ValueError("dominance margin must be >= 0")

    def to_kv(self) -> str:
        """Flat key=value form used in run manifests and on the CLI."""
        parts = [
            f"nx={self.nx}",
            f"ny={self.ny}",
            f"nz={self.nz}",
            f"b={self.block_size}",
            f"anisotropy={self.anisotropy:g}",
            f"heterogeneity={self.heterogeneity:g}",
            f"dominance={self.dominance:g}",
            f"seed={self.seed}",
        ]
        if self.wells:
            parts.append("wells=" + ";".join(f"{i}:{j}" for i, j in self.wells))
        if self.horizontal_well is not None:
            parts.append("hwell={}:{}".format(*self.horizontal_well))
        return ",".join(parts)

    @classmethod
    def from_kv(cls, text: str) -> "GeneratorSpec":
        kwargs = {}
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            key, _, value = item.partition("=")
            if not _:
                raise ValueError(f"expected KEY=VALUE, got {item!r}")
            key = key.strip()
            value = value.strip()
            if key in ("nx", "ny", "nz", "seed"):
                kwargs[key] = int(value)
            elif key in ("b", "block_size"):
                kwargs["block_size"] = int(value)
            elif key in ("anisotropy", "heterogeneity", "dominance"):
                kwargs[key] = float(value)
            elif key == "wells":
                kwargs["wells"] = tuple(
                    tuple(int(p) for p in w.split(":")) for w in value.split(";") if w
                )
            elif key == "hwell":
                j, k = value.split(":")
                kwargs["horizontal_well"] = (int(j), int(k))
            else:
                raise ValueError(f"unknown generator key {key!r}")
        return cls(**kwargs)


def _coupling_pattern(b: int) -> np.ndarray:
    """Base face-coupling block: strong pressure column, weaker diagonal."""
    c = np.eye(b) * 0.25
    c[0, 0] = 1.0
    c[1:, 0] = 0.5
    c[0, 1:] = 0.1
    return c


def generate_reservoir_matrix(spec: GeneratorSpec) -> ProblemInstance:
    """Deterministically generate a hepta-banded reservoir-style matrix."""
    grid = StructuredGrid(spec.nx, spec.ny, spec.nz)
    b = spec.block_size
    rng = np.random.default_rng(spec.seed)
    base = _coupling_pattern(b)

    rows, cols, vals = [], [], []

    def add_pair(c1: int, c2: int, t: float):
        block = -t * base
        rows.extend((c1, c2))
        cols.extend((c2, c1))
        vals.extend((block, block))

    # one face per axis sweep; draw heterogeneity in a fixed axis order
    for axis, axis_scale in ((0, 1.0), (1, 1.0), (2, spec.anisotropy)):
        stride = grid.strides[axis]
        extent = grid.shape[axis]
        if extent < 2:
            continue
        x, y, z = grid.coords(np.arange(grid.ncells))
        coord = (x, y, z)[axis]
        has_next = coord < extent - 1
        cells = np.flatnonzero(has_next)
        mults = spec.heterogeneity ** rng.uniform(-1.0, 1.0, size=cells.size)
        for cell, m in zip(cells, mults):
            add_pair(int(cell), int(cell + stride), axis_scale * m)

    def complete_well(path: np.ndarray):
        # all-to-all coupling among completed cells, like a shared wellbore
        mult = spec.heterogeneity ** rng.uniform(-1.0, 1.0)
        t = 0.5 * mult
        for a in range(path.size):
            for c in range(a + 1, path.size):
                add_pair(int(path[a]), int(path[c]), t)

    for (wi, wj) in spec.wells:
        if not (0 <= wi < spec.nx and 0 <= wj < spec.ny):
            raise ValueError(f"well column ({wi}, {wj}) outside grid")
        complete_well(grid.index(wi, wj, np.arange(spec.nz)))
    if spec.horizontal_well is not None:
        (hj, hk) = spec.horizontal_well
        if not (0 <= hj < spec.ny and 0 <= hk < spec.nz):
            raise ValueError(f"horizontal well row ({hj}, {hk}) outside grid")
        complete_well(grid.index(np.arange(spec.nx), hj, hk))

    # diagonal per block column: forces every scalar column sum to dominance
    col_sums = np.zeros((grid.ncells, b, b))
    if rows:
        np.add.at(col_sums, np.asarray(cols), np.asarray(vals))
    for cell in range(grid.ncells):
        rows.append(cell)
        cols.append(cell)
        vals.append(spec.dominance * np.eye(b) - col_sums[cell])

    matrix = BlockSparseMatrix.from_coo(
        grid.ncells,
        grid.ncells,
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals),
    )
    return ProblemInstance(
        matrix=matrix,
        rhs=BlockVector(np.ones(matrix.n), b),
        label=f"synthetic-{spec.nx}x{spec.ny}x{spec.nz}-b{b}-seed{spec.seed}",
        provenance="generator:" + spec.to_kv(),
        grid=grid,
    )


# Stand-in for the public ORSREG1 oil-reservoir benchmark (21x21x5 grid,
# n = 2205, 14133 stored entries: the full seven-band pattern). The real
# Harwell-Boeing file is not redistributable here; this instance reproduces
# its size, sparsity pattern, and conditioning scale, not its values.
_ORSREG_SPEC = GeneratorSpec(
    nx=21, ny=21, nz=5, block_size=1,
    anisotropy=10.0, heterogeneity=2.0, dominance=0.004, seed=1988,
)


def orsreg_like() -> ProblemInstance:
    """Deterministic 21x21x5 stand-in matching ORSREG1's size and pattern."""
    instance = generate_reservoir_matrix(_ORSREG_SPEC)
    return replace(instance, label="orsreg1-like", provenance=instance.provenance)
