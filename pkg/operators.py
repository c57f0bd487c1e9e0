"""Five-point finite-difference operators on a domain grid.

Every operator is stored as a full symmetric CSR matrix. Each unordered pair
of lattice neighbors is evaluated once and written to both (i, j) and (j, i),
so symmetry holds bitwise, and mirrored pairs with equal field values produce
bitwise equal entries.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from grid import BOUNDARY, Grid, node_values


logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    LAPLACIAN = "laplacian"
    DENSITY_SYMMETRIZED = "density_symmetrized"
    SCHRODINGER = "schrodinger"


@dataclass(frozen=True, eq=False)
class SparseSymOperator:
    matrix: sp.csr_matrix
    kind: OperatorKind
    h: float
    field_key: str = ""
    grid: Optional[Grid] = None
    node_field: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def is_symmetric(self) -> bool:
        return (self.matrix != self.matrix.T).nnz == 0

    def gershgorin_bounds(self) -> tuple[float, float]:
        diag = self.diagonal()
        radius = np.asarray(abs(self.matrix).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - radius)), float(np.max(diag + radius))

    def norm1(self) -> float:
        return float(np.max(np.asarray(abs(self.matrix).sum(axis=0)).ravel()))

    def shifted(self, shift: float) -> "SparseSymOperator":
        matrix = (self.matrix + shift * sp.identity(self.n, format="csr")).tocsr()
        return SparseSymOperator(matrix, self.kind, self.h, f"{self.field_key}+{shift:g}", self.grid, self.node_field)

    def metadata(self) -> dict:
        return {"kind": self.kind.value, "h": self.h, "n": self.n, "field": self.field_key}


def _neighbor_pairs(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Each unordered pair of interior lattice neighbors once, as (i < j)."""
    rows = np.repeat(np.arange(grid.size), 4)
    cols = grid.neighbors.ravel()
    keep = (cols != BOUNDARY) & (rows < cols)
    return rows[keep], cols[keep]


def _symmetric_csr(n: int, diag: np.ndarray, i: np.ndarray, j: np.ndarray, off: np.ndarray) -> sp.csr_matrix:
    rows = np.concatenate([np.arange(n), i, j])
    cols = np.concatenate([np.arange(n), j, i])
    data = np.concatenate([diag, off, off])
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    matrix.sort_indices()
    return matrix


def assemble_laplacian(grid: Grid) -> SparseSymOperator:
    """-Δ with Dirichlet elimination: 4/h² on the diagonal, -1/h² per interior neighbor."""
    inv_h2 = 1.0 / (grid.h * grid.h)
    i, j = _neighbor_pairs(grid)
    matrix = _symmetric_csr(
        grid.size,
        np.full(grid.size, 4.0 * inv_h2),
        i,
        j,
        np.full(len(i), -inv_h2),
    )
    logger.debug("laplacian n=%d nnz=%d", grid.size, matrix.nnz)
    return SparseSymOperator(matrix, OperatorKind.LAPLACIAN, grid.h, "homogeneous:1", grid)


def assemble_density_operator(grid: Grid, sigma) -> SparseSymOperator:
    """Σ^(-1/2) L Σ^(-1/2) with Σ sampled at the grid nodes."""
    if not sigma.is_density:
        raise ValueError(f"{sigma.kind.value} is not a density")
    values = node_values(grid, sigma)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        bad = int(np.argmin(np.where(np.isfinite(values), values, -np.inf)))
        raise ValueError(f"density must be positive at every grid point, got {values[bad]} at {tuple(grid.points[bad])}")

    inv_h2 = 1.0 / (grid.h * grid.h)
    s = 1.0 / np.sqrt(values)
    i, j = _neighbor_pairs(grid)
    # the product s_i * s_j is commutative, so mirrored pairs agree bitwise
    diag = (4.0 * inv_h2) * (s * s)
    off = -inv_h2 * (s[i] * s[j])
    matrix = _symmetric_csr(grid.size, diag, i, j, off)
    return SparseSymOperator(
        matrix,
        OperatorKind.DENSITY_SYMMETRIZED,
        grid.h,
        _field_key(sigma),
        grid,
        values,
    )


def assemble_schrodinger(grid: Grid, v, kinetic_coeff: float = 1.0) -> SparseSymOperator:
    """kinetic_coeff * L + diag(V)."""
    if not kinetic_coeff > 0:
        raise ValueError(f"kinetic coefficient must be positive, got {kinetic_coeff}")
    values = node_values(grid, v)
    if not np.all(np.isfinite(values)):
        raise ValueError("potential must be finite at every grid point")

    inv_h2 = 1.0 / (grid.h * grid.h)
    i, j = _neighbor_pairs(grid)
    diag = kinetic_coeff * (4.0 * inv_h2) + values
    off = np.full(len(i), kinetic_coeff * -inv_h2)
    matrix = _symmetric_csr(grid.size, diag, i, j, off)
    return SparseSymOperator(
        matrix,
        OperatorKind.SCHRODINGER,
        grid.h,
        _field_key(v),
        grid,
        values,
    )


def _field_key(field) -> str:
    key = field.spec.key()
    if field.block_scale:
        key += ";scaled:" + ",".join(f"{b}*{f:g}" for b, f in field.block_scale)
    return key


def export_matrix_market(op: SparseSymOperator, path) -> Path:
    """Write the operator in MatrixMarket coordinate format, symmetric layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        scipy.io.mmwrite(
            handle,
            op.matrix,
            comment=f" kind={op.kind.value} h={op.h!r} field={op.field_key}",
            field="real",
            precision=17,
            symmetry="symmetric",
        )
    return path
