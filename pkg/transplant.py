"""Transplantation between two block domains built from the same triangle.

A transplantation writes a grid function on the target domain, block by block,
as a signed sum of reflected copies of the source function's block
restrictions. The 7x7 block coefficients are derived from the intertwining
equation on a coarse grid rather than read off a drawing.
"""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from eigen import Spectrum
from geometry import Domain, Parity, Placement
from grid import Grid, build_grid, subdivisions
from operators import SparseSymOperator, assemble_laplacian


logger = logging.getLogger(__name__)

MAX_FREE_COEFFICIENTS = 8
NULLSPACE_RTOL = 1e-9


class TransplantError(RuntimeError):
    """No integer intertwiner exists in the block-transport ansatz."""


@dataclass(frozen=True)
class TransplantMap:
    """coeffs[i][j]: sign of source block j's copy inside target block i."""

    source: str
    target: str
    block_ids: tuple[str, ...]
    coeffs: tuple[tuple[int, ...], ...]
    transports: tuple[tuple[str, str, Placement], ...]

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=int)

    def block_transport(self, target_block: str, source_block: str) -> Placement:
        for i, j, placement in self.transports:
            if (i, j) == (target_block, source_block):
                return placement
        raise KeyError(f"no transport from {source_block} to {target_block}")

    def nonzeros_per_row(self) -> list[int]:
        return [int(np.count_nonzero(row)) for row in self.matrix]

    def nonzeros_per_column(self) -> list[int]:
        return [int(np.count_nonzero(col)) for col in self.matrix.T]

    def to_text(self) -> str:
        header = "   " + " ".join(f"{b:>2}" for b in self.block_ids)
        rows = [f"{b:>2} " + " ".join(f"{c:>2d}" for c in row) for b, row in zip(self.block_ids, self.coeffs)]
        return "\n".join([f"# {self.source} -> {self.target}", header, *rows]) + "\n"

    def to_dict(self) -> dict:
        return {"source": self.source, "target": self.target, "blocks": list(self.block_ids),
                "coeffs": [list(row) for row in self.coeffs]}


def class_signs(domain: Domain) -> np.ndarray:
    """+1 for even blocks, -1 for odd blocks."""
    return np.array([1 if block.parity == Parity.EVEN else -1 for block in domain.blocks])


def sign_twisted(tmap: TransplantMap, domain_a: Domain, domain_b: Domain) -> np.ndarray:
    """T[i][j] * ε_i * ε_j; a 0/1 incidence pattern for the GWW pair."""
    return class_signs(domain_b)[:, None] * tmap.matrix * class_signs(domain_a)[None, :]


def _transport(domain_a: Domain, domain_b: Domain, target_block: str, source_block: str) -> Placement:
    """Isometry (leg units) carrying target block i of B onto source block j of A."""
    pa = domain_a.block(source_block).placement
    pb = domain_b.block(target_block).placement
    m = pa.m @ pb.m.T
    t = pa.t - m @ pb.t
    return Placement(
        ((int(m[0, 0]), int(m[0, 1])), (int(m[1, 0]), int(m[1, 1]))),
        (int(t[0]), int(t[1])),
    )


def _block_copy(grid_a: Grid, grid_b: Grid, rows_b: np.ndarray, placement: Placement) -> sp.csr_matrix:
    """0/1 matrix reading the source value at the transported image of each target row."""
    n = grid_b.n
    images = grid_b.points[rows_b] @ placement.m.T + n * placement.t
    cols = np.full(len(rows_b), -1, dtype=np.int64)
    for k, p in enumerate(images.tolist()):
        image = grid_a.index(p)
        if image is not None:
            cols[k] = image
    keep = cols >= 0
    data = np.ones(int(keep.sum()))
    return sp.csr_matrix((data, (rows_b[keep], cols[keep])), shape=(grid_b.size, grid_a.size))


def _block_copies(domain_a: Domain, domain_b: Domain, grid_a: Grid, grid_b: Grid) -> dict:
    copies = {}
    for target in domain_b.block_ids:
        rows = grid_b.block_rows(target)
        for source in domain_a.block_ids:
            copies[(target, source)] = _block_copy(
                grid_a, grid_b, rows, _transport(domain_a, domain_b, target, source)
            )
    return copies


def _assemble(coeffs: np.ndarray, copies: dict, block_ids_b, block_ids_a, shape) -> sp.csr_matrix:
    result = sp.csr_matrix(shape)
    for i, target in enumerate(block_ids_b):
        for j, source in enumerate(block_ids_a):
            if coeffs[i, j]:
                result = result + coeffs[i, j] * copies[(target, source)]
    return result.tocsr()


def _stencil(grid: Grid) -> sp.csr_matrix:
    """Integer five-point stencil h² L."""
    stencil = assemble_laplacian(grid).matrix.copy()
    stencil.data = np.rint(stencil.data * grid.h * grid.h)
    return stencil.astype(np.int64)


def _intertwines(coeffs: np.ndarray, domain_a: Domain, domain_b: Domain, n: int) -> bool:
    grid_a = build_grid(domain_a, domain_a.leg / n)
    grid_b = build_grid(domain_b, domain_b.leg / n)
    if grid_a.size != grid_b.size:
        return False
    copies = _block_copies(domain_a, domain_b, grid_a, grid_b)
    t = _assemble(coeffs, copies, domain_b.block_ids, domain_a.block_ids, (grid_b.size, grid_a.size))
    t = t.astype(np.int64)
    residual = t @ _stencil(grid_a) - _stencil(grid_b) @ t
    return residual.count_nonzero() == 0


def _rref(matrix: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, list[int]]:
    a = matrix.astype(float).copy()
    pivots = []
    row = 0
    for col in range(a.shape[1]):
        if row == a.shape[0]:
            break
        pivot = row + int(np.argmax(np.abs(a[row:, col])))
        if abs(a[pivot, col]) < tol:
            continue
        a[[row, pivot]] = a[[pivot, row]]
        a[row] /= a[row, col]
        for other in range(a.shape[0]):
            if other != row:
                a[other] -= a[other, col] * a[row]
        pivots.append(col)
        row += 1
    return a[:row], pivots


def _candidates(basis: np.ndarray):
    """Vectors of the null space with entries in {-1, 0, 1}."""
    reduced, _ = _rref(basis.T)
    free = reduced.shape[0]
    if free > MAX_FREE_COEFFICIENTS:
        raise TransplantError(f"ansatz leaves {free} free coefficients; cannot enumerate")
    for weights in itertools.product((-1, 0, 1), repeat=free):
        if not any(weights):
            continue
        vector = np.asarray(weights, dtype=float) @ reduced
        rounded = np.rint(vector)
        if np.max(np.abs(vector - rounded)) > 1e-6:
            continue
        if np.all(np.isin(rounded, (-1, 0, 1))):
            yield rounded.astype(int)


def derive_transplantation(domain_a: Domain, domain_b: Domain, coarse_h: float) -> TransplantMap:
    """Integer 7x7 block coefficients T with 𝒯 L_A = L_B 𝒯."""
    if domain_a.block_ids != domain_b.block_ids or domain_a.leg != domain_b.leg:
        raise ValueError("domains must be built from the same blocks and leg")
    n = subdivisions(domain_a.leg, coarse_h)
    grid_a = build_grid(domain_a, coarse_h)
    grid_b = build_grid(domain_b, coarse_h)
    if grid_a.size != grid_b.size:
        raise TransplantError(f"grid sizes differ: {grid_a.size} vs {grid_b.size}")

    stencil_a = _stencil(grid_a).astype(float)
    stencil_b = _stencil(grid_b).astype(float)
    copies = _block_copies(domain_a, domain_b, grid_a, grid_b)
    ids = domain_a.block_ids

    columns = []
    for target in ids:
        for source in ids:
            p = copies[(target, source)]
            columns.append((p @ stencil_a - stencil_b @ p).toarray().ravel())
    system = np.stack(columns, axis=1)
    system = system[np.any(system != 0, axis=1)]

    basis = scipy.linalg.null_space(system, rcond=NULLSPACE_RTOL)
    logger.info("transplant %s -> %s: null space dimension %d", domain_a.name, domain_b.name, basis.shape[1])
    if basis.shape[1] == 0:
        raise TransplantError(f"no intertwiner between {domain_a.name} and {domain_b.name} in the ansatz")

    found = []
    for vector in _candidates(basis):
        coeffs = vector.reshape(len(ids), len(ids))
        if round(abs(np.linalg.det(coeffs))) == 0:
            continue
        if coeffs.flat[np.flatnonzero(coeffs)[0]] < 0:
            continue
        found.append(coeffs)
    found.sort(key=lambda c: (np.count_nonzero(c), tuple(-c.ravel())))

    for coeffs in found:
        if _intertwines(coeffs, domain_a, domain_b, n) and _intertwines(coeffs, domain_a, domain_b, 2 * n):
            transports = tuple(
                (ids[i], ids[j], _transport(domain_a, domain_b, ids[i], ids[j]))
                for i, j in zip(*np.nonzero(coeffs))
            )
            return TransplantMap(
                source=domain_a.name,
                target=domain_b.name,
                block_ids=ids,
                coeffs=tuple(tuple(int(c) for c in row) for row in coeffs),
                transports=transports,
            )

    raise TransplantError(
        f"no invertible {{-1, 0, 1}} intertwiner between {domain_a.name} and {domain_b.name}; "
        "check the block embedding"
    )


def transplant_matrix(tmap: TransplantMap, grid_a: Grid, grid_b: Grid) -> sp.csr_matrix:
    """The grid-level map 𝒯 sending functions on grid_a to functions on grid_b."""
    copies = _block_copies(grid_a.domain, grid_b.domain, grid_a, grid_b)
    return _assemble(tmap.matrix, copies, tmap.block_ids, tmap.block_ids, (grid_b.size, grid_a.size))


def _product_terms(left: sp.spmatrix, right: sp.spmatrix):
    """Every nonzero term left[i,k] * right[k,j] as (i, j, value) arrays."""
    left = left.tocoo()
    right = right.tocsr()
    counts = np.diff(right.indptr)[left.col]
    total = int(counts.sum())
    rows = np.repeat(left.row, counts)
    starts = np.repeat(right.indptr[left.col], counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    positions = starts + offsets
    cols = right.indices[positions]
    values = np.repeat(left.data, counts) * right.data[positions]
    return rows.astype(np.int64), cols.astype(np.int64), values


def exact_residual(t: sp.spmatrix, op_a: sp.spmatrix, op_b: sp.spmatrix) -> float:
    """max |𝒯 H_A - H_B 𝒯| with each entry summed with correct rounding."""
    r1, c1, v1 = _product_terms(t, op_a)
    r2, c2, v2 = _product_terms(op_b, t)
    width = max(op_a.shape[1], t.shape[1])
    keys = np.concatenate([r1 * width + c1, r2 * width + c2])
    values = np.concatenate([v1, -v2])
    if len(keys) == 0:
        return 0.0

    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    values = values[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(keys)) + 1])
    ends = np.concatenate([starts[1:], [len(keys)]])

    worst = 0.0
    singles = ends - starts == 1
    if singles.any():
        worst = float(np.max(np.abs(values[starts[singles]])))
    for start, end in zip(starts[~singles], ends[~singles]):
        worst = max(worst, abs(math.fsum(values[start:end])))
    return worst


@dataclass(frozen=True)
class IntertwiningReport:
    residual: float
    exact: bool
    scale: float

    def to_dict(self) -> dict:
        return {"residual": self.residual, "exact": self.exact, "scale": self.scale}


def verify_intertwining(tmap: TransplantMap, op_a: SparseSymOperator, op_b: SparseSymOperator) -> IntertwiningReport:
    if op_a.n != op_b.n:
        raise ValueError(f"operator dimensions differ: {op_a.n} vs {op_b.n}")
    if op_a.grid is None or op_b.grid is None:
        raise ValueError("operators must carry the grid they were assembled on")
    t = transplant_matrix(tmap, op_a.grid, op_b.grid)
    residual = exact_residual(t, op_a.matrix, op_b.matrix)
    scale = max(float(abs(op_a.matrix).max()), float(abs(op_b.matrix).max()))
    logger.info("intertwining residual %.3e (scale %.3e)", residual, scale)
    return IntertwiningReport(residual=residual, exact=residual == 0.0, scale=scale)


@dataclass(frozen=True)
class SpectraComparison:
    max_abs_diff: float
    max_rel_diff: float
    k: int

    def to_dict(self) -> dict:
        return {"max_abs_diff": self.max_abs_diff, "max_rel_diff": self.max_rel_diff, "k": self.k}


def compare_spectra(spec_a: Spectrum, spec_b: Spectrum) -> SpectraComparison:
    if len(spec_a) != len(spec_b):
        raise ValueError(f"spectra have different lengths: {len(spec_a)} vs {len(spec_b)}")
    a = np.sort(np.asarray(spec_a.eigenvalues))
    b = np.sort(np.asarray(spec_b.eigenvalues))
    diff = np.abs(a - b)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(float).tiny)
    return SpectraComparison(
        max_abs_diff=float(diff.max(initial=0.0)),
        max_rel_diff=float((diff / scale).max(initial=0.0)),
        k=len(a),
    )
