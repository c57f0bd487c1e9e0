"""Uniform square lattice restricted to the interior of a domain.

Lattice points are kept as integer coordinates in units of h, so the fold
reflections map lattice points to lattice points without rounding.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geometry import Domain, Fold, LineKind


logger = logging.getLogger(__name__)

BOUNDARY = -1
# Neighbor columns: +x, -x, +y, -y.
NEIGHBOR_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
COMPATIBILITY_TOLERANCE = 1e-9


class GridCompatibilityError(ValueError):
    """Raised when leg/h is not a positive integer."""


def subdivisions(leg: float, h: float) -> int:
    """Number of lattice steps along one leg; the grid must be reflection compatible."""
    if not h > 0:
        raise GridCompatibilityError(f"h must be positive, got {h}")
    ratio = leg / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > COMPATIBILITY_TOLERANCE * max(1, n):
        raise GridCompatibilityError(
            f"leg/h = {ratio:.12g} is not an integer; the mirror image of a grid point "
            "across a fold line would not be a grid point"
        )
    return n


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    h: float
    n: int
    points: np.ndarray
    block_of: tuple[str, ...]
    reference: np.ndarray
    neighbors: np.ndarray
    # (row, block id, reference point) for every owner after the first; fold nodes only
    shared: tuple[tuple[int, str, tuple[int, int]], ...] = ()

    def __post_init__(self):
        index = {(int(i), int(j)): row for row, (i, j) in enumerate(self.points)}
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def size(self) -> int:
        return len(self.points)

    def index(self, lattice_point) -> Optional[int]:
        i, j = lattice_point
        return self._index.get((int(i), int(j)))

    @property
    def coordinates(self) -> np.ndarray:
        return self.points * self.h

    def block_rows(self, block_id: str) -> np.ndarray:
        return np.array([row for row, b in enumerate(self.block_of) if b == block_id], dtype=int)

    def extent(self) -> tuple[int, int]:
        """Lattice steps spanned by the domain's bounding box in x and y."""
        x0, y0, x1, y1 = self.domain.bounding_box()
        return int(round((x1 - x0) / self.h)), int(round((y1 - y0) / self.h))

    def boundary_neighbor_counts(self) -> np.ndarray:
        return np.sum(self.neighbors == BOUNDARY, axis=1)


def _on_segment(points: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = q - p
    rel = points - p
    cross = d[0] * rel[:, 1] - d[1] * rel[:, 0]
    dot = rel @ d
    return (cross == 0) & (dot >= 0) & (dot <= d @ d)


def build_grid(domain: Domain, h: float) -> Grid:
    """Interior lattice points of `domain`, ordered by y then x."""
    n = subdivisions(domain.leg, h)
    a, b = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = a + b <= n
    ref = np.stack([a[keep], b[keep]], axis=1)

    owners: dict[tuple[int, int], list[tuple[str, tuple[int, int]]]] = {}
    for block in domain.blocks:
        plane = ref @ block.placement.m.T + n * block.placement.t
        for (x, y), (ra, rb) in zip(plane.tolist(), ref.tolist()):
            owners.setdefault((x, y), []).append((block.id, (ra, rb)))

    candidates = np.array(list(owners.keys()), dtype=np.int64)
    on_boundary = np.zeros(len(candidates), dtype=bool)
    for p, q in domain.boundary_segments():
        on_boundary |= _on_segment(candidates, n * np.array(p), n * np.array(q))
    interior = candidates[~on_boundary]

    order = np.lexsort((interior[:, 0], interior[:, 1]))
    points = interior[order]
    index = {(int(i), int(j)): row for row, (i, j) in enumerate(points)}

    neighbors = np.full((len(points), 4), BOUNDARY, dtype=np.int64)
    for row, (i, j) in enumerate(points.tolist()):
        for col, (di, dj) in enumerate(NEIGHBOR_STEPS):
            neighbors[row, col] = index.get((i + di, j + dj), BOUNDARY)

    point_owners = [owners[(int(i), int(j))] for i, j in points]
    block_of = tuple(found[0][0] for found in point_owners)
    reference = np.array([found[0][1] for found in point_owners], dtype=np.int64).reshape(-1, 2)
    shared = tuple(
        (row, block_id, tuple(r))
        for row, found in enumerate(point_owners)
        for block_id, r in found[1:]
    )

    logger.info("grid on %s: h=%g n=%d interior=%d", domain.name, h, n, len(points))
    return Grid(
        domain=domain,
        h=float(h),
        n=n,
        points=points,
        block_of=block_of,
        reference=reference,
        neighbors=neighbors,
        shared=shared,
    )


def grid_for_subdivisions(domain: Domain, n: int) -> Grid:
    return build_grid(domain, domain.leg / n)


def pick_interior_count(n: int, blocks: int = 7, boundary_edges: int = 9) -> int:
    """Interior lattice points of a block domain with n steps per leg (Pick's theorem)."""
    area = blocks * n * n / 2
    return int(round(area - boundary_edges * n / 2 + 1))


def _sample_blocks(grid: Grid, field, block_of: np.ndarray, reference: np.ndarray) -> np.ndarray:
    values = np.empty(len(block_of))
    for block_id in grid.domain.block_ids:
        mask = block_of == block_id
        if not mask.any():
            continue
        ref = reference[mask] * grid.h
        values[mask] = field.reference_values(block_id, ref[:, 0], ref[:, 1])
    return values


def node_values(grid: Grid, field) -> np.ndarray:
    """Sample `field` at every grid point.

    A node on a fold line belongs to both blocks of the fold and takes the
    arithmetic mean of their values. Equal values are kept bit for bit.
    """
    values = _sample_blocks(grid, field, np.array(grid.block_of), grid.reference)
    if not grid.shared:
        return values

    rows = np.array([row for row, _, _ in grid.shared], dtype=np.int64)
    others = _sample_blocks(
        grid,
        field,
        np.array([block_id for _, block_id, _ in grid.shared]),
        np.array([r for _, _, r in grid.shared], dtype=np.int64).reshape(-1, 2),
    )
    total = values.copy()
    count = np.ones(grid.size)
    low = values.copy()
    high = values.copy()
    np.add.at(total, rows, others)
    np.add.at(count, rows, 1.0)
    np.minimum.at(low, rows, others)
    np.maximum.at(high, rows, others)
    return np.where(low == high, values, total / count)


def reflect_lattice(fold, points: np.ndarray, n: int) -> np.ndarray:
    """Mirror integer lattice points across a fold line given in leg units."""
    line = fold.line if isinstance(fold, Fold) else fold
    c = int(round(line.c * n))
    x, y = points[:, 0], points[:, 1]
    if line.kind == LineKind.VERTICAL:
        return np.stack([2 * c - x, y], axis=1)
    if line.kind == LineKind.HORIZONTAL:
        return np.stack([x, 2 * c - y], axis=1)
    if line.kind == LineKind.DIAGONAL:
        return np.stack([y + c, x - c], axis=1)
    return np.stack([c - y, c - x], axis=1)


@dataclass(frozen=True, eq=False)
class FoldPermutation:
    fold: object
    perm: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return np.flatnonzero(self.perm != BOUNDARY)

    def is_involution(self) -> bool:
        rows = self.defined
        images = self.perm[rows]
        if np.any(self.perm[images] == BOUNDARY):
            return False
        return bool(np.array_equal(self.perm[images], rows))

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return self.perm[np.asarray(rows)]


def fold_permutation(grid: Grid, fold) -> FoldPermutation:
    mirrored = reflect_lattice(fold, grid.points, grid.n)
    perm = np.full(grid.size, BOUNDARY, dtype=np.int64)
    for row, p in enumerate(mirrored.tolist()):
        image = grid.index(p)
        if image is not None:
            perm[row] = image
    return FoldPermutation(fold=fold, perm=perm)


def to_text(grid: Grid) -> str:
    """Header `nx ny h n_interior`, then `ix iy x y` per interior point."""
    nx, ny = grid.extent()
    lines = [f"{nx} {ny} {grid.h!r} {grid.size}"]
    for (i, j), (x, y) in zip(grid.points.tolist(), grid.coordinates.tolist()):
        lines.append(f"{i} {j} {x!r} {y!r}")
    return "\n".join(lines) + "\n"
