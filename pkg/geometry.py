"""GWW isospectral pair built from one 45-45-90 building block.

Every block is the reference triangle carried into the plane by an isometry
whose linear part is a signed permutation matrix and whose translation is an
integer multiple of the leg. All fold lines are therefore axis-aligned or
diagonal lines through lattice points, which keeps reflections exact on any
grid with leg/h integer.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np


logger = logging.getLogger(__name__)

BLOCK_IDS = ("A", "B", "C", "D", "E", "F", "G")
EDGE_TOLERANCE = 1e-12


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


class EdgeKind(str, Enum):
    """Edges of the reference triangle (right angle at the origin)."""

    X_LEG = "a"
    Y_LEG = "b"
    HYPOTENUSE = "c"


class LineKind(str, Enum):
    VERTICAL = "x=c"
    HORIZONTAL = "y=c"
    DIAGONAL = "x-y=c"
    ANTIDIAGONAL = "x+y=c"


# Endpoints of each reference edge in units of the leg.
REFERENCE_EDGES = {
    EdgeKind.X_LEG: ((0, 0), (1, 0)),
    EdgeKind.Y_LEG: ((0, 0), (0, 1)),
    EdgeKind.HYPOTENUSE: ((1, 0), (0, 1)),
}
REFERENCE_VERTICES = ((0, 0), (1, 0), (0, 1))
# Interior angle, in degrees, at each reference vertex.
REFERENCE_ANGLES = (90, 45, 45)


@dataclass(frozen=True)
class FoldLine:
    """A mirror line `kind` with constant `c`, in units of the leg."""

    kind: LineKind
    c: float

    def reflect_unit(self, x: float, y: float) -> tuple[float, float]:
        c = self.c
        if self.kind == LineKind.VERTICAL:
            return 2 * c - x, y
        if self.kind == LineKind.HORIZONTAL:
            return x, 2 * c - y
        if self.kind == LineKind.DIAGONAL:
            return y + c, x - c
        return c - y, c - x

    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (matrix, offset) of the reflection in leg units."""
        c = self.c
        if self.kind == LineKind.VERTICAL:
            return np.array([[-1, 0], [0, 1]]), np.array([2 * c, 0])
        if self.kind == LineKind.HORIZONTAL:
            return np.array([[1, 0], [0, -1]]), np.array([0, 2 * c])
        if self.kind == LineKind.DIAGONAL:
            return np.array([[0, 1], [1, 0]]), np.array([c, -c])
        return np.array([[0, -1], [-1, 0]]), np.array([c, c])

    @classmethod
    def through(cls, p: tuple[int, int], q: tuple[int, int]) -> "FoldLine":
        (x0, y0), (x1, y1) = p, q
        if x0 == x1:
            return cls(LineKind.VERTICAL, x0)
        if y0 == y1:
            return cls(LineKind.HORIZONTAL, y0)
        if (x1 - x0) == (y1 - y0):
            return cls(LineKind.DIAGONAL, x0 - y0)
        return cls(LineKind.ANTIDIAGONAL, x0 + y0)


@dataclass(frozen=True)
class Placement:
    """Isometry r -> M r + t mapping leg-unit reference coordinates to the plane."""

    matrix: tuple[tuple[int, int], tuple[int, int]]
    translation: tuple[int, int]

    @classmethod
    def identity(cls) -> "Placement":
        return cls(((1, 0), (0, 1)), (0, 0))

    @property
    def m(self) -> np.ndarray:
        return np.array(self.matrix, dtype=int)

    @property
    def t(self) -> np.ndarray:
        return np.array(self.translation, dtype=int)

    @property
    def determinant(self) -> int:
        (a, b), (c, d) = self.matrix
        return a * d - b * c

    def apply(self, r) -> np.ndarray:
        return self.m @ np.asarray(r) + self.t

    def inverse_apply(self, p) -> np.ndarray:
        return self.m.T @ (np.asarray(p) - self.t)

    def reflected(self, line: FoldLine) -> "Placement":
        rm, offset = line.affine()
        m = rm @ self.m
        t = rm @ self.t + offset
        return Placement(
            ((int(m[0, 0]), int(m[0, 1])), (int(m[1, 0]), int(m[1, 1]))),
            (int(t[0]), int(t[1])),
        )


@dataclass(frozen=True)
class Block:
    id: str
    placement: Placement

    @property
    def parity(self) -> Parity:
        return Parity.EVEN if self.placement.determinant == 1 else Parity.ODD

    def unit_vertices(self) -> list[tuple[int, int]]:
        return [tuple(int(v) for v in self.placement.apply(r)) for r in REFERENCE_VERTICES]

    def fold_line(self, edge: EdgeKind) -> FoldLine:
        p, q = REFERENCE_EDGES[edge]
        return FoldLine.through(
            tuple(int(v) for v in self.placement.apply(p)),
            tuple(int(v) for v in self.placement.apply(q)),
        )


@dataclass(frozen=True)
class Fold:
    parent: str
    child: str
    edge: EdgeKind
    line: FoldLine

    @property
    def blocks(self) -> tuple[str, str]:
        return self.parent, self.child


@dataclass(frozen=True)
class Domain:
    name: str
    leg: float
    blocks: tuple[Block, ...]
    folds: tuple[Fold, ...]

    def block(self, block_id: str) -> Block:
        for block in self.blocks:
            if block.id == block_id:
                return block
        raise KeyError(f"unknown block {block_id!r} in {self.name}")

    @property
    def block_ids(self) -> tuple[str, ...]:
        return tuple(block.id for block in self.blocks)

    @property
    def area(self) -> float:
        return len(self.blocks) * self.leg ** 2 / 2

    def parity_classes(self) -> dict[Parity, tuple[str, ...]]:
        classes: dict[Parity, tuple[str, ...]] = {Parity.EVEN: (), Parity.ODD: ()}
        for block in self.blocks:
            classes[block.parity] += (block.id,)
        return classes

    def folds_of(self, block_id: str) -> list[Fold]:
        return [fold for fold in self.folds if block_id in fold.blocks]

    def neighbor(self, fold: Fold, block_id: str) -> str:
        return fold.child if fold.parent == block_id else fold.parent

    def boundary_segments(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Triangle edges not shared with another block, in leg units."""
        counts: dict[frozenset, int] = {}
        for block in self.blocks:
            for p, q in REFERENCE_EDGES.values():
                segment = frozenset(
                    (
                        tuple(int(v) for v in block.placement.apply(p)),
                        tuple(int(v) for v in block.placement.apply(q)),
                    )
                )
                counts[segment] = counts.get(segment, 0) + 1
        return [tuple(sorted(segment)) for segment, count in counts.items() if count == 1]

    @property
    def perimeter(self) -> float:
        total = 0.0
        for p, q in self.boundary_segments():
            total += math.dist(p, q)
        return total * self.leg

    def vertices(self) -> list[tuple[float, float]]:
        unique = sorted({v for block in self.blocks for v in block.unit_vertices()})
        return [(x * self.leg, y * self.leg) for x, y in unique]

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs, ys = zip(*self.vertices())
        return min(xs), min(ys), max(xs), max(ys)


# Gluing sequences from block A: (new block, existing block, edge of the existing block).
GWW_A_GLUING = (
    ("B", "A", EdgeKind.HYPOTENUSE),
    ("C", "B", EdgeKind.Y_LEG),
    ("D", "C", EdgeKind.X_LEG),
    ("E", "D", EdgeKind.HYPOTENUSE),
    ("F", "E", EdgeKind.X_LEG),
    ("G", "E", EdgeKind.Y_LEG),
)
GWW_B_GLUING = (
    ("B", "A", EdgeKind.X_LEG),
    ("C", "B", EdgeKind.Y_LEG),
    ("D", "C", EdgeKind.HYPOTENUSE),
    ("E", "D", EdgeKind.X_LEG),
    ("F", "E", EdgeKind.HYPOTENUSE),
    ("G", "E", EdgeKind.Y_LEG),
)
SQUARE_GLUING = (("B", "A", EdgeKind.HYPOTENUSE),)


def build_domain(name: str, leg: float, gluing) -> Domain:
    """Unfold block A along `gluing` into a domain."""
    if not leg > 0:
        raise ValueError(f"leg must be positive, got {leg}")

    blocks = {"A": Block("A", Placement.identity())}
    folds = []
    for child, parent, edge in gluing:
        if parent not in blocks:
            raise ValueError(f"block {parent} must be placed before {child}")
        line = blocks[parent].fold_line(edge)
        blocks[child] = Block(child, blocks[parent].placement.reflected(line))
        folds.append(Fold(parent, child, edge, line))

    ordered = tuple(blocks[block_id] for block_id in BLOCK_IDS if block_id in blocks)
    domain = Domain(name=name, leg=float(leg), blocks=ordered, folds=tuple(folds))
    logger.debug("built %s with %d blocks and %d folds", name, len(ordered), len(folds))
    return domain


def build_gww_pair(leg: float) -> tuple[Domain, Domain]:
    """Return (GWW_A, GWW_B) with block A's right angle at the origin."""
    return (
        build_domain("GWW_A", leg, GWW_A_GLUING),
        build_domain("GWW_B", leg, GWW_B_GLUING),
    )


def build_square(leg: float) -> Domain:
    """Two blocks glued on the hypotenuse: the square [0, leg]^2."""
    return build_domain("SQUARE", leg, SQUARE_GLUING)


class Location(NamedTuple):
    block_id: str
    reference_point: tuple[float, float]


def reference_coordinates(domain: Domain, block: Block, p) -> np.ndarray:
    return block.placement.inverse_apply(np.asarray(p, dtype=float) / domain.leg) * domain.leg


def _angle_at(r: np.ndarray, leg: float, tol: float) -> int:
    """Angle (degrees) of the closed reference triangle seen from r, 0 if outside."""
    x, y = r
    if x < -tol or y < -tol or x + y > leg + tol:
        return 0
    on_x = abs(y) <= tol
    on_y = abs(x) <= tol
    on_h = abs(x + y - leg) <= tol
    if on_x and on_y:
        return REFERENCE_ANGLES[0]
    if (on_x and on_h) or (on_y and on_h):
        return REFERENCE_ANGLES[1]
    if on_x or on_y or on_h:
        return 180
    return 360


def locate(domain: Domain, p) -> Optional[Location]:
    """Find the block containing p; ties on shared edges go to the lowest id."""
    tol = EDGE_TOLERANCE * domain.leg
    hits = []
    coverage = 0
    for block in domain.blocks:
        r = reference_coordinates(domain, block, p)
        angle = _angle_at(r, domain.leg, tol)
        if angle == 360:
            return Location(block.id, (float(r[0]), float(r[1])))
        if angle:
            hits.append((block.id, r))
            coverage += angle
    if coverage != 360:
        return None
    block_id, r = hits[0]
    return Location(block_id, (float(r[0]), float(r[1])))


def reflect_across(fold, p, leg: float = 1.0) -> tuple[float, float]:
    """Mirror plane point p across a fold (or FoldLine) of a domain with this leg."""
    line = fold.line if isinstance(fold, Fold) else fold
    if leg != 1.0:
        line = FoldLine(line.kind, line.c * leg)
    x, y = p
    return line.reflect_unit(x, y)


def fold_tree_path(domain: Domain, target: str) -> list[Fold]:
    """Folds crossed walking the fold tree from block A to `target`."""
    parents = {fold.child: fold for fold in domain.folds}
    path = []
    current = target
    while current != "A":
        fold = parents[current]
        path.append(fold)
        current = fold.parent
    return list(reversed(path))


def pairwise_vertex_distances(domain: Domain) -> list[float]:
    points = domain.vertices()
    return sorted(
        round(math.dist(points[i], points[j]), 12)
        for i in range(len(points))
        for j in range(i + 1, len(points))
    )


def to_text(domain: Domain) -> str:
    """One line per block `id det tx ty m00 m01 m10 m11`, then the fold lines."""
    lines = [f"# {domain.name} leg={domain.leg:g}"]
    for block in domain.blocks:
        (m00, m01), (m10, m11) = block.placement.matrix
        tx, ty = block.placement.translation
        lines.append(
            f"{block.id} {block.placement.determinant:+d} "
            f"{tx * domain.leg:g} {ty * domain.leg:g} {m00} {m01} {m10} {m11}"
        )
    for fold in domain.folds:
        lines.append(
            f"fold {fold.parent} {fold.child} {fold.edge.value} "
            f"{fold.line.kind.value} {fold.line.c * domain.leg:g}"
        )
    return "\n".join(lines) + "\n"
