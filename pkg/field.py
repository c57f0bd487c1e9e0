"""Densities and potentials carried from the reference block to every block.

A field is stored as a function of reference-triangle coordinates plus, for
block-wise densities, one value per block. Evaluating a reference function
through each block's placement gives a field whose value at a point equals the
value at its mirror image across any fold, which is the condition under which
both GWW domains keep equal spectra.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field as dataclass_field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy import integrate

from geometry import BLOCK_IDS, EDGE_TOLERANCE, Domain, locate, reference_coordinates, reflect_across


logger = logging.getLogger(__name__)

DIRECTION_TOLERANCE = 1e-12


class FieldKind(str, Enum):
    HOMOGENEOUS = "homogeneous"
    PIECEWISE_CONSTANT_DENSITY = "piecewise_constant_density"
    REFERENCE_PATTERN = "reference_pattern"
    CONSTANT_VECTOR_POTENTIAL = "constant_vector_potential"
    POINT_CHARGES = "point_charges"
    CUSTOM = "custom"


class Pattern(str, Enum):
    SPLIT_DIAGONAL = "split_diagonal"
    SPLIT_HYPOTENUSE = "split_hypotenuse"


class SplitLine(str, Enum):
    """Density taken by nodes lying exactly on a pattern's split line."""

    LIGHT = "light"
    MEAN = "mean"
    DARK = "dark"


class ChargeMode(str, Enum):
    LOCAL = "local"
    COULOMB = "coulomb"


DENSITY_KINDS = {
    FieldKind.HOMOGENEOUS,
    FieldKind.PIECEWISE_CONSTANT_DENSITY,
    FieldKind.REFERENCE_PATTERN,
}

EVEN_CLASS = ("A", "C", "E")
ODD_CLASS = ("B", "D", "F", "G")

ReferenceFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FieldSpec:
    kind: FieldKind
    value: float = 1.0
    sigma: tuple[tuple[str, float], ...] = ()
    pattern: Pattern = Pattern.SPLIT_DIAGONAL
    light: float = 1.0
    dark: float = 2.0
    split_line: SplitLine = SplitLine.MEAN
    magnitude: float = 0.0
    charge: float = 1.0
    direction: tuple[float, float] = (1.0, 0.0)
    anchor: tuple[float, float] = (0.0, 0.0)
    q: float = 1.0
    charge_mode: ChargeMode = ChargeMode.LOCAL
    cutoff: float = 1e-2
    function: Optional[ReferenceFunction] = dataclass_field(default=None, compare=False)
    is_custom_density: bool = False

    @classmethod
    def homogeneous(cls, value: float = 1.0) -> "FieldSpec":
        return cls(FieldKind.HOMOGENEOUS, value=value)

    @classmethod
    def piecewise(cls, sigma: dict[str, float]) -> "FieldSpec":
        return cls(FieldKind.PIECEWISE_CONSTANT_DENSITY, sigma=tuple(sorted(sigma.items())))

    @classmethod
    def parity_classes(cls, light: float = 1.0, dark: float = 2.0) -> "FieldSpec":
        """Light density on {A,C,E}, dark on {B,D,F,G}."""
        sigma = {block_id: light for block_id in EVEN_CLASS}
        sigma.update({block_id: dark for block_id in ODD_CLASS})
        return cls.piecewise(sigma)

    @classmethod
    def split(cls, light: float = 1.0, dark: float = 2.0,
              pattern: Pattern = Pattern.SPLIT_DIAGONAL,
              split_line: SplitLine = SplitLine.MEAN) -> "FieldSpec":
        return cls(
            FieldKind.REFERENCE_PATTERN,
            pattern=Pattern(pattern),
            light=light,
            dark=dark,
            split_line=SplitLine(split_line),
        )

    @classmethod
    def electric(cls, magnitude: float, direction=(1.0, 0.0), anchor=(0.0, 0.0),
                 charge: float = 1.0) -> "FieldSpec":
        return cls(
            FieldKind.CONSTANT_VECTOR_POTENTIAL,
            magnitude=magnitude,
            direction=tuple(float(v) for v in direction),
            anchor=tuple(float(v) for v in anchor),
            charge=charge,
        )

    @classmethod
    def point_charges(cls, q: float = 1.0, mode: ChargeMode = ChargeMode.LOCAL,
                      cutoff: float = 1e-2) -> "FieldSpec":
        return cls(FieldKind.POINT_CHARGES, q=q, charge_mode=ChargeMode(mode), cutoff=cutoff)

    @classmethod
    def custom(cls, function: ReferenceFunction, density: bool = False) -> "FieldSpec":
        return cls(FieldKind.CUSTOM, function=function, is_custom_density=density)

    @property
    def is_density(self) -> bool:
        return self.kind in DENSITY_KINDS or (self.kind == FieldKind.CUSTOM and self.is_custom_density)

    def sigma_map(self) -> dict[str, float]:
        return dict(self.sigma)

    def validate(self, block_ids=BLOCK_IDS) -> None:
        if self.kind == FieldKind.HOMOGENEOUS and not self.value > 0:
            raise ValueError(f"density must be positive, got {self.value}")
        if self.kind == FieldKind.PIECEWISE_CONSTANT_DENSITY:
            sigma = self.sigma_map()
            missing = [block_id for block_id in block_ids if block_id not in sigma]
            if missing:
                raise ValueError(f"missing density for blocks {', '.join(missing)}")
            bad = {block_id: value for block_id, value in sigma.items() if not value > 0}
            if bad:
                raise ValueError(f"density must be positive: {bad}")
        if self.kind == FieldKind.REFERENCE_PATTERN and not (self.light > 0 and self.dark > 0):
            raise ValueError(f"densities must be positive, got {self.light}, {self.dark}")
        if self.kind == FieldKind.CONSTANT_VECTOR_POTENTIAL:
            norm = math.hypot(*self.direction)
            if abs(norm - 1.0) > DIRECTION_TOLERANCE:
                raise ValueError(f"direction must be a unit vector, |d| = {norm}")
        if self.kind == FieldKind.POINT_CHARGES and not self.cutoff > 0:
            raise ValueError("point-charge cutoff must be positive")
        if self.kind == FieldKind.CUSTOM and self.function is None:
            raise ValueError("custom field needs a reference function")

    def key(self) -> str:
        """Short stable description used as operator metadata."""
        if self.kind == FieldKind.HOMOGENEOUS:
            return f"homogeneous:{self.value:g}"
        if self.kind == FieldKind.PIECEWISE_CONSTANT_DENSITY:
            return "piecewise:" + ",".join(f"{k}={v:g}" for k, v in self.sigma)
        if self.kind == FieldKind.REFERENCE_PATTERN:
            return f"pattern:{self.pattern.value}:{self.light:g}/{self.dark:g}:line={self.split_line.value}"
        if self.kind == FieldKind.CONSTANT_VECTOR_POTENTIAL:
            return (
                f"efield:E={self.magnitude:g},e={self.charge:g},"
                f"d=({self.direction[0]:g},{self.direction[1]:g}),"
                f"r0=({self.anchor[0]:g},{self.anchor[1]:g})"
            )
        if self.kind == FieldKind.POINT_CHARGES:
            return f"charges:q={self.q:g},{self.charge_mode.value},cutoff={self.cutoff:g}"
        return "custom"


@dataclass(frozen=True)
class ScalarField:
    domain: Domain
    spec: FieldSpec
    block_scale: tuple[tuple[str, float], ...] = ()

    @property
    def kind(self) -> FieldKind:
        return self.spec.kind

    @property
    def is_density(self) -> bool:
        return self.spec.is_density

    def reference_values(self, block_id: str, x, y) -> np.ndarray:
        """Field on block `block_id` at reference coordinates (x, y), in length units."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        values = self._reference_values(block_id, x, y)
        scale = dict(self.block_scale).get(block_id)
        if scale is not None:
            values = values * scale
        return values

    def _reference_values(self, block_id: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        spec = self.spec
        leg = self.domain.leg

        if spec.kind == FieldKind.HOMOGENEOUS:
            return np.full(np.broadcast(x, y).shape, spec.value)

        if spec.kind == FieldKind.PIECEWISE_CONSTANT_DENSITY:
            return np.full(np.broadcast(x, y).shape, spec.sigma_map()[block_id])

        if spec.kind == FieldKind.REFERENCE_PATTERN:
            on_line_value = {
                SplitLine.LIGHT: spec.light,
                SplitLine.MEAN: (spec.light + spec.dark) / 2,
                SplitLine.DARK: spec.dark,
            }[spec.split_line]
            if spec.pattern == Pattern.SPLIT_DIAGONAL:
                s = x - y
            else:
                s = x + y - leg / 2
            on_line = np.abs(s) <= EDGE_TOLERANCE * leg
            return np.where(on_line, on_line_value, np.where(s > 0, spec.dark, spec.light))

        if spec.kind == FieldKind.CONSTANT_VECTOR_POTENTIAL:
            dx, dy = spec.direction
            x0, y0 = spec.anchor
            return -spec.charge * spec.magnitude * (dx * (x - x0) + dy * (y - y0))

        if spec.kind == FieldKind.POINT_CHARGES:
            if spec.charge_mode == ChargeMode.LOCAL:
                c = leg / 3
                distance = np.hypot(x - c, y - c)
                return -spec.q / np.maximum(distance, spec.cutoff)
            return self._coulomb_sum(block_id, x, y)

        return np.asarray(spec.function(x, y), dtype=float)

    def _coulomb_sum(self, block_id: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        leg = self.domain.leg
        placement = self.domain.block(block_id).placement
        m, t = placement.m, placement.t * leg
        px = m[0, 0] * x + m[0, 1] * y + t[0]
        py = m[1, 0] * x + m[1, 1] * y + t[1]
        total = np.zeros(np.broadcast(px, py).shape)
        for block in self.domain.blocks:
            cx, cy = block.placement.apply((1 / 3, 1 / 3)) * leg
            total += 1.0 / np.maximum(np.hypot(px - cx, py - cy), self.spec.cutoff)
        return -self.spec.q * total

    def eval(self, p) -> float:
        location = locate(self.domain, p)
        if location is None:
            raise ValueError(f"point {tuple(p)} is outside {self.domain.name}")
        x, y = location.reference_point
        return float(self.reference_values(location.block_id, x, y))


def make_symmetric_field(spec: FieldSpec, domain: Domain) -> ScalarField:
    """Propagate `spec` from the reference block to all blocks of `domain`."""
    spec.validate(domain.block_ids)
    logger.debug("field %s on %s", spec.key(), domain.name)
    return ScalarField(domain=domain, spec=spec)


def perturb_block(field: ScalarField, block_id: str, factor: float) -> ScalarField:
    """Scale the field inside one block; breaks the mirror condition on purpose."""
    field.domain.block(block_id)
    scale = dict(field.block_scale)
    scale[block_id] = scale.get(block_id, 1.0) * factor
    return replace(field, block_scale=tuple(sorted(scale.items())))


@dataclass(frozen=True)
class SymmetryReport:
    max_violation: float
    passed: bool
    n_pairs: int

    def to_dict(self) -> dict:
        return {"max_violation": self.max_violation, "pass": self.passed, "n_pairs": self.n_pairs}


def sample_reference_triangle(leg: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points strictly inside the reference triangle."""
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    # keep away from the edges so the mirror lands inside the neighbor
    u = 1e-9 + u * (1 - 3e-9)
    return u * leg


def check_symmetry(field: ScalarField, domain: Domain, n_samples: int = 100,
                   tol: float = 0.0, seed: int = 0) -> SymmetryReport:
    """Largest |f(p) - f(mirror(p))| over samples mirrored across incident folds."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if tol < 0:
        raise ValueError("tol must be non-negative")

    rng = np.random.default_rng(seed)
    worst = 0.0
    pairs = 0
    for block in domain.blocks:
        r = sample_reference_triangle(domain.leg, n_samples, rng)
        here = field.reference_values(block.id, r[:, 0], r[:, 1])
        plane = (block.placement.m @ r.T).T + block.placement.t * domain.leg
        for fold in domain.folds_of(block.id):
            other = domain.block(domain.neighbor(fold, block.id))
            mirrored = np.array([reflect_across(fold, p, domain.leg) for p in plane])
            mirror_ref = np.array([reference_coordinates(domain, other, p) for p in mirrored])
            there = field.reference_values(other.id, mirror_ref[:, 0], mirror_ref[:, 1])
            worst = max(worst, float(np.max(np.abs(here - there))))
            pairs += len(r)

    return SymmetryReport(max_violation=worst, passed=worst <= tol, n_pairs=pairs)


def total_mass(field: ScalarField, domain: Domain) -> float:
    """Integral of the density over the domain."""
    if not field.is_density:
        raise ValueError(f"total mass is defined for densities, not {field.kind.value}")

    spec = field.spec
    leg = domain.leg
    block_area = leg ** 2 / 2
    scale = dict(field.block_scale)
    mass = 0.0
    for block in domain.blocks:
        factor = scale.get(block.id, 1.0)
        if spec.kind == FieldKind.HOMOGENEOUS:
            block_mass = spec.value * block_area
        elif spec.kind == FieldKind.PIECEWISE_CONSTANT_DENSITY:
            block_mass = spec.sigma_map()[block.id] * block_area
        elif spec.kind == FieldKind.REFERENCE_PATTERN:
            if spec.pattern == Pattern.SPLIT_DIAGONAL:
                block_mass = (spec.light + spec.dark) * block_area / 2
            else:
                block_mass = (spec.light + 3 * spec.dark) * block_area / 4
        else:
            block_mass, _ = integrate.dblquad(
                lambda y, x, block_id=block.id: float(field._reference_values(block_id, x, y)),
                0.0,
                leg,
                0.0,
                lambda x: leg - x,
            )
        mass += factor * block_mass
    return mass
