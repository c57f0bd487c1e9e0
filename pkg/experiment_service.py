import logging
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Optional

import numpy as np

from config import DomainChoice, ExperimentConfig
from dumps import FieldDump
from eigen import Spectrum, lowest_eigenpairs, phi_to_psi
from extrapolate import ConvergenceSequence, convergence_rate, richardson
from field import ScalarField, check_symmetry, make_symmetric_field, perturb_block, total_mass
from geometry import Domain, build_gww_pair, build_square
from geometry import to_text as domain_text
from grid import Grid, build_grid
from operators import SparseSymOperator, assemble_density_operator, assemble_schrodinger
from transplant import TransplantMap, compare_spectra, derive_transplantation, verify_intertwining


logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str], None]
Solver = Callable[..., Spectrum]
Transplanter = Callable[[Domain, Domain, float], TransplantMap]


@lru_cache(maxsize=8)
def cached_transplantation(leg: float) -> TransplantMap:
    gww_a, gww_b = build_gww_pair(leg)
    return derive_transplantation(gww_a, gww_b, leg / 4)


@dataclass
class SolveOutcome:
    domain: Domain
    grid: Grid
    field: ScalarField
    operator: SparseSymOperator
    spectrum: Spectrum

    def ground_state(self) -> np.ndarray:
        """Ground state as a membrane displacement (density) or wavefunction (potential)."""
        phi = self.spectrum.vector(0)
        if self.field.is_density:
            return phi_to_psi(phi, self.operator.node_field)
        return phi

    def field_dump(self) -> FieldDump:
        return FieldDump.from_grid(self.grid, self.ground_state(), f"psi1_{self.domain.name}")

    def summary(self) -> dict[str, Any]:
        """Solver settings and operator metadata recorded next to every spectrum."""
        return {
            "domain": self.domain.name,
            "n_interior": self.grid.size,
            "operator": self.operator.metadata(),
            "solver": self.spectrum.info(),
        }


class ExperimentService:
    """Single application-facing entrypoint for building, solving and comparing drums."""

    def __init__(
        self,
        solver: Optional[Solver] = None,
        transplanter: Optional[Transplanter] = None,
        on_progress: Optional[ProgressCallback] = None,
    ):
        self.solver = solver or lowest_eigenpairs
        self.transplanter = transplanter
        self.on_progress = on_progress or (lambda message: None)

    def domains(self, config: ExperimentConfig) -> list[Domain]:
        if config.domain == DomainChoice.SQUARE:
            return [build_square(config.leg)]
        gww_a, gww_b = build_gww_pair(config.leg)
        if config.domain == DomainChoice.GWW_A:
            return [gww_a]
        if config.domain == DomainChoice.GWW_B:
            return [gww_b]
        return [gww_a, gww_b]

    def build(self, config: ExperimentConfig) -> str:
        return "".join(domain_text(domain) for domain in self.domains(config))

    def make_field(self, config: ExperimentConfig, domain: Domain) -> ScalarField:
        field = make_symmetric_field(config.field_spec(), domain)
        if config.perturb_block and domain.name.lower() == config.perturb_domain:
            field = perturb_block(field, config.perturb_block, config.perturb_factor)
        return field

    def assemble(self, config: ExperimentConfig, domain: Domain, h: Optional[float] = None):
        grid = build_grid(domain, h if h is not None else config.h)
        field = self.make_field(config, domain)
        if field.is_density:
            operator = assemble_density_operator(grid, field)
        else:
            operator = assemble_schrodinger(grid, field, config.kinetic)
        return grid, field, operator

    def solve_domain(self, config: ExperimentConfig, domain: Domain, h: Optional[float] = None) -> SolveOutcome:
        grid, field, operator = self.assemble(config, domain, h)
        self.on_progress(f"{domain.name}: {grid.size} 個內部格點，h={grid.h:g}")
        k = min(config.k, grid.size)
        spectrum = self.solver(operator, k, tol=config.tol, seed=config.seed, method=config.method)
        self.on_progress(f"{domain.name}: E1 = {spectrum.eigenvalues[0]:.10g}")
        return SolveOutcome(domain, grid, field, operator, spectrum)

    def solve(self, config: ExperimentConfig) -> list[SolveOutcome]:
        return [self.solve_domain(config, domain) for domain in self.domains(config)]

    def transplant_map(self, leg: float) -> TransplantMap:
        if self.transplanter is not None:
            gww_a, gww_b = build_gww_pair(leg)
            return self.transplanter(gww_a, gww_b, leg / 4)
        return cached_transplantation(leg)

    def compare(self, config: ExperimentConfig) -> dict[str, Any]:
        """Intertwining residual and spectral difference for the GWW pair."""
        if config.domain != DomainChoice.PAIR:
            raise ValueError(f"compare needs domain=pair, got {config.domain.value}")

        tmap = self.transplant_map(config.leg)
        outcome_a, outcome_b = self.solve(config)
        report = verify_intertwining(tmap, outcome_a.operator, outcome_b.operator)
        comparison = compare_spectra(outcome_a.spectrum, outcome_b.spectrum)
        symmetry = {
            outcome.domain.name: check_symmetry(outcome.field, outcome.domain, n_samples=50, seed=config.seed).to_dict()
            for outcome in (outcome_a, outcome_b)
        }

        result = {
            "field": outcome_a.operator.field_key,
            "field_b": outcome_b.operator.field_key,
            "leg": config.leg,
            "h": outcome_a.grid.h,
            "n_interior": outcome_a.grid.size,
            "transplantation": tmap.to_dict(),
            "intertwining_residual": report.residual,
            "exact": report.exact,
            "max_abs_diff": comparison.max_abs_diff,
            "max_rel_diff": comparison.max_rel_diff,
            "symmetry": symmetry,
            "solver": {outcome.domain.name: outcome.summary()["solver"] for outcome in (outcome_a, outcome_b)},
            "certified": outcome_a.spectrum.certified and outcome_b.spectrum.certified,
            "spectra": {
                outcome.domain.name: [float(v) for v in outcome.spectrum.eigenvalues]
                for outcome in (outcome_a, outcome_b)
            },
        }
        if outcome_a.field.is_density:
            result["mass"] = {
                outcome.domain.name: total_mass(outcome.field, outcome.domain)
                for outcome in (outcome_a, outcome_b)
            }
        if config.field_kind == "constant_vector_potential":
            result["efield"] = {
                "magnitude": config.magnitude,
                "charge": config.charge,
                "direction": list(config.direction),
                "anchor": list(config.anchor),
            }
        return result

    @staticmethod
    def extrapolate(csv_text: str, order: int = 2, quantity: str = "E1") -> dict[str, Any]:
        seq = ConvergenceSequence.from_csv(csv_text, quantity)
        result = richardson(seq, order).to_dict()
        result["quantity"] = quantity
        result["order"] = order
        if len(seq.entries) >= 3:
            try:
                result["rate"] = convergence_rate(seq, order)
            except ValueError as exc:
                logger.warning("convergence rate unavailable: %s", exc)
                result["rate"] = None
        return result
