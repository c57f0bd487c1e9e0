import os
from collections.abc import Callable
from pathlib import Path
from typing import Optional

PROJECT_PREFECT_HOME = Path(__file__).resolve().parent / ".prefect"
os.environ.setdefault("PREFECT_HOME", str(PROJECT_PREFECT_HOME))
os.environ.setdefault("PREFECT_SERVER_ANALYTICS_ENABLED", "false")
os.environ.setdefault("PREFECT_CLOUD_ENABLE_ORCHESTRATION_TELEMETRY", "false")

from prefect import flow, task

from config import ExperimentConfig, load_experiment_text
from experiment_service import ExperimentService
from extrapolate import ConvergenceSequence, convergence_rate, richardson


@task(name="單一網格求解")
def solve_grid(config_text: str, domain_name: str, k: int, h: float) -> list[float]:
    """Lowest eigenvalues of one domain on the grid with spacing h = 1/(4k)."""
    config = load_experiment_text(config_text)
    service = ExperimentService(on_progress=print)
    domain = next(d for d in service.domains(config) if d.name == domain_name)
    print(f"正在求解 {domain_name}，k={k}，h={h:g}")
    outcome = service.solve_domain(config, domain, h)
    return [float(v) for v in outcome.spectrum.eigenvalues]


@task(name="Richardson 外推")
def extrapolate_levels(spacings: list[float], levels: list[list[float]], order: int = 2) -> list[dict]:
    """Extrapolate every eigenvalue index across the grid sequence."""
    results = []
    for index in range(min(len(values) for values in levels)):
        seq = ConvergenceSequence(
            tuple((h, values[index]) for h, values in zip(spacings, levels)),
            quantity=f"E{index + 1}",
        )
        result = richardson(seq, order)
        entry = {
            "n": index + 1,
            "finest": seq.values[-1],
            "limit": result.limit,
            "stability": result.stability,
            "depth": result.depth,
            "monotone": result.monotone,
        }
        if len(seq.entries) >= 3:
            try:
                entry["rate"] = convergence_rate(seq, order)
            except ValueError:
                entry["rate"] = None
        results.append(entry)
    return results


def _run(config: ExperimentConfig, solve, extrapolate, order: int) -> dict:
    if not config.k_sequence:
        raise ValueError("sweep needs k_sequence")
    service = ExperimentService()
    text = config.to_text()
    report = {}
    for domain in service.domains(config):
        spacings = []
        levels = []
        for k, h in config.sweep_spacings():
            spacings.append(h)
            levels.append(solve(text, domain.name, k, h))
        report[domain.name] = {
            "k_sequence": list(config.k_sequence),
            "h": spacings,
            "levels": levels,
            "extrapolated": extrapolate(spacings, levels, order),
        }
    return report


@flow(name="網格加密外推流程")
def sweep_flow(config_text: str, order: int = 2) -> dict:
    """Solve on every grid of the k sequence, then extrapolate each level."""
    config = load_experiment_text(config_text)
    print(f"開始網格序列求解: k = {', '.join(str(k) for k in config.k_sequence)}")
    report = _run(config, solve_grid, extrapolate_levels, order)
    print("網格加密外推流程完成")
    return report


def run_sweep_direct(
    config: ExperimentConfig,
    order: int = 2,
    solve: Optional[Callable[..., list[float]]] = None,
) -> dict:
    """Same as `sweep_flow` without the Prefect runtime."""
    return _run(config, solve or solve_grid.fn, extrapolate_levels.fn, order)
