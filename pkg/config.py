import json
import os
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values, load_dotenv

load_dotenv()


class Config:
    """Process-level settings for the isospectral drum lab"""

    # Output
    OUTPUT_DIR = os.getenv('ISODRUM_OUTPUT_DIR', './isodrum_output')

    # Solver defaults
    SEED = int(os.getenv('ISODRUM_SEED', '20100'))
    TOL = float(os.getenv('ISODRUM_TOL', '1e-10'))
    MAX_DENSE = int(os.getenv('ISODRUM_MAX_DENSE', '4000'))

    # 0 leaves the BLAS thread count to the machine default
    THREADS = int(os.getenv('ISODRUM_THREADS', '0'))

    @classmethod
    def ensure_output_dir(cls):
        """Ensure the output directory exists"""
        os.makedirs(cls.OUTPUT_DIR, exist_ok=True)
        return cls.OUTPUT_DIR


class ConfigError(ValueError):
    """Invalid experiment file."""


class DomainChoice(str, Enum):
    GWW_A = "gww_a"
    GWW_B = "gww_b"
    PAIR = "pair"
    SQUARE = "square"


PATTERNS = ("parity", "split_diagonal", "split_hypotenuse")
FIELD_KINDS = (
    "homogeneous",
    "piecewise_constant_density",
    "reference_pattern",
    "constant_vector_potential",
    "point_charges",
)
SPLIT_LINES = ("light", "mean", "dark")
SOLVER_METHODS = ("shift_invert", "lanczos", "dense")
CHARGE_MODES = ("local", "coulomb")

# Experiment-file key -> ExperimentConfig attribute.
KEYS = {
    "domain": "domain",
    "leg": "leg",
    "n": "n",
    "k_sequence": "k_sequence",
    "field.kind": "field_kind",
    "field.sigma.light": "light",
    "field.sigma.dark": "dark",
    "field.pattern": "pattern",
    "field.split_line": "split_line",
    "field.efield.magnitude": "magnitude",
    "field.efield.charge": "charge",
    "field.efield.direction": "direction",
    "field.efield.anchor": "anchor",
    "field.charge.q": "q",
    "field.charge.mode": "charge_mode",
    "field.charge.cutoff": "cutoff",
    "field.perturb.block": "perturb_block",
    "field.perturb.factor": "perturb_factor",
    "field.perturb.domain": "perturb_domain",
    "kinetic": "kinetic",
    "solver.k": "k",
    "solver.tol": "tol",
    "solver.seed": "seed",
    "solver.method": "method",
    "output.dump": "dump",
}
SIGMA_PREFIX = "field.sigma."
BLOCK_LABELS = ("A", "B", "C", "D", "E", "F", "G")


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainChoice = DomainChoice.PAIR
    leg: float = 2.0
    n: Optional[int] = 16
    k_sequence: tuple[int, ...] = ()
    field_kind: str = "homogeneous"
    sigma: tuple[tuple[str, float], ...] = ()
    light: float = 1.0
    dark: float = 2.0
    pattern: Optional[str] = None
    split_line: Optional[str] = None
    magnitude: float = 0.0
    charge: float = 1.0
    direction: tuple[float, float] = (1.0, 0.0)
    anchor: tuple[float, float] = (0.0, 0.0)
    q: float = 1.0
    charge_mode: str = "local"
    cutoff: Optional[float] = None
    perturb_block: Optional[str] = None
    perturb_factor: float = 1.1
    perturb_domain: str = "gww_b"
    kinetic: float = 1.0
    k: int = 10
    tol: float = Config.TOL
    seed: int = Config.SEED
    method: str = "shift_invert"
    dump: bool = False

    @property
    def h(self) -> float:
        if self.n is None:
            raise ConfigError("config has a k_sequence, not a single spacing")
        return self.leg / self.n

    def sweep_spacings(self) -> list[tuple[int, float]]:
        """(k, h) with h = 1/(4k) for every k in the sequence."""
        return [(k, 1.0 / (4 * k)) for k in self.k_sequence]

    @property
    def is_density(self) -> bool:
        return self.field_kind in ("homogeneous", "piecewise_constant_density", "reference_pattern")

    def field_spec(self):
        from field import FieldSpec

        if self.field_kind == "homogeneous":
            return FieldSpec.homogeneous(dict(self.sigma).get("*", 1.0))
        if self.field_kind == "piecewise_constant_density":
            if self.sigma:
                return FieldSpec.piecewise(dict(self.sigma))
            return FieldSpec.parity_classes(self.light, self.dark)
        if self.field_kind == "reference_pattern":
            return FieldSpec.split(
                self.light,
                self.dark,
                self.pattern or "split_diagonal",
                self.split_line or "mean",
            )
        if self.field_kind == "constant_vector_potential":
            return FieldSpec.electric(self.magnitude, self.direction, self.anchor, self.charge)
        cutoff = self.cutoff if self.cutoff is not None else self.h / 2
        return FieldSpec.point_charges(self.q, self.charge_mode, cutoff)

    def to_text(self) -> str:
        """Flat `key=value` form; `load_experiment_text` reads it back to an equal config."""
        values = asdict(self)
        lines = []
        for key, attr in KEYS.items():
            value = values[attr]
            if value is None or value == ():
                continue
            lines.append(f"{key}={_format(value)}")
        for block_id, value in self.sigma:
            label = "value" if block_id == "*" else block_id
            lines.append(f"{SIGMA_PREFIX}{label}={value!r}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def _flatten(data: dict, prefix: str = "") -> dict[str, str]:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            flat[name] = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            flat[name] = "true" if value else "false"
        else:
            flat[name] = str(value)
    return flat


def _number(key: str, raw: str, kind=float):
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def _pair(key: str, raw: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected `x,y`, got {raw!r}")
    return _number(key, parts[0]), _number(key, parts[1])


def _choice(key: str, raw: str, allowed) -> str:
    value = raw.strip().lower()
    if value not in allowed:
        raise ConfigError(f"{key}: {raw!r} is not one of {', '.join(allowed)}")
    return value


def _bool(key: str, raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}")


def parse_experiment(values: dict[str, Optional[str]]) -> ExperimentConfig:
    """Build a validated ExperimentConfig from flat dotted keys."""
    kwargs = {}
    sigma = {}
    h_raw = None
    for key, raw in values.items():
        if raw is None:
            raise ConfigError(f"{key}: missing value")
        raw = str(raw).strip()
        if key.startswith(SIGMA_PREFIX) and key not in KEYS:
            label = key[len(SIGMA_PREFIX):]
            if label == "value":
                sigma["*"] = _number(key, raw)
            elif label in BLOCK_LABELS:
                sigma[label] = _number(key, raw)
            else:
                raise ConfigError(f"unknown key: {key}")
            continue
        if key == "h":
            h_raw = raw
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown key: {key}")
        attr = KEYS[key]
        if attr == "domain":
            kwargs[attr] = DomainChoice(_choice(key, raw, [d.value for d in DomainChoice]))
        elif attr in ("n", "k", "seed"):
            kwargs[attr] = _number(key, raw, int)
        elif attr == "k_sequence":
            kwargs[attr] = tuple(_number(key, part, int) for part in raw.split(",") if part.strip())
        elif attr in ("direction", "anchor"):
            kwargs[attr] = _pair(key, raw)
        elif attr == "field_kind":
            kwargs[attr] = _choice(key, raw, FIELD_KINDS)
        elif attr == "pattern":
            kwargs[attr] = _choice(key, raw, PATTERNS)
        elif attr == "split_line":
            kwargs[attr] = _choice(key, raw, SPLIT_LINES)
        elif attr == "method":
            kwargs[attr] = _choice(key, raw, SOLVER_METHODS)
        elif attr == "charge_mode":
            kwargs[attr] = _choice(key, raw, CHARGE_MODES)
        elif attr == "perturb_domain":
            kwargs[attr] = _choice(key, raw, ("gww_a", "gww_b"))
        elif attr == "perturb_block":
            if raw.upper() not in BLOCK_LABELS:
                raise ConfigError(f"{key}: {raw!r} is not a block label")
            kwargs[attr] = raw.upper()
        elif attr == "dump":
            kwargs[attr] = _bool(key, raw)
        else:
            kwargs[attr] = _number(key, raw)

    if sigma:
        kwargs["sigma"] = tuple(sorted(sigma.items()))
    leg = kwargs.get("leg", 2.0)
    if h_raw is not None:
        if "n" in kwargs:
            raise ConfigError("give either h or n, not both")
        from grid import GridCompatibilityError, subdivisions

        try:
            kwargs["n"] = subdivisions(leg, _number("h", h_raw))
        except GridCompatibilityError as exc:
            raise ConfigError(f"h: {exc}") from None
    if kwargs.get("k_sequence") and "n" not in kwargs:
        kwargs["n"] = None

    config = ExperimentConfig(**kwargs)
    _validate(config)
    return config


def _validate(config: ExperimentConfig) -> None:
    if not config.leg > 0:
        raise ConfigError(f"leg must be positive, got {config.leg}")
    if config.n is not None and config.n < 1:
        raise ConfigError(f"n must be a positive integer, got {config.n}")
    for k in config.k_sequence:
        ratio = config.leg * 4 * k
        if k < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(
                f"k={k}: leg/h = {ratio:g} is not an integer; mirror images of grid points would leave the grid"
            )
    if config.k < 1:
        raise ConfigError(f"solver.k must be at least 1, got {config.k}")
    if not config.tol > 0:
        raise ConfigError(f"solver.tol must be positive, got {config.tol}")
    if not config.kinetic > 0:
        raise ConfigError(f"kinetic must be positive, got {config.kinetic}")
    if config.field_kind == "point_charges" and config.cutoff is None and config.n is None:
        raise ConfigError("field.charge.cutoff is required with a k_sequence")
    _validate_pattern(config)
    block_ids = ("A", "B") if config.domain == DomainChoice.SQUARE else BLOCK_LABELS
    try:
        config.field_spec().validate(block_ids)
    except ValueError as exc:
        raise ConfigError(f"field: {exc}") from None


def _validate_pattern(config: ExperimentConfig) -> None:
    kind = config.field_kind
    if config.pattern is not None:
        if kind == "piecewise_constant_density" and config.pattern != "parity":
            raise ConfigError(
                f"field.pattern={config.pattern} needs field.kind=reference_pattern; "
                "piecewise_constant_density only takes the parity pattern"
            )
        if kind == "reference_pattern" and config.pattern == "parity":
            raise ConfigError("field.pattern=parity needs field.kind=piecewise_constant_density")
        if kind not in ("piecewise_constant_density", "reference_pattern"):
            raise ConfigError(f"field.pattern does not apply to field.kind={kind}")
    if config.split_line is not None and kind != "reference_pattern":
        raise ConfigError(f"field.split_line does not apply to field.kind={kind}")


def load_experiment_text(text: str) -> ExperimentConfig:
    import io

    return parse_experiment(dotenv_values(stream=io.StringIO(text)))


def load_experiment(path) -> ExperimentConfig:
    """Read a `key=value` experiment file, or JSON when the suffix is `.json`."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return parse_experiment(_flatten(data))
    return parse_experiment(dotenv_values(path))
