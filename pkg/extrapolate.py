"""Richardson extrapolation of grid sequences in powers of h."""

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvergenceSequence:
    """(h, value) pairs sorted by decreasing h."""

    entries: tuple[tuple[float, float], ...]
    quantity: str = "E1"

    def __post_init__(self):
        entries = tuple(sorted(((float(h), float(v)) for h, v in self.entries), key=lambda e: -e[0]))
        if len(entries) < 2:
            raise ValueError("a convergence sequence needs at least 2 entries")
        hs = [h for h, _ in entries]
        if len(set(hs)) != len(hs):
            raise ValueError(f"duplicate spacings in {hs}")
        if any(not h > 0 for h in hs):
            raise ValueError("spacings must be positive")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_csv(cls, text: str, quantity: str = "E1") -> "ConvergenceSequence":
        """Rows of `h,E`; a header row and blank lines are skipped."""
        entries = []
        for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
            if not row or not "".join(row).strip() or row[0].strip().startswith("#"):
                continue
            try:
                entries.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if line_no == 1 and not entries:
                    continue
                raise ValueError(f"line {line_no}: expected `h,E`, got {row!r}")
        return cls(tuple(entries), quantity)

    @property
    def spacings(self) -> np.ndarray:
        return np.array([h for h, _ in self.entries])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])

    def is_monotone(self) -> bool:
        steps = np.diff(self.values)
        return bool(np.all(steps >= 0) or np.all(steps <= 0))


@dataclass(frozen=True)
class RichardsonResult:
    limit: float
    stability: float
    tableau: tuple[tuple[float, ...], ...]
    depth: int
    monotone: bool

    @property
    def diagonal(self) -> list[float]:
        return [row[-1] for row in self.tableau]

    def to_dict(self) -> dict:
        return {
            "limit": self.limit,
            "stability": self.stability,
            "depth": self.depth,
            "monotone": self.monotone,
            "tableau": [list(row) for row in self.tableau],
        }


def richardson(seq: ConvergenceSequence, order: int = 2) -> RichardsonResult:
    """Neville tableau in x = h**order, extrapolated to x = 0.

    Row i holds the estimates that use entries 0..i; column j removes j error
    terms. The limit is the diagonal entry that moved least from its
    predecessor, preferring the deeper one on ties.
    """
    if order < 1:
        raise ValueError(f"order must be positive, got {order}")
    x = seq.spacings ** order
    values = seq.values
    monotone = seq.is_monotone()
    if not monotone:
        logger.warning("%s: sequence is not monotone in h", seq.quantity)

    tableau = []
    for i in range(len(values)):
        row = [values[i]]
        for j in range(1, i + 1):
            prev_same = row[j - 1]
            prev_above = tableau[i - 1][j - 1]
            row.append(prev_same + (prev_same - prev_above) * x[i] / (x[i - j] - x[i]))
        tableau.append(row)

    diagonal = [row[-1] for row in tableau]
    steps = [abs(diagonal[j] - diagonal[j - 1]) for j in range(1, len(diagonal))]
    best = min(range(len(steps)), key=lambda j: (steps[j], -j))
    depth = best + 1
    return RichardsonResult(
        limit=float(diagonal[depth]),
        stability=float(steps[best]),
        tableau=tuple(tuple(float(v) for v in row) for row in tableau),
        depth=depth,
        monotone=monotone,
    )


def convergence_rate(seq: ConvergenceSequence, order: int = 2) -> float:
    """Observed order p from log|v(h) - v*| against log h.

    v* is the Richardson limit; entries that already equal it are skipped.
    """
    if len(seq.entries) < 3:
        raise ValueError("convergence rate needs at least 3 entries")
    limit = richardson(seq, order).limit
    errors = np.abs(seq.values - limit)
    keep = errors > 0
    if keep.sum() < 2:
        raise ValueError("sequence has converged; rate is undefined")
    slope, _ = np.polyfit(np.log(seq.spacings[keep]), np.log(errors[keep]), 1)
    return float(slope)
