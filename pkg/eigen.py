"""Lowest eigenpairs of the assembled operators, plus a dense oracle."""

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from config import Config
from operators import SparseSymOperator


logger = logging.getLogger(__name__)

DEFAULT_TOL = Config.TOL
DEFAULT_SEED = Config.SEED
MAX_DENSE = Config.MAX_DENSE


class SolverMethod(str, Enum):
    SHIFT_INVERT = "shift_invert"
    LANCZOS = "lanczos"
    DENSE = "dense"


class EigenSolverError(RuntimeError):
    """Raised when the iterative solver stops before convergence."""

    def __init__(self, message: str, partial: Optional["Spectrum"] = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = SolverMethod.SHIFT_INVERT.value
    tol: float = DEFAULT_TOL
    seed: Optional[int] = None
    iterations: Optional[int] = None
    certified: bool = True

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def vector(self, index: int) -> np.ndarray:
        if self.eigenvectors is None:
            raise ValueError("spectrum was computed without eigenvectors")
        return self.eigenvectors[:, index]

    def to_csv(self, converged: Optional[bool] = None) -> str:
        """Rows `n,E,residual`; a `converged` column is added for partial results."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        header = ["n", "E", "residual"]
        if converged is not None:
            header.append("converged")
        writer.writerow(header)
        residuals = self.residuals if len(self.residuals) else np.full(len(self), np.nan)
        for n, (value, residual) in enumerate(zip(self.eigenvalues, residuals), start=1):
            row = [n, repr(float(value)), f"{float(residual):.3e}"]
            if converged is not None:
                row.append(str(converged).lower())
            writer.writerow(row)
        return buffer.getvalue()

    def info(self) -> dict:
        return {
            "method": self.method,
            "tol": self.tol,
            "seed": self.seed,
            "iterations": self.iterations,
            "certified": bool(self.certified),
        }


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude component is positive."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1
    return vectors * signs


def _residuals(op: SparseSymOperator, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.linalg.norm(op.matrix @ vectors - vectors * values, axis=0)


def _certify(op: SparseSymOperator, values: np.ndarray, residuals: np.ndarray, tol: float) -> bool:
    scale = np.maximum(np.abs(values), op.norm1())
    return bool(np.all(residuals <= tol * scale))


def _dense_lowest(op: SparseSymOperator, k: int, tol: float, seed: Optional[int]) -> Spectrum:
    values, vectors = scipy.linalg.eigh(op.to_dense(), subset_by_index=[0, k - 1])
    vectors = _normalize_signs(vectors)
    residuals = _residuals(op, values, vectors)
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        residuals=residuals,
        method=SolverMethod.DENSE.value,
        tol=tol,
        seed=seed,
        certified=_certify(op, values, residuals, tol),
    )


def lowest_eigenpairs(
    op: SparseSymOperator,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    method: SolverMethod = SolverMethod.SHIFT_INVERT,
    max_restarts: Optional[int] = None,
) -> Spectrum:
    """The k smallest eigenpairs of `op` in ascending order.

    The operator is shifted below its Gershgorin lower bound, so indefinite
    Schrödinger operators need no special handling. The starting vector is
    drawn from a generator seeded with `seed`.
    """
    n = op.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be between 1 and {n}, got {k}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")

    method = SolverMethod(method)
    # ARPACK needs k < n - 1
    if method == SolverMethod.DENSE or k >= n - 1:
        return _dense_lowest(op, k, tol, seed)

    lower, _ = op.gershgorin_bounds()
    shift = lower - 1.0
    v0 = np.random.default_rng(seed).standard_normal(n)
    maxiter = max_restarts if max_restarts is not None else max(50 * k, 1000)

    try:
        if method == SolverMethod.SHIFT_INVERT:
            values, vectors = eigsh(op.matrix, k=k, sigma=shift, which="LM", v0=v0, tol=tol, maxiter=maxiter)
        else:
            shifted = op.shifted(-shift).matrix
            values, vectors = eigsh(shifted, k=k, which="SA", v0=v0, tol=tol, maxiter=maxiter)
            values = values + shift
    except ArpackNoConvergence as exc:
        partial = None
        if len(exc.eigenvalues):
            values = np.asarray(exc.eigenvalues)
            if method == SolverMethod.LANCZOS:
                values = values + shift
            order = np.argsort(values)
            vectors = _normalize_signs(exc.eigenvectors[:, order])
            partial = Spectrum(
                eigenvalues=values[order],
                eigenvectors=vectors,
                residuals=_residuals(op, values[order], vectors),
                method=method.value,
                tol=tol,
                seed=seed,
                iterations=maxiter,
                certified=False,
            )
        raise EigenSolverError(
            f"eigensolver did not converge after {maxiter} iterations "
            f"({len(exc.eigenvalues)} of {k} pairs)",
            partial,
        ) from exc

    order = np.argsort(values)
    values = values[order]
    vectors = _normalize_signs(vectors[:, order])
    residuals = _residuals(op, values, vectors)
    certified = _certify(op, values, residuals, tol)
    if not certified:
        logger.warning("residual certificate not met: max residual %.3e", float(residuals.max()))
    logger.info("%s: %d eigenpairs, E1=%.10g", method.value, k, values[0])
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        residuals=residuals,
        method=method.value,
        tol=tol,
        seed=seed,
        iterations=maxiter,
        certified=certified,
    )


def dense_eigen_oracle(op: SparseSymOperator, max_dense: int = MAX_DENSE) -> Spectrum:
    """Full spectrum by dense symmetric diagonalization."""
    if op.n > max_dense:
        raise ValueError(f"dense oracle refused: n={op.n} exceeds {max_dense}")
    values, vectors = scipy.linalg.eigh(op.to_dense())
    vectors = _normalize_signs(vectors)
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        residuals=_residuals(op, values, vectors),
        method=SolverMethod.DENSE.value,
    )


def generalized_oracle(laplacian: SparseSymOperator, density: np.ndarray, max_dense: int = MAX_DENSE) -> Spectrum:
    """Eigenvalues of L ψ = E D ψ with D = diag(density)."""
    if laplacian.n > max_dense:
        raise ValueError(f"dense oracle refused: n={laplacian.n} exceeds {max_dense}")
    density = np.asarray(density, dtype=float)
    if density.shape != (laplacian.n,):
        raise ValueError("density must have one value per grid point")
    values = scipy.linalg.eigh(laplacian.to_dense(), np.diag(density), eigvals_only=True)
    return Spectrum(eigenvalues=values, method="dense_generalized")


def weyl_ratio(spectrum: Spectrum, mass: float) -> np.ndarray:
    """E_n * M / (4πn); tends to 1 for large n on a fine grid."""
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    n = np.arange(1, len(spectrum) + 1)
    return np.asarray(spectrum.eigenvalues) * mass / (4 * math.pi * n)


def square_fd_eigenvalues(h: float, side: float = 1.0) -> np.ndarray:
    """Closed-form five-point spectrum of the square [0, side]^2, ascending."""
    m = int(round(side / h))
    p = np.arange(1, m)
    s = np.sin(p * math.pi * h / (2 * side)) ** 2
    values = (4.0 / (h * h)) * (s[:, None] + s[None, :])
    return np.sort(values.ravel())


def phi_to_psi(phi: np.ndarray, density: np.ndarray) -> np.ndarray:
    """Membrane displacement ψ = Σ^(-1/2) φ, normalized so ψᵀ Σ ψ = 1."""
    psi = np.asarray(phi) / np.sqrt(density)
    norm = math.sqrt(float(np.sum(density * psi * psi)))
    return psi / norm
