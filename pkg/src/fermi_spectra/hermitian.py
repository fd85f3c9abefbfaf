"""Dense Hermitian kernel: eigendecompositions, spectral projections,
functional calculus, singular values and trace norms.

Everything downstream (states, dynamics, band structures) consumes this
module.  All functions are pure and operate on plain complex ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    EmptyEigenspaceError,
    NonHermitianError,
)

HERMITIAN_TOL = 1e-12
ORTHO_TOL = 1e-10
RECON_TOL = 1e-10


def as_complex_matrix(m) -> np.ndarray:
    """Validate and return a square complex matrix with finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValueError("matrix has non-finite entries")
    return a


def hermitian_defect(m) -> float:
    """max_ij |M_ij - conj(M_ji)|, relative to the largest entry magnitude."""
    a = np.asarray(m, dtype=complex)
    scale = max(1.0, float(np.abs(a).max()))
    return float(np.abs(a - a.conj().T).max()) / scale


def require_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = as_complex_matrix(m)
    defect = hermitian_defect(a)
    if defect > tol:
        raise NonHermitianError(f"Hermitian defect {defect:.3e} exceeds tol {tol:.3e}")
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted ascending with a fixed-phase unitary eigenframe."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", int(self.eigenvalues.shape[0]))

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def orthonormality_defect(self) -> float:
        v = self.eigenvectors
        return float(np.abs(v @ v.conj().T - np.eye(self.dim)).max())


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive."""
    v = vectors.copy()
    idx = np.argmax(np.abs(v), axis=0)
    for j, i in enumerate(idx):
        pivot = v[i, j]
        if abs(pivot) > 0:
            v[:, j] *= np.conj(pivot) / abs(pivot)
    return v


def eig_hermitian(h, hermitian_tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, ascending eigenvalue order.

    The eigenvector phase is fixed deterministically (largest component
    real positive) so repeated runs give identical frames.
    """
    a = require_hermitian(h, hermitian_tol)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(str(exc)) from exc
    return EigenDecomposition(eigenvalues=w, eigenvectors=_fix_phases(v))


def spectral_projection(dec: EigenDecomposition, lam: float, tol: float) -> np.ndarray:
    """Orthogonal projection onto the span of eigenvectors with |e - lam| <= tol."""
    mask = np.abs(dec.eigenvalues - lam) <= tol
    if not mask.any():
        raise EmptyEigenspaceError(
            f"no eigenvalue within {tol:.3e} of {lam}; spectrum {dec.eigenvalues}"
        )
    v = dec.eigenvectors[:, mask]
    return v @ v.conj().T


def apply_function(dec: EigenDecomposition, f) -> np.ndarray:
    """Functional calculus V diag(f(eigenvalues)) V*.

    `f` may be scalar or vectorized; complex return values are allowed
    (the result is then a normal, not Hermitian, matrix).
    """
    vals = np.asarray([f(t) for t in dec.eigenvalues], dtype=complex)
    v = dec.eigenvectors
    return (v * vals) @ v.conj().T


def plateau_bump(lam: float, g: float):
    """Continuous bump equal to 1 on [lam-g/3, lam+g/3] and 0 beyond 2g/3.

    Applied to a gapped Hermitian via `apply_function` it reproduces the
    spectral projection onto the eigenvalue cluster around `lam`.
    """
    if g <= 0:
        raise ValueError("bump width g must be positive")

    def q(t):
        d = abs(t - lam)
        if d <= g / 3:
            return 1.0
        if d >= 2 * g / 3:
            return 0.0
        return 2.0 - 3.0 * d / g

    return q


def smallest_singular_value(m) -> float:
    a = np.asarray(m, dtype=complex)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceError(str(exc)) from exc
    return float(s[-1])


def trace_norm(m) -> float:
    """Sum of singular values (functional-norm distance of density matrices)."""
    a = np.asarray(m, dtype=complex)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceError(str(exc)) from exc
    return float(s.sum())
