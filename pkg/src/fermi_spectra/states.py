"""States on the matrix algebra: eigenstate certification, GNS construction,
projection compression, independence and orthogonality diagnostics.

A state is represented here exclusively by its density matrix; the
expectation of an algebra element A is Tr(rho A).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidStateError,
    NotEigenstateError,
    NotNormalError,
    NotProjectionError,
    NullWeightError,
)
from .hermitian import (
    as_complex_matrix,
    eig_hermitian,
    hermitian_defect,
    smallest_singular_value,
    trace_norm,
)

PSD_TOL = 1e-12
TRACE_TOL = 1e-12
PURITY_TOL = 1e-10
GNS_NULL_TOL = 1e-10


@dataclass(frozen=True)
class DensityState:
    """Normalized positive functional omega(A) = Tr(rho A)."""

    rho: np.ndarray

    def __post_init__(self):
        rho = as_complex_matrix(self.rho)
        if hermitian_defect(rho) > 1e-10:
            raise InvalidStateError("density matrix is not Hermitian")
        w = np.linalg.eigvalsh(rho)
        if w.min() < -PSD_TOL:
            raise InvalidStateError(f"density matrix has eigenvalue {w.min():.3e} < 0")
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {tr} != 1")
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def expect(self, a) -> complex:
        return complex(np.trace(self.rho @ np.asarray(a, dtype=complex)))

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def is_pure(self, tol: float = PURITY_TOL) -> bool:
        return self.purity() >= 1.0 - tol

    @classmethod
    def from_vector(cls, v) -> "DensityState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise InvalidStateError("zero vector does not define a state")
        v = v / nrm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityState":
        return cls(np.eye(dim, dtype=complex) / dim)


def default_probes(a, seed: int = 7, count: int = 20) -> list[np.ndarray]:
    """Identity, A, A*, and `count` seeded Ginibre matrices of matching size."""
    a = as_complex_matrix(a)
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    probes = [np.eye(n, dtype=complex), a, a.conj().T]
    for _ in range(count):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        probes.append(g / np.sqrt(2 * n))
    return probes


@dataclass(frozen=True)
class EigenstateReport:
    lam: complex
    quadratic_defect: float
    max_linear_defect: float
    tol: float
    verdict: bool


def check_eigenstate(omega: DensityState, a, tol: float = 1e-10,
                     probes=None) -> EigenstateReport:
    """Certify omega as an eigenstate of A.

    The eigenvalue candidate is lam = omega(A); the decisive number is the
    quadratic defect omega((A - lam)*(A - lam)), which vanishes exactly on
    eigenstates.  Linear defects |omega(BA) - lam omega(B)| over the probe
    set are reported as diagnostics (they are dominated by the quadratic
    defect through Cauchy-Schwarz).
    """
    a = as_complex_matrix(a)
    if a.shape[0] != omega.dim:
        raise DimensionMismatchError("state and element dimensions differ")
    if probes is None:
        probes = default_probes(a)
    lam = omega.expect(a)
    shifted = a - lam * np.eye(omega.dim)
    quad = omega.expect(shifted.conj().T @ shifted).real
    lin = max(abs(omega.expect(b @ a) - lam * omega.expect(b)) for b in probes)
    return EigenstateReport(
        lam=lam,
        quadratic_defect=float(quad),
        max_linear_defect=float(lin),
        tol=tol,
        verdict=bool(quad <= tol),
    )


def normality_defect(a) -> float:
    a = as_complex_matrix(a)
    return float(np.abs(a @ a.conj().T - a.conj().T @ a).max())


def check_normal_adjoint(omega: DensityState, a, tol: float = 1e-10) -> bool:
    """Eigenstate of a normal A with eigenvalue lam is one of A* with conj(lam)."""
    a = as_complex_matrix(a)
    if normality_defect(a) > max(tol, 1e-9):
        raise NotNormalError("element is not normal")
    rep = check_eigenstate(omega, a, tol)
    if not rep.verdict:
        return True  # vacuous: nothing to transport
    rep_adj = check_eigenstate(omega, a.conj().T, tol)
    return rep_adj.verdict and abs(rep_adj.lam - np.conj(rep.lam)) <= np.sqrt(tol)


def _normal_apply(a: np.ndarray, f) -> np.ndarray:
    """f(A) for a normal matrix via a complex Schur form (diagonal for normal A)."""
    import scipy.linalg

    t, q = scipy.linalg.schur(a, output="complex")
    vals = np.asarray([f(z) for z in np.diag(t)], dtype=complex)
    return (q * vals) @ q.conj().T


def check_functional_calculus(omega: DensityState, a, f, tol: float = 1e-10,
                              probes=None) -> bool:
    """Transport of the eigenvalue through f: eigenstate of f(A) at f(lam),
    plus vanishing of omega([B, f(A)]) over the probes."""
    a = as_complex_matrix(a)
    if normality_defect(a) > max(tol, 1e-9):
        raise NotNormalError("functional calculus requires a normal element")
    rep = check_eigenstate(omega, a, tol, probes)
    if not rep.verdict:
        raise NotEigenstateError("state is not an eigenstate of the element")
    if probes is None:
        probes = default_probes(a)
    fa = _normal_apply(a, f)
    rep_f = check_eigenstate(omega, fa, tol, probes)
    target = complex(f(rep.lam.real if abs(rep.lam.imag) < 1e-13 else rep.lam))
    if not rep_f.verdict or abs(rep_f.lam - target) > np.sqrt(tol):
        return False
    comm = max(
        abs(omega.expect(b @ fa) - omega.expect(fa @ b)) for b in probes
    )
    return comm <= np.sqrt(tol)


@dataclass(frozen=True)
class GnsRepresentation:
    """Cyclic representation on the quotient Mat_n / N_omega.

    `basis` lists the matrix units whose classes were kept as the
    orthonormal basis; the basis classes themselves are carried as the
    right-factored representatives X = B L with rho = L L*, under which
    <A, B> = omega(A* B) becomes the plain Frobenius product (this keeps
    null classes resolvable down to machine precision).
    """

    omega: DensityState
    basis: tuple
    reps: tuple
    cyclic_vector: np.ndarray

    @property
    def gns_dim(self) -> int:
        return len(self.reps)

    def represent(self, a) -> np.ndarray:
        """Matrix of left multiplication by `a` in the GNS basis."""
        a = np.asarray(a, dtype=complex)
        out = np.empty((self.gns_dim, self.gns_dim), dtype=complex)
        for j, xj in enumerate(self.reps):
            axj = a @ xj
            for i, xi in enumerate(self.reps):
                out[i, j] = np.sum(xi.conj() * axj)
        return out

    def vector_expectation(self, a) -> complex:
        psi = self.cyclic_vector
        return complex(psi.conj() @ self.represent(a) @ psi)


def _state_factor(rho: np.ndarray) -> np.ndarray:
    """L with rho = L L* from the eigendecomposition; eigenvalues at the
    noise floor are zeroed so null directions stay exactly null."""
    w, v = np.linalg.eigh(rho)
    w = np.where(w < 64 * np.finfo(float).eps * max(w.max(), 1.0), 0.0, w)
    return v * np.sqrt(w)


def gns(omega: DensityState) -> GnsRepresentation:
    """GNS construction by Gram-Schmidt over the matrix units.

    The quotient Mat_n / N_omega is spanned by orthonormalizing the n^2
    matrix units under <A, B> = omega(A* B); classes of norm below
    GNS_NULL_TOL are discarded.  The cyclic vector is the class of the
    identity and left multiplication implements the representation.
    """
    n = omega.dim
    factor = _state_factor(omega.rho)

    basis_units: list[np.ndarray] = []
    reps: list[np.ndarray] = []
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            x = e @ factor
            for b in reps:  # modified Gram-Schmidt, two passes for stability
                x = x - np.sum(b.conj() * x) * b
            for b in reps:
                x = x - np.sum(b.conj() * x) * b
            nrm = float(np.linalg.norm(x))
            if nrm < GNS_NULL_TOL:
                continue
            basis_units.append(e)
            reps.append(x / nrm)

    psi = np.asarray([np.sum(x.conj() * factor) for x in reps], dtype=complex)
    return GnsRepresentation(omega=omega, basis=tuple(basis_units),
                             reps=tuple(reps), cyclic_vector=psi)


def compress_state(omega: DensityState, p) -> DensityState:
    """State omega_P(A) = omega(P A P) / omega(P) compressed by a projection."""
    p = as_complex_matrix(p)
    if p.shape[0] != omega.dim:
        raise DimensionMismatchError("projection dimension mismatch")
    if hermitian_defect(p) > 1e-10 or np.abs(p @ p - p).max() > 1e-10:
        raise NotProjectionError("P is not an orthogonal projection")
    weight = omega.expect(p).real
    if weight <= 1e-12:
        raise NullWeightError(f"omega(P) = {weight:.3e}")
    rho_p = p @ omega.rho @ p / weight
    rho_p = (rho_p + rho_p.conj().T) / 2
    return DensityState(rho_p)


def independence_gram(states) -> float:
    """Smallest singular value of the Gram matrix G_ij = Tr(rho_i rho_j)."""
    states = list(states)
    if len(states) < 2:
        raise ValueError("need at least two states")
    g = np.empty((len(states), len(states)))
    for i, si in enumerate(states):
        for j, sj in enumerate(states):
            g[i, j] = np.trace(si.rho @ sj.rho).real
    return smallest_singular_value(g)


def state_distance(omega1: DensityState, omega2: DensityState) -> float:
    """Trace-norm distance; equals 2 exactly for orthogonal states."""
    if omega1.dim != omega2.dim:
        raise DimensionMismatchError("states live on different algebras")
    return trace_norm(omega1.rho - omega2.rho)


def eigenvector_state(h, index: int) -> DensityState:
    """Pure state built from the index-th (ascending) eigenvector of h."""
    dec = eig_hermitian(h)
    return DensityState.from_vector(dec.eigenvectors[:, index])
