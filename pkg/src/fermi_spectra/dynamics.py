"""Heisenberg dynamics of a Hermitian element and its state diagnostics:
invariance, ground-state positivity, and the gapped-state inequality.

Certificates are probe-set extrema, not operator norms.  The default probe
set contains all matrix units (these realize the extremal elements in every
low-dimensional counterexample) plus seeded Ginibre matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError, NonPositiveDeltaError
from .hermitian import apply_function, as_complex_matrix, eig_hermitian
from .states import DensityState, gns


def matrix_units(n: int) -> list[np.ndarray]:
    units = []
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    return units


def dynamics_probes(n: int, seed: int = 11, random_count: int = 10) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    probes = [np.eye(n, dtype=complex)] + matrix_units(n)
    for _ in range(random_count):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        probes.append(g / np.sqrt(2 * n))
    return probes


def evolve(a, h, t: float) -> np.ndarray:
    """Conjugation by exp(i t H), built through functional calculus."""
    a = as_complex_matrix(a)
    dec = eig_hermitian(h)
    if dec.dim != a.shape[0]:
        raise ValueError("shape mismatch between element and generator")
    if t == 0.0:
        return a.copy()
    u = apply_function(dec, lambda s: np.exp(1j * t * s))
    return u @ a @ u.conj().T


def derivation(h, a) -> np.ndarray:
    """Infinitesimal generator i [H, A]."""
    h = as_complex_matrix(h)
    a = as_complex_matrix(a)
    if h.shape != a.shape:
        raise ValueError("shape mismatch between element and generator")
    return 1j * (h @ a - a @ h)


@dataclass(frozen=True)
class DynamicsProbeReport:
    invariance_defect: float
    ground_defect: float
    gap_residual: float
    delta: float
    omega_h: float = float("nan")
    lambda_star: float = float("nan")

    @property
    def is_ground(self) -> bool:
        return abs(self.omega_h - self.lambda_star) <= 1e-8


def invariance_defect(omega: DensityState, h, probes=None) -> float:
    """max over probes A of |omega(delta_H(A))|; zero certifies invariance."""
    h = as_complex_matrix(h)
    if omega.dim != h.shape[0]:
        raise InvalidStateError("state dimension does not match generator")
    if probes is None:
        probes = dynamics_probes(h.shape[0])
    return max(abs(omega.expect(derivation(h, a))) for a in probes)


def _ground_quantity(omega: DensityState, h, a) -> float:
    """Re[-i omega(A* delta_H(A))] = Re[omega(A* H A - A* A H)]."""
    val = omega.expect(a.conj().T @ h @ a) - omega.expect(a.conj().T @ a @ h)
    return val.real


def ground_certificate(omega: DensityState, h, probes=None) -> DynamicsProbeReport:
    """Positivity probe of the ground-state inequality.

    ground_defect is the most negative probe value of -i omega(A* delta_H(A));
    a ground state keeps it >= 0.  The report also carries omega(H) and the
    bottom of the spectrum of the GNS-represented H, whose equality is the
    defining ground-state condition.
    """
    h = as_complex_matrix(h)
    if omega.dim != h.shape[0]:
        raise InvalidStateError("state dimension does not match generator")
    if probes is None:
        probes = dynamics_probes(h.shape[0])
    ground = min(_ground_quantity(omega, h, a) for a in probes)
    rep = gns(omega)
    pi_h = rep.represent(h)
    pi_h = (pi_h + pi_h.conj().T) / 2
    lam_star = float(np.linalg.eigvalsh(pi_h).min())
    return DynamicsProbeReport(
        invariance_defect=invariance_defect(omega, h, probes),
        ground_defect=float(ground),
        gap_residual=float("nan"),
        delta=0.0,
        omega_h=float(omega.expect(h).real),
        lambda_star=lam_star,
    )


def gap_certificate(omega: DensityState, h, delta: float,
                    probes=None) -> DynamicsProbeReport:
    """Probe the inequality -i omega(A* delta_H(A)) >= delta (var_omega A)."""
    if delta <= 0:
        raise NonPositiveDeltaError(f"delta = {delta}")
    h = as_complex_matrix(h)
    if omega.dim != h.shape[0]:
        raise InvalidStateError("state dimension does not match generator")
    if probes is None:
        probes = dynamics_probes(h.shape[0])
    residual = np.inf
    ground = np.inf
    for a in probes:
        q = _ground_quantity(omega, h, a)
        variance = omega.expect(a.conj().T @ a).real - abs(omega.expect(a)) ** 2
        residual = min(residual, q - delta * variance)
        ground = min(ground, q)
    return DynamicsProbeReport(
        invariance_defect=invariance_defect(omega, h, probes),
        ground_defect=float(ground),
        gap_residual=float(residual),
        delta=float(delta),
        omega_h=float(omega.expect(h).real),
    )


def estimate_gap(omega: DensityState, h, probes=None, delta_max: float = None,
                 tol: float = 1e-10, max_iter: int = 200) -> float:
    """Largest delta for which the gap inequality still passes, by bisection."""
    h = as_complex_matrix(h)
    if probes is None:
        probes = dynamics_probes(h.shape[0])
    if delta_max is None:
        w = np.linalg.eigvalsh(h)
        delta_max = float(w.max() - w.min()) + 1.0

    def passes(delta):
        return gap_certificate(omega, h, delta, probes).gap_residual >= -tol

    if not passes(tol):
        return 0.0
    lo, hi = tol, delta_max
    if passes(hi):
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return lo
