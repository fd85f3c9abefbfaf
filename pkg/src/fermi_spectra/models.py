"""Reference models with closed-form ground truth: the staggered two-band
nearest-neighbor symbol (graphene / 2-D SSH type) and the unilateral shift,
plus the analytic segment oracle for the level-set eigenstate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .bands import HermitianSymbol, TrigPolynomialSymbol
from .errors import (
    ExtremeLevelError,
    LambdaOutOfBandError,
    NonPositiveGammaError,
)

TWO_PI = 2.0 * np.pi


def graphene_symbol(gamma: float) -> TrigPolynomialSymbol:
    """Two-band symbol [[gamma, e^{-ik1}+e^{-ik2}], [c.c., -gamma]] on T^2."""
    if gamma <= 0:
        raise NonPositiveGammaError(f"gamma = {gamma}")
    terms = {
        (0, 0): [((0, 0), complex(gamma))],
        (0, 1): [((-1, 0), 1.0 + 0j), ((0, -1), 1.0 + 0j)],
        (1, 0): [((1, 0), 1.0 + 0j), ((0, 1), 1.0 + 0j)],
        (1, 1): [((0, 0), complex(-gamma))],
    }
    return TrigPolynomialSymbol(2, terms, dim=2, name=f"graphene(gamma={gamma})")


def graphene_band(gamma: float, k1, k2, sign: int = +1):
    """Energy sheets +/- sqrt(gamma^2 + 4 cos^2((k1 - k2)/2))."""
    return sign * np.sqrt(gamma**2 + 4.0 * np.cos((np.asarray(k1) - np.asarray(k2)) / 2) ** 2)


def graphene_projection(gamma: float, k, sign: int = +1) -> np.ndarray:
    """Band projection P_± = 1/2 + H(k) / (2 eps_±(k))."""
    k = np.asarray(k, dtype=float)
    h = graphene_symbol(gamma).evaluate(k)
    eps = graphene_band(gamma, k[0], k[1], sign)
    return 0.5 * np.eye(2) + h / (2.0 * eps)


def graphene_theta(gamma: float, lam: float) -> float:
    """Level angle arccos(sqrt(lam^2 - gamma^2) / 2) in (0, pi/2)."""
    lam_abs = abs(lam)
    top = np.sqrt(gamma**2 + 4.0)
    if lam_abs < gamma or lam_abs > top:
        raise LambdaOutOfBandError(f"|lambda| = {lam_abs} outside [{gamma}, {top}]")
    if lam_abs == gamma or lam_abs == top:
        raise ExtremeLevelError("level sits at a band edge; lines degenerate")
    return float(np.arccos(np.sqrt(lam_abs**2 - gamma**2) / 2.0))


@dataclass(frozen=True)
class AnalyticSegment:
    """Affine chord tau -> k(tau) of the level set inside [0, 2 pi]^2."""

    name: str
    start: np.ndarray
    step: np.ndarray
    mass: float  # share of the fiber measure carried by this chord

    def point(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.start + np.outer(tau, self.step) if tau.ndim else self.start + tau * self.step

    def points(self, taus) -> np.ndarray:
        taus = np.asarray(taus, dtype=float)
        return self.start[None, :] + taus[:, None] * self.step[None, :]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.step))


@dataclass(frozen=True)
class GrapheneFermiGeometry:
    gamma: float
    lam: float
    theta: float
    segments: tuple

    def segment(self, name: str) -> AnalyticSegment:
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)


def graphene_fermi_analytic(gamma: float, lam: float) -> GrapheneFermiGeometry:
    """The four level-set chords of the square, with their fiber masses.

    Chord geometry: L± are k2 = k1 ± 2 theta and G± are k2 = k1 ± 2(pi - theta),
    clipped to [0, 2 pi]^2.  On the torus L+ continues into G- (and L- into
    G+), forming two closed geodesics.  The gradient of the band is constant
    along the level set, so the disintegration of the Haar measure weights
    each chord by arclength: mass (pi - theta)/(2 pi) for L±, theta/(2 pi)
    for G±.
    """
    if gamma <= 0:
        raise NonPositiveGammaError(f"gamma = {gamma}")
    theta = graphene_theta(gamma, lam)
    a = TWO_PI - 2 * theta  # k1-extent of the L chords
    b = 2 * theta           # k1-extent of the G chords
    mass_l = (np.pi - theta) / TWO_PI
    mass_g = theta / TWO_PI
    segments = (
        AnalyticSegment("L+", np.array([0.0, 2 * theta]), np.array([a, a]), mass_l),
        AnalyticSegment("L-", np.array([2 * theta, 0.0]), np.array([a, a]), mass_l),
        AnalyticSegment("G+", np.array([0.0, TWO_PI - 2 * theta]), np.array([b, b]), mass_g),
        AnalyticSegment("G-", np.array([TWO_PI - 2 * theta, 0.0]), np.array([b, b]), mass_g),
    )
    return GrapheneFermiGeometry(gamma=gamma, lam=lam, theta=theta, segments=segments)


def _observable_fn(a):
    if isinstance(a, HermitianSymbol):
        return a.evaluate
    if callable(a):
        return lambda k: np.asarray(a(k), dtype=complex)
    const = np.asarray(a, dtype=complex)
    return lambda k: const


def graphene_state_analytic(gamma: float, lam: float, observable,
                            tol: float = 1e-10) -> complex:
    """Adaptive four-chord quadrature of the level-set eigenstate functional.

    Integrates Tr(P_band(k(tau)) A(k(tau))) along each analytic chord with
    Gauss-Kronrod refinement and combines the chords with their arclength
    masses.  Serves as the high-accuracy oracle for the grid pipeline.
    """
    geom = graphene_fermi_analytic(gamma, lam)
    sign = +1 if lam > 0 else -1
    ev = _observable_fn(observable)

    def chord_integral(seg: AnalyticSegment) -> complex:
        def integrand(tau, part):
            k = seg.start + tau * seg.step
            p = graphene_projection(gamma, k, sign)
            val = np.trace(p @ ev(k))
            return val.real if part == 0 else val.imag

        re, _ = scipy.integrate.quad(integrand, 0.0, 1.0, args=(0,),
                                     epsabs=tol, epsrel=0.0, limit=200)
        im, _ = scipy.integrate.quad(integrand, 0.0, 1.0, args=(1,),
                                     epsabs=tol, epsrel=0.0, limit=200)
        return complex(re, im)

    return complex(sum(seg.mass * chord_integral(seg) for seg in geom.segments))


def truncated_shift(n: int) -> np.ndarray:
    """N x N compression of the unilateral shift: ones on the first subdiagonal."""
    if n < 2:
        raise ValueError("need N >= 2")
    s = np.zeros((n, n), dtype=complex)
    s[np.arange(1, n), np.arange(n - 1)] = 1.0
    return s


def shift_domain_section(lam: complex, n: int) -> np.ndarray:
    """(N+1) x N section of (shift - lam): the operator restricted to vectors
    supported on the first N coordinates, with its full image retained.

    Unlike the square compression (which is nilpotent and loses the isometry),
    the section preserves ||(s - lam) psi|| exactly, so its smallest singular
    value realizes the lower bound (1 - |lam|) off the unit circle and decays
    to zero on it.
    """
    if n < 2:
        raise ValueError("need N >= 2")
    full = truncated_shift(n + 1) - complex(lam) * np.eye(n + 1)
    return full[:, :n]


def crossing_symbol() -> TrigPolynomialSymbol:
    """Two-band symbol diag(sin(k1), -sin(k2)) / 2 whose sheets meet the
    zero level and each other at isolated points: a local-gap violator."""
    terms = {
        (0, 0): [((1, 0), -0.25j), ((-1, 0), 0.25j)],
        (1, 1): [((0, 1), 0.25j), ((0, -1), -0.25j)],
    }
    return TrigPolynomialSymbol(2, terms, dim=2, name="crossing")


def cosine_sz_symbol() -> TrigPolynomialSymbol:
    """1-D symbol cos(k) sigma_z with a band crossing at k = pi/2."""
    terms = {
        (0, 0): [((1,), 0.5 + 0j), ((-1,), 0.5 + 0j)],
        (1, 1): [((1,), -0.5 + 0j), ((-1,), -0.5 + 0j)],
    }
    return TrigPolynomialSymbol(2, terms, dim=1, name="cos-sz")


def trig_band_function(gamma: float):
    """Scalar profile f(x) = sqrt(gamma^2 + 4 cos^2(x/2)) on [-2 pi, 2 pi]
    and its derivative, the 1-D cross-section of the two-band model."""
    if gamma <= 0:
        raise NonPositiveGammaError(f"gamma = {gamma}")

    def f(x):
        return float(np.sqrt(gamma**2 + 4.0 * np.cos(x / 2) ** 2))

    def df(x):
        return float(-np.sin(x) / f(x))

    return f, df
