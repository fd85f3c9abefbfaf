"""Numerical disintegration of measures along real functions: pushforward
densities, branch-weighted expectation operators, atomic fiber measures and
the composition rule.

The base measure is always the normalized Lebesgue measure on the domain
interval (optionally reweighted by an explicit density); fibers at regular
values are convex combinations of Dirac atoms on the preimage set with
weights proportional to weight/|f'|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    CriticalValueError,
    EmptyFiberError,
    RangeMismatchError,
    UnresolvedCriticalPointsError,
)

BISECT_TOL = 1e-12
CRITICAL_OVERSAMPLE = 8


@dataclass
class GridFunction1D:
    """Scalar function on [a, b] carried by uniform grid samples.

    An exact evaluator (`func`) and derivative (`dfunc`) may be attached;
    when absent, evaluation falls back to linear interpolation of the
    samples and the derivative to central differences.
    """

    a: float
    b: float
    samples: np.ndarray
    derivative_samples: Optional[np.ndarray] = None
    func: Optional[Callable] = None
    dfunc: Optional[Callable] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("need at least two samples")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if not self.b > self.a:
            raise ValueError("empty domain")

    @classmethod
    def from_callable(cls, f, a: float, b: float, n: int = 1024, df=None):
        x = np.linspace(a, b, n)
        samples = np.asarray([float(f(t)) for t in x])
        dsamples = None if df is None else np.asarray([float(df(t)) for t in x])
        return cls(a=a, b=b, samples=samples, derivative_samples=dsamples,
                   func=f, dfunc=df)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.samples.size)

    def __call__(self, x):
        if self.func is not None:
            return self.func(x)
        return np.interp(x, self.grid, self.samples)

    def derivative(self, x):
        if self.dfunc is not None:
            return self.dfunc(x)
        if self.derivative_samples is not None:
            return np.interp(x, self.grid, self.derivative_samples)
        d = np.gradient(self.samples, self.grid)
        return np.interp(x, self.grid, d)


def _bisect(f, lo: float, hi: float, flo: float, tol: float = BISECT_TOL):
    """Root of f on [lo, hi] assuming a sign change, to absolute x-tolerance."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = float(f(mid))
        if fm == 0.0 or hi - lo <= tol:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_points(f: GridFunction1D) -> list[float]:
    """Zeros of f' located by sign-change bracketing on the sample grid.

    Each grid cell is oversampled to catch derivative sign changes that a
    single cell would hide; more than one change per cell is rejected.
    """
    x = f.grid
    crit: list[float] = []
    for i in range(x.size - 1):
        xs = np.linspace(x[i], x[i + 1], CRITICAL_OVERSAMPLE + 1)
        ds = np.asarray([float(f.derivative(t)) for t in xs])
        signs = np.sign(ds)
        changes = [
            j for j in range(len(xs) - 1)
            if signs[j] != 0 and signs[j + 1] != 0 and signs[j] != signs[j + 1]
        ]
        if len(changes) > 1:
            raise UnresolvedCriticalPointsError(
                f"multiple derivative sign changes in cell [{x[i]}, {x[i+1]}]"
            )
        for j in changes:
            root = _bisect(f.derivative, xs[j], xs[j + 1], ds[j])
            crit.append(root)
        # exact zero landed on a subsample node
        for j in range(1, len(xs) - 1):
            if signs[j] == 0:
                crit.append(float(xs[j]))
    out: list[float] = []
    for c in sorted(crit):
        if not out or c - out[-1] > 1e-9 * (f.b - f.a):
            out.append(c)
    return out


def monotone_pieces(f: GridFunction1D) -> list[tuple[float, float]]:
    cuts = [f.a] + [c for c in critical_points(f) if f.a < c < f.b] + [f.b]
    return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]


def function_range(f: GridFunction1D) -> tuple[float, float]:
    ends = [f.a, f.b] + critical_points(f)
    vals = [float(f(t)) for t in ends]
    return min(vals), max(vals)


def preimages(f: GridFunction1D, y: float,
              pieces: Optional[list] = None) -> list[float]:
    """All solutions of f(x) = y, one per monotone piece, by bisection.

    Values touching a piece endpoint within a tiny tolerance count as
    roots there, so extremal levels resolve to the critical points instead
    of silently falling outside the range.
    """
    if pieces is None:
        pieces = monotone_pieces(f)
    roots: list[float] = []
    for lo, hi in pieces:
        flo, fhi = float(f(lo)) - y, float(f(hi)) - y
        tol_y = 1e-11 * max(1.0, abs(float(f(lo))), abs(float(f(hi))))
        if abs(flo) <= tol_y:
            roots.append(lo)
            continue
        if abs(fhi) <= tol_y:
            if hi == f.b:
                roots.append(hi)
            continue
        if (flo < 0) != (fhi < 0):
            roots.append(_bisect(lambda t: float(f(t)) - y, lo, hi, flo))
    out: list[float] = []
    for r in sorted(roots):
        if not out or r - out[-1] > 1e-10 * (f.b - f.a):
            out.append(r)
    return out


def branch_weights(f: GridFunction1D, xs: list[float],
                   weight: Optional[Callable] = None) -> np.ndarray:
    """Normalized fiber weights c_x proportional to weight(x)/|f'(x)|."""
    if not xs:
        return np.asarray([])
    inv = []
    for x in xs:
        d = abs(float(f.derivative(x)))
        w = 1.0 if weight is None else float(weight(x))
        inv.append(np.inf if d == 0.0 else w / d)
    inv = np.asarray(inv)
    if np.isinf(inv).any():
        # critical branches absorb all the mass in the limit
        out = np.where(np.isinf(inv), 1.0, 0.0)
        return out / out.sum()
    return inv / inv.sum()


def default_grad_floor(f: GridFunction1D) -> float:
    ymin, ymax = function_range(f)
    span = max(ymax - ymin, np.finfo(float).tiny)
    return 1e-6 * span / (f.b - f.a)


@dataclass(frozen=True)
class FiberMeasure:
    """Probability measure on one fiber: Dirac atoms or curve quadrature nodes."""

    level: float
    atoms: tuple
    kind: str = "atomic"

    def __post_init__(self):
        w = np.asarray([a[1] for a in self.atoms], dtype=float)
        if w.size and (w.min() < -1e-12 or abs(w.sum() - 1.0) > 1e-10):
            raise ValueError("fiber weights must form a probability vector")

    def integrate(self, psi) -> float:
        return float(sum(w * float(psi(x)) for x, w in self.atoms))


def disintegrate_1d(f: GridFunction1D, y: float,
                    grad_floor: Optional[float] = None) -> FiberMeasure:
    """Atomic fiber over a regular value y: atoms at the preimages of y
    with the normalized 1/|f'| weights."""
    if grad_floor is None:
        grad_floor = default_grad_floor(f)
    ymin, ymax = function_range(f)
    slack = 1e-9 * max(ymax - ymin, 1.0)
    if y < ymin - slack or y > ymax + slack:
        raise EmptyFiberError(f"{y} outside range [{ymin}, {ymax}]")
    xs = preimages(f, y)
    if not xs:
        raise EmptyFiberError(f"no preimage found for level {y}")
    for x in xs:
        if abs(float(f.derivative(x))) <= grad_floor:
            raise CriticalValueError(f"preimage {x} of level {y} is critical")
    w = branch_weights(f, xs)
    return FiberMeasure(level=y, atoms=tuple(zip(xs, w)), kind="atomic")


@dataclass(frozen=True)
class PushforwardDensity:
    """Absolutely continuous pushforward of the normalized Lebesgue measure.

    `density` is the branch-sum Radon-Nikodym derivative sampled at the
    midpoints of a uniform partition of the range; `cell_masses` are the
    exact masses of the partition cells obtained by inverting each
    monotone branch, so `total_mass` is quadrature-free.
    """

    ymin: float
    ymax: float
    grid: np.ndarray
    density: np.ndarray
    cell_masses: np.ndarray
    total_mass: float


def pushforward_density_at(f: GridFunction1D, y: float,
                           pieces: Optional[list] = None) -> float:
    """rho(y) = (1/(b-a)) sum over branches of 1/|f'(branch preimage)|."""
    xs = preimages(f, y, pieces)
    total = 0.0
    for x in xs:
        d = abs(float(f.derivative(x)))
        if d == 0.0:
            return np.inf
        total += 1.0 / d
    return total / (f.b - f.a)


def pushforward_1d(f: GridFunction1D, grid_size: int = 512) -> PushforwardDensity:
    ymin, ymax = function_range(f)
    if ymax <= ymin:
        raise ValueError("constant function has a degenerate pushforward")
    pieces = monotone_pieces(f)
    edges = np.linspace(ymin, ymax, grid_size + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    density = np.asarray([pushforward_density_at(f, y, pieces) for y in mids])

    # exact cell masses: each monotone branch contributes the length of the
    # preimage of the cell, found by bisecting the branch at the cell edges
    masses = np.zeros(grid_size)
    for lo, hi in pieces:
        flo, fhi = float(f(lo)), float(f(hi))
        sign = 1.0 if fhi >= flo else -1.0
        vmin, vmax = min(flo, fhi), max(flo, fhi)

        def branch_inverse(y, lo=lo, hi=hi, flo=flo, fhi=fhi):
            if y <= min(flo, fhi):
                return lo if flo <= fhi else hi
            if y >= max(flo, fhi):
                return hi if flo <= fhi else lo
            return _bisect(lambda t: float(f(t)) - y, lo, hi, flo - y)

        for j in range(grid_size):
            ylo, yhi = max(edges[j], vmin), min(edges[j + 1], vmax)
            if yhi <= ylo:
                continue
            xa, xb = branch_inverse(ylo), branch_inverse(yhi)
            masses[j] += abs(xb - xa) / (f.b - f.a)

    return PushforwardDensity(
        ymin=ymin, ymax=ymax, grid=mids, density=density,
        cell_masses=masses, total_mass=float(masses.sum()),
    )


def expectation_operator(f: GridFunction1D, psi, grid_size: int = 512,
                         weight: Optional[Callable] = None) -> GridFunction1D:
    """Conditional expectation E_psi on the range of f.

    Returns a grid function whose attached evaluator applies the branch
    formula E_psi(y) = sum c_x psi(x) exactly at any requested level, so
    composing expectation operators incurs no interpolation error.  An L^1
    contraction with respect to the pushforward measure.
    """
    pieces = monotone_pieces(f)
    ymin, ymax = function_range(f)
    psi_eval = psi if callable(psi) else (lambda x: float(np.interp(x, f.grid, psi)))

    def e_at(y):
        xs = preimages(f, y, pieces)
        if not xs:
            raise EmptyFiberError(f"level {y} outside the range of f")
        w = branch_weights(f, xs, weight)
        return float(sum(wi * float(psi_eval(x)) for x, wi in zip(xs, w)))

    # sample just inside the range: the extremes are critical values where
    # branches merge and psi may only have a limit
    pad = 1e-9 * (ymax - ymin)
    ygrid = np.clip(np.linspace(ymin, ymax, grid_size), ymin + pad, ymax - pad)
    samples = np.asarray([e_at(y) for y in ygrid])
    return GridFunction1D(a=ymin, b=ymax, samples=samples, func=e_at)


def compose_expectations(f: GridFunction1D, g: GridFunction1D, psi,
                         grid_size: int = 256) -> float:
    """Sup-norm defect between E^(g o f) and E^g E^f on the common range.

    The outer expectation is taken with respect to the pushforward of the
    inner map (its branch-sum density enters as the base weight), which is
    the measure the composition rule requires.
    """
    fmin, fmax = function_range(f)
    slack = 1e-9 * max(1.0, g.b - g.a)
    if fmin < g.a - slack or fmax > g.b + slack:
        raise RangeMismatchError(
            f"range of f [{fmin}, {fmax}] not contained in domain of g [{g.a}, {g.b}]"
        )

    h = GridFunction1D.from_callable(
        lambda x: float(g(float(f(x)))), f.a, f.b, n=f.samples.size,
        df=lambda x: float(g.derivative(float(f(x)))) * float(f.derivative(x)),
    )
    e_h = expectation_operator(h, psi, grid_size)

    e_f = expectation_operator(f, psi, grid_size)
    g_on_range = GridFunction1D.from_callable(
        g.__call__, fmin, fmax, n=max(g.samples.size, 64), df=g.derivative)
    f_pieces = monotone_pieces(f)
    rho_f = lambda y: pushforward_density_at(f, y, f_pieces)
    e_gf = expectation_operator(g_on_range, e_f, grid_size, weight=rho_f)

    zmin, zmax = function_range(h)
    # compare at interior points; the extreme levels are critical values
    zs = np.linspace(zmin, zmax, grid_size + 1)
    zs = 0.5 * (zs[:-1] + zs[1:])
    defect = 0.0
    for z in zs:
        defect = max(defect, abs(float(e_h(z)) - float(e_gf(z))))
    return defect


def verify_fubini(f: GridFunction1D, psi, grid_size: int = 4096) -> float:
    """|Int psi dmu - Int (Int psi dmu_y) dnu(y)| by grid quadrature.

    The level integral against nu = mu o f^{-1} is evaluated by the
    substitution y = f(x), i.e. as the grid quadrature of E_psi(f(x)); the
    composed integrand is Lipschitz across critical points, so the
    trapezoid rule keeps its second-order accuracy there.
    """
    psi_eval = psi if callable(psi) else (lambda x: float(np.interp(x, f.grid, psi)))
    pieces = monotone_pieces(f)

    # midpoint nodes never coincide with critical points of generic grids,
    # matching the almost-every-level scope of the disintegration
    h = (f.b - f.a) / grid_size
    x = f.a + (np.arange(grid_size) + 0.5) * h
    vals = np.asarray([float(psi_eval(t)) for t in x])
    lhs = float(vals.mean())

    def e_at(y):
        xs = preimages(f, y, pieces)
        w = branch_weights(f, xs)
        return float(sum(wi * float(psi_eval(t)) for t, wi in zip(xs, w)))

    evals = np.asarray([e_at(float(f(t))) for t in x])
    rhs = float(evals.mean())
    return abs(lhs - rhs)


# --- the linear map (x1, x2) -> x2 - x1 on the square [0, ell]^2 ----------

def chord_interval(ell: float, y: float) -> tuple[float, float]:
    """x1-extent of the chord {x2 - x1 = y} inside the square [0, ell]^2."""
    lo, hi = max(0.0, -y), min(ell, ell - y)
    if hi < lo:
        raise EmptyFiberError(f"level {y} outside [-{ell}, {ell}]")
    return lo, hi


def linear_difference_density(ell: float, y) -> np.ndarray:
    """Pushforward density of the normalized square measure under x2 - x1.

    Computed as chord length / ell^2; the triangle profile emerges from the
    clipping, no closed form is assumed.
    """
    y = np.asarray(y, dtype=float)
    lo = np.maximum(0.0, -y)
    hi = np.minimum(ell, ell - y)
    return np.maximum(hi - lo, 0.0) / ell**2


def linear_difference_pushforward(ell: float, grid_size: int = 512) -> PushforwardDensity:
    edges = np.linspace(-ell, ell, grid_size + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    density = linear_difference_density(ell, mids)

    def antiderivative(y):
        # integral of the chord length ell - |y|
        return ell * y - 0.5 * y * abs(y)

    masses = np.asarray([
        (antiderivative(edges[j + 1]) - antiderivative(edges[j])) / ell**2
        for j in range(grid_size)
    ])
    return PushforwardDensity(ymin=-ell, ymax=ell, grid=mids, density=density,
                              cell_masses=masses, total_mass=float(masses.sum()))


def linear_difference_fiber(ell: float, y: float, nodes: int = 128) -> FiberMeasure:
    """Uniform fiber on the chord {x2 = x1 + y}, as curve quadrature nodes."""
    lo, hi = chord_interval(ell, y)
    if hi - lo <= 0:
        raise CriticalValueError(f"degenerate chord at level {y}")
    s = lo + (np.arange(nodes) + 0.5) * (hi - lo) / nodes
    pts = np.column_stack([s, s + y])
    w = np.full(nodes, 1.0 / nodes)
    return FiberMeasure(level=y, atoms=tuple((p, wi) for p, wi in zip(pts, w)),
                        kind="curve")


def linear_difference_expectation(psi2, ell: float, y: float,
                                  quad_nodes: int = 64) -> float:
    """Chord average (1/(ell-|y|)) Int psi(s, s+y) ds by Gauss-Legendre.

    At the extreme levels +-ell the chord shrinks to a corner and the
    average degenerates to the point value there.
    """
    lo, hi = chord_interval(ell, y)
    if hi - lo <= 1e-12 * ell:
        return float(psi2(lo, lo + y))
    t, w = np.polynomial.legendre.leggauss(quad_nodes)
    s = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
    vals = np.asarray([float(psi2(si, si + y)) for si in s])
    return float((w * vals).sum() * 0.5)
