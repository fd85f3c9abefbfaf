import numpy as np
import pytest

from fermi_spectra import models
from fermi_spectra.disintegration import (
    GridFunction1D,
    chord_interval,
    compose_expectations,
    disintegrate_1d,
    expectation_operator,
    linear_difference_density,
    linear_difference_expectation,
    linear_difference_fiber,
    linear_difference_pushforward,
    preimages,
    pushforward_1d,
    verify_fubini,
)
from fermi_spectra.errors import (
    CriticalValueError,
    EmptyFiberError,
    RangeMismatchError,
)

TWO_PI = 2 * np.pi


def identity_fn(n=512):
    return GridFunction1D.from_callable(lambda x: x, 0.0, 1.0, n, df=lambda x: 1.0)


def square_fn(n=512):
    return GridFunction1D.from_callable(lambda x: x * x, -1.0, 1.0, n,
                                        df=lambda x: 2.0 * x)


def trig_fn(gamma=1.0, n=2048):
    f, df = models.trig_band_function(gamma)
    return GridFunction1D.from_callable(f, -TWO_PI, TWO_PI, n, df=df)


def random_smooth(seed, modes=4):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(modes)
    b = rng.standard_normal(modes)

    def psi(x):
        t = 0.0
        for m in range(modes):
            t += a[m] * np.cos((m + 1) * x) + b[m] * np.sin((m + 1) * x)
        return t

    return psi


class TestPushforward:
    def test_identity_density_is_flat(self):
        rho = pushforward_1d(identity_fn(), grid_size=256)
        assert np.abs(rho.density - 1.0).max() <= 1e-9
        assert abs(rho.total_mass - 1.0) <= 1e-10

    def test_square_density_closed_form(self):
        rho = pushforward_1d(square_fn(), grid_size=256)
        expected = 1.0 / (2.0 * np.sqrt(rho.grid))
        assert np.abs(rho.density / expected - 1.0).max() <= 1e-9

    def test_square_against_monte_carlo(self):
        rng = np.random.default_rng(7)
        samples = rng.uniform(-1, 1, size=1_000_000) ** 2
        edges = np.linspace(0.0, 1.0, 17)
        counts, _ = np.histogram(samples, bins=edges)
        mc_masses = counts / counts.sum()
        rho = pushforward_1d(square_fn(), grid_size=16)
        tv = 0.5 * np.abs(mc_masses - rho.cell_masses).sum()
        assert tv <= 1e-2

    @pytest.mark.parametrize("factory,n", [
        (identity_fn, 128), (square_fn, 256), (trig_fn, 512),
    ])
    def test_mass_is_one(self, factory, n):
        rho = pushforward_1d(factory(), grid_size=n)
        assert abs(rho.total_mass - 1.0) <= max(1e-8, 10.0 / n**2)
        assert rho.density.min() >= -1e-12

    def test_linear_difference_triangle(self):
        ell = 1.0
        rho = linear_difference_pushforward(ell, grid_size=512)
        expected = (ell - np.abs(rho.grid)) / ell**2
        assert np.abs(rho.density - expected).max() <= 1e-6
        assert abs(rho.total_mass - 1.0) <= 1e-12


class TestExpectation:
    def test_identity_map_returns_psi(self):
        f = identity_fn()
        psi = random_smooth(1)
        e = expectation_operator(f, psi, grid_size=64)
        for y in np.linspace(0.05, 0.95, 7):
            assert abs(e(y) - psi(y)) <= 1e-9

    def test_trig_branch_weights_are_quarter(self):
        f = trig_fn(gamma=1.0)
        for y in (1.3, 2.0, np.sqrt(5) - 0.2):
            fiber = disintegrate_1d(f, y)
            w = np.asarray([wt for _, wt in fiber.atoms])
            assert w.size == 4
            assert np.abs(w - 0.25).max() <= 1e-10

    def test_square_odd_function_averages_to_zero(self):
        f = square_fn()
        e = expectation_operator(f, lambda x: x, grid_size=64)
        for y in (0.1, 0.25, 0.7):
            assert abs(e(y)) <= 1e-8

    def test_single_branch_weight_is_one(self):
        f = GridFunction1D.from_callable(lambda x: 2 * x, 0.0, 1.0, 128,
                                         df=lambda x: 2.0)
        fiber = disintegrate_1d(f, 0.37)
        assert len(fiber.atoms) == 1
        assert np.isclose(fiber.atoms[0][1], 1.0)
        assert abs(fiber.atoms[0][0] - 0.185) <= 1e-10

    def test_l1_contraction(self):
        from fermi_spectra.disintegration import branch_weights, monotone_pieces

        f = trig_fn(gamma=1.0, n=1024)
        rho = pushforward_1d(f, grid_size=256)
        pieces = monotone_pieces(f)
        fibers = []
        for y in rho.grid:
            xs = preimages(f, y, pieces)
            fibers.append((np.asarray(xs), branch_weights(f, xs)))
        x_dense = np.linspace(-TWO_PI, TWO_PI, 8193)
        for seed in range(100):
            psi = random_smooth(seed)
            lhs = sum(
                m * abs(float((w * psi(xs)).sum()))
                for m, (xs, w) in zip(rho.cell_masses, fibers)
            )
            rhs = np.trapezoid(np.abs(psi(x_dense)), x_dense) / (4 * np.pi)
            assert lhs <= rhs + 1.5e-4


class TestFibers:
    def test_trig_atoms_positions(self):
        gamma, y = 1.0, 2.0
        f = trig_fn(gamma)
        x_star = 2 * np.arccos(np.sqrt(y**2 - gamma**2) / 2)
        fiber = disintegrate_1d(f, y)
        got = sorted(x for x, _ in fiber.atoms)
        want = sorted([x_star, -x_star, TWO_PI - x_star, -(TWO_PI - x_star)])
        assert np.allclose(got, want, atol=1e-9)

    def test_identity_single_atom(self):
        fiber = disintegrate_1d(identity_fn(), 0.3)
        assert len(fiber.atoms) == 1
        x, w = fiber.atoms[0]
        assert abs(x - 0.3) <= 1e-10 and w == 1.0

    def test_square_symmetric_atoms(self):
        fiber = disintegrate_1d(square_fn(), 0.25)
        xs = sorted(x for x, _ in fiber.atoms)
        ws = [w for _, w in fiber.atoms]
        assert np.allclose(xs, [-0.5, 0.5], atol=1e-10)
        assert np.allclose(ws, [0.5, 0.5], atol=1e-12)

    def test_critical_value_rejected(self):
        with pytest.raises(CriticalValueError):
            disintegrate_1d(square_fn(), 0.0)

    def test_empty_fiber_outside_range(self):
        with pytest.raises(EmptyFiberError):
            disintegrate_1d(square_fn(), 2.0)

    def test_linear_difference_fiber_uniform_chord(self):
        fiber = linear_difference_fiber(1.0, 0.25, nodes=64)
        w = np.asarray([wt for _, wt in fiber.atoms])
        assert fiber.kind == "curve"
        assert np.allclose(w, 1.0 / 64)
        lo, hi = chord_interval(1.0, 0.25)
        assert (lo, hi) == (0.0, 0.75)
        for p, _ in fiber.atoms:
            assert abs(p[1] - p[0] - 0.25) <= 1e-12


class TestComposition:
    def test_identity_outer_map(self):
        f = trig_fn(1.0, n=512)
        ymin, ymax = 1.0, np.sqrt(5.0)
        g = GridFunction1D.from_callable(lambda y: y, ymin - 0.1, ymax + 0.1,
                                         64, df=lambda y: 1.0)
        defect = compose_expectations(f, g, random_smooth(3), grid_size=64)
        assert defect <= 1e-9

    def test_scaling_then_square(self):
        f = GridFunction1D.from_callable(lambda x: 2 * x, 0.1, 1.0, 256,
                                         df=lambda x: 2.0)
        g = GridFunction1D.from_callable(lambda y: y * y, 0.0, 2.5, 256,
                                         df=lambda y: 2.0 * y)
        defect = compose_expectations(f, g, random_smooth(4), grid_size=64)
        assert defect <= 1e-8

    def test_range_mismatch_rejected(self):
        f = square_fn()  # range [0, 1]
        g = GridFunction1D.from_callable(lambda y: y, 0.2, 0.8, 64,
                                         df=lambda y: 1.0)
        with pytest.raises(RangeMismatchError):
            compose_expectations(f, g, random_smooth(5))

    def test_two_band_profile_factorization(self):
        """Composing the chord average over k1 - k2 with the 1-D profile
        reproduces the analytic four-segment average on the level set."""
        gamma, lam = 1.0, 2.0

        def psi2(k1, k2):
            return (np.cos(k1) + 0.3 * np.sin(k2)
                    + 0.2 * np.cos(k1 + k2) + 0.1 * np.sin(k1 - 2 * k2))

        # inner stage: average over the chords of g(k) = k1 - k2
        def chord_avg(y):
            return linear_difference_expectation(psi2, TWO_PI, y, quad_nodes=96)

        f = trig_fn(gamma, n=2048)
        triangle = lambda y: float(linear_difference_density(TWO_PI, y))
        e_f = expectation_operator(f, chord_avg, grid_size=8, weight=triangle)
        composed = e_f(lam)

        geom = models.graphene_fermi_analytic(gamma, lam)
        t, w = np.polynomial.legendre.leggauss(96)
        taus = 0.5 * (t + 1.0)
        analytic = 0.0
        for seg in geom.segments:
            pts = seg.points(taus)
            vals = psi2(pts[:, 0], pts[:, 1])
            analytic += seg.mass * float((w * vals).sum() * 0.5)
        assert abs(composed - analytic) <= 1e-6


class TestFubini:
    def test_constant_function_total_mass(self):
        f = trig_fn(1.0, n=512)
        assert verify_fubini(f, lambda x: 1.0, grid_size=512) <= 1e-10

    def test_smooth_function_trig(self):
        f = trig_fn(1.0, n=1024)
        psi = lambda x: x + 0.3 * x * x
        assert verify_fubini(f, psi, grid_size=4096) <= 1e-6

    def test_product_space_projection(self):
        """Fibers delta_x1 x mu2 of the coordinate projection reproduce the
        double integral."""
        n = 401
        x1 = np.linspace(0, 1, n)
        x2 = np.linspace(0, 1, n)
        xx1, xx2 = np.meshgrid(x1, x2, indexing="ij")
        psi = np.cos(3 * xx1) * (1 + 0.5 * np.sin(2 * xx2))
        lhs = np.trapezoid(np.trapezoid(psi, x2, axis=1), x1)
        fiber_avgs = np.trapezoid(psi, x2, axis=1)  # E_psi(x1) over each fiber
        rhs = np.trapezoid(fiber_avgs, x1)          # against nu = mu1
        assert abs(lhs - rhs) <= 1e-12


def test_commutative_integral_state_regression():
    """The uniform integral state on [0, 1] is dynamically inert for the
    coordinate function but fails the quadratic eigenstate criterion:
    omega(xi) = 1/2, omega(xi^2) = 1/3 != omega(xi)/2."""
    x = np.linspace(0.0, 1.0, 4001)
    weights = np.gradient(x)  # trapezoid-equivalent on the uniform grid

    def omega(g):
        return float(np.trapezoid(g, x))

    xi = x
    assert abs(omega(xi) - 0.5) <= 1e-10
    assert abs(omega(xi**2) - 1.0 / 3.0) <= 1e-6
    assert abs(omega(xi**2) - 0.5 * omega(xi)) > 1 / 12 - 1e-6
    lam = omega(xi)
    quad_defect = omega((xi - lam) ** 2)
    assert abs(quad_defect - 1.0 / 12.0) <= 1e-6
    # pointwise multiplication commutes: the derivation vanishes identically
    probe = np.sin(5 * x)
    assert np.abs(xi * probe - probe * xi).max() == 0.0
