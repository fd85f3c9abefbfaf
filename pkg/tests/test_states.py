import numpy as np
import pytest

from conftest import random_ginibre, random_hermitian, random_unitary
from fermi_spectra.errors import (
    NotEigenstateError,
    NotNormalError,
    NotProjectionError,
    NullWeightError,
)
from fermi_spectra.hermitian import eig_hermitian, plateau_bump
from fermi_spectra.states import (
    DensityState,
    check_eigenstate,
    check_functional_calculus,
    check_normal_adjoint,
    compress_state,
    default_probes,
    eigenvector_state,
    gns,
    independence_gram,
    state_distance,
)


def hermitian_with_eigenpair(n, lam, seed):
    """Random Hermitian with a prescribed eigenvalue attached to column 0."""
    rng = np.random.default_rng(seed)
    u = random_unitary(n, seed + 1)
    vals = np.concatenate([[lam], rng.uniform(lam + 1, lam + 3, size=n - 1)])
    h = (u * vals) @ u.conj().T
    return (h + h.conj().T) / 2, u[:, 0]


class TestCheckEigenstate:
    def test_eigenvector_state_passes(self):
        h, v = hermitian_with_eigenpair(4, 2.0, seed=0)
        rep = check_eigenstate(DensityState.from_vector(v), h, tol=1e-10)
        assert rep.verdict
        assert abs(rep.lam - 2.0) <= 1e-9
        assert rep.quadratic_defect <= 1e-14
        assert rep.max_linear_defect <= 1e-7

    def test_mixed_state_fails_with_closed_form_defect(self):
        lam1, lam2 = 1.0, 3.0
        h = np.diag([lam1, lam2]).astype(complex)
        rho = DensityState(0.5 * np.diag([1.0, 0.0]) + 0.5 * np.diag([0.0, 1.0]))
        rep = check_eigenstate(rho, h, tol=1e-10)
        assert not rep.verdict
        lam_bar = (lam1 + lam2) / 2
        expected = 0.5 * (lam1 - lam_bar) ** 2 + 0.5 * (lam2 - lam_bar) ** 2
        assert np.isclose(rep.quadratic_defect, expected, atol=1e-12)
        assert np.isclose(rep.lam.real, lam_bar)

    def test_scalar_element_always_passes(self):
        c = 0.7 - 0.2j
        rho = DensityState(random_hermitian(3, 5) @ np.zeros((3, 3)) + np.eye(3) / 3)
        rep = check_eigenstate(rho, c * np.eye(3), tol=1e-12)
        assert rep.verdict
        assert abs(rep.lam - c) <= 1e-14

    def test_eigenvalue_is_expectation_exactly(self):
        h = random_hermitian(4, 9)
        rho = DensityState.from_vector(np.ones(4))
        rep = check_eigenstate(rho, h)
        assert rep.lam == rho.expect(h)


class TestNormalAdjoint:
    def test_hermitian_case(self):
        h, v = hermitian_with_eigenpair(3, -1.0, seed=2)
        assert check_normal_adjoint(DensityState.from_vector(v), h)

    def test_diagonal_normal(self):
        a = np.diag([1j, -1j])
        omega = DensityState.from_vector([1.0, 0.0])
        assert check_normal_adjoint(omega, a)
        assert abs(check_eigenstate(omega, a).lam - 1j) <= 1e-14
        assert abs(check_eigenstate(omega, a.conj().T).lam + 1j) <= 1e-14

    def test_random_normal(self):
        rng = np.random.default_rng(11)
        u = random_unitary(4, 13)
        vals = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        a = (u * vals) @ u.conj().T
        omega = DensityState.from_vector(u[:, 2])
        assert check_normal_adjoint(omega, a)

    def test_rejects_non_normal(self):
        with pytest.raises(NotNormalError):
            check_normal_adjoint(DensityState.from_vector([1, 0]),
                                 np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestFunctionalCalculus:
    def test_squaring_diagonal(self):
        a = np.diag([1.0, 2.0]).astype(complex)
        omega = DensityState.from_vector([0.0, 1.0])
        assert check_functional_calculus(omega, a, lambda t: t * t)

    def test_bump_on_gapped_hamiltonian(self):
        h, v = hermitian_with_eigenpair(4, 0.0, seed=21)  # others in [1, 3]
        omega = DensityState.from_vector(v)
        bump = plateau_bump(0.0, 1.0)
        assert check_functional_calculus(omega, h, bump)

    @pytest.mark.parametrize("seed", range(3))
    def test_polynomial_transport(self, seed):
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-1, 1, size=4)
        p = np.polynomial.Polynomial(coeffs)
        h = random_hermitian(4, seed + 40)
        dec = eig_hermitian(h)
        lam = float(dec.eigenvalues[1])
        omega = DensityState.from_vector(dec.eigenvectors[:, 1])
        assert check_functional_calculus(omega, h, p)
        from fermi_spectra.hermitian import apply_function
        rep = check_eigenstate(omega, apply_function(dec, p))
        assert abs(rep.lam - p(lam)) <= 1e-10

    def test_requires_eigenstate(self):
        with pytest.raises(NotEigenstateError):
            check_functional_calculus(
                DensityState(np.eye(2) / 2), np.diag([0.0, 1.0]), lambda t: t)


class TestGns:
    def test_pure_state_recovers_defining_representation(self):
        omega = DensityState.from_vector([1.0, 0.0])
        rep = gns(omega)
        assert rep.gns_dim == 2
        for seed in range(5):
            a = random_ginibre(2, seed)
            pi_a = rep.represent(a)
            assert np.allclose(np.sort_complex(np.linalg.eigvals(pi_a)),
                               np.sort_complex(np.linalg.eigvals(a)), atol=1e-9)

    def test_star_homomorphism_on_probes(self):
        rng = np.random.default_rng(5)
        rho = random_hermitian(3, 6)
        rho = rho @ rho.conj().T
        omega = DensityState(rho / np.trace(rho).real)
        rep = gns(omega)
        for seed in range(5):
            a, b = random_ginibre(3, seed), random_ginibre(3, seed + 100)
            assert np.abs(rep.represent(a @ b)
                          - rep.represent(a) @ rep.represent(b)).max() <= 1e-9
            assert np.abs(rep.represent(a.conj().T)
                          - rep.represent(a).conj().T).max() <= 1e-10

    def test_maximally_mixed_dimension(self):
        rep = gns(DensityState.maximally_mixed(2))
        assert rep.gns_dim == 4
        # oracle: rank of the Gram matrix of the matrix units
        rho = np.eye(2) / 2
        units = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
        for idx, (i, j) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            units[idx][i, j] = 1.0
        gram = np.array([[np.trace(rho @ x.conj().T @ y) for y in units]
                         for x in units])
        assert np.linalg.matrix_rank(gram, tol=1e-10) == 4

    def test_gns_dim_is_n_times_rank(self):
        v = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        w = np.array([0.0, 0.0, 1.0])
        rho = 0.6 * np.outer(v, v.conj()) + 0.4 * np.outer(w, w.conj())
        rep = gns(DensityState(rho))
        assert rep.gns_dim == 3 * 2

    def test_expectation_reconstruction(self):
        rho = random_hermitian(4, 31)
        rho = rho @ rho.conj().T
        omega = DensityState(rho / np.trace(rho).real)
        rep = gns(omega)
        for seed in range(100):
            a = random_ginibre(4, seed)
            assert abs(rep.vector_expectation(a) - omega.expect(a)) <= 1e-10

    def test_eigenstate_gives_gns_eigenvector(self):
        h, v = hermitian_with_eigenpair(3, 1.5, seed=8)
        omega = DensityState.from_vector(v)
        rep = gns(omega)
        psi = rep.cyclic_vector
        assert np.linalg.norm(rep.represent(h) @ psi - 1.5 * psi) <= 1e-10


class TestCompressState:
    def test_supported_state_is_fixed(self):
        p = np.diag([1.0, 1.0, 0.0]).astype(complex)
        rho = np.diag([0.3, 0.7, 0.0]).astype(complex)
        omega = DensityState(rho)
        omega_p = compress_state(omega, p)
        # the three equivalent conditions hold together
        assert state_distance(omega, omega_p) <= 1e-10
        assert abs(omega.expect(p) - 1.0) <= 1e-10
        assert check_eigenstate(omega, p, tol=1e-10).verdict

    def test_mixed_state_compresses_to_pure(self):
        omega = DensityState.maximally_mixed(2)
        p = np.diag([1.0, 0.0]).astype(complex)
        omega_p = compress_state(omega, p)
        assert np.allclose(omega_p.rho, np.diag([1.0, 0.0]), atol=1e-12)
        assert np.isclose(omega.expect(p).real, 0.5)
        assert state_distance(omega, omega_p) > 0.4

    def test_identity_projection_is_noop(self):
        omega = DensityState.from_vector([1.0, 2.0, 1.0])
        omega_p = compress_state(omega, np.eye(3))
        assert state_distance(omega, omega_p) <= 1e-12

    def test_rejects_non_projection(self):
        with pytest.raises(NotProjectionError):
            compress_state(DensityState.maximally_mixed(2), 0.5 * np.eye(2))

    def test_rejects_null_weight(self):
        omega = DensityState.from_vector([1.0, 0.0])
        with pytest.raises(NullWeightError):
            compress_state(omega, np.diag([0.0, 1.0]).astype(complex))


class TestIndependenceAndDistance:
    def test_orthogonal_eigenstates_gram(self):
        states = [eigenvector_state(np.diag([1.0, 2.0, 3.0]), i) for i in range(3)]
        assert np.isclose(independence_gram(states), 1.0, atol=1e-12)

    def test_duplicate_state_rank_deficient(self):
        s = eigenvector_state(np.diag([1.0, 2.0]), 0)
        assert independence_gram([s, s]) <= 1e-12

    def test_random_eigenstates_well_separated(self):
        h = random_hermitian(5, 77)
        states = [eigenvector_state(h, i) for i in (0, 2, 4)]
        assert independence_gram(states) > 0.5

    def test_distance_two_for_distinct_eigenstates(self):
        h = random_hermitian(4, 15)
        s0, s1 = eigenvector_state(h, 0), eigenvector_state(h, 3)
        assert abs(state_distance(s0, s1) - 2.0) <= 1e-10

    def test_distance_zero_for_identical(self):
        s = eigenvector_state(random_hermitian(3, 4), 1)
        assert state_distance(s, s) == 0.0

    def test_distance_half_mixed(self):
        s1 = DensityState(np.diag([1.0, 0.0]).astype(complex))
        s2 = DensityState(np.diag([0.5, 0.5]).astype(complex))
        assert np.isclose(state_distance(s1, s2), 1.0, atol=1e-12)


def test_quadratic_linear_verdict_agreement():
    """The quadratic certificate and the probe linear defects agree on 1000
    seeded (state, element) pairs on Mat_4: exact eigenvector states pass
    both, generic states fail both."""
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        h = random_hermitian(4, 10_000 + trial)
        if trial % 2 == 0:
            dec = eig_hermitian(h)
            omega = DensityState.from_vector(dec.eigenvectors[:, trial % 4])
        else:
            g = random_ginibre(4, 20_000 + trial)
            rho = g @ g.conj().T
            omega = DensityState(rho / np.trace(rho).real)
        probes = default_probes(h, seed=trial, count=50)
        rep = check_eigenstate(omega, h, tol=1e-12, probes=probes)
        quad_pass = rep.quadratic_defect <= 1e-12
        lin_pass = rep.max_linear_defect <= 1e-6
        assert quad_pass == lin_pass == rep.verdict


def test_gapped_projection_eigenstate():
    """Convex mixtures of eigenvector states from an isolated spectral
    cluster are eigenstates of the cluster projection with eigenvalue 1."""
    rng = np.random.default_rng(99)
    u = random_unitary(5, 100)
    vals = np.array([0.0, 0.01, 0.02, 3.0, 3.5])
    h = (u * vals) @ u.conj().T
    h = (h + h.conj().T) / 2
    dec = eig_hermitian(h)
    from fermi_spectra.hermitian import spectral_projection
    p_star = spectral_projection(dec, 0.01, 0.05)
    for seed in range(20):
        w = np.random.default_rng(seed).dirichlet(np.ones(3))
        rho = sum(wi * np.outer(dec.eigenvectors[:, i],
                                dec.eigenvectors[:, i].conj())
                  for i, wi in enumerate(w))
        rep = check_eigenstate(DensityState(rho), p_star, tol=1e-10)
        assert rep.verdict
        assert abs(rep.lam - 1.0) <= 1e-10


def test_purity_classifier():
    assert DensityState.from_vector([1.0, 1.0]).is_pure()
    assert not DensityState.maximally_mixed(2).is_pure()
