import dataclasses
import math

import numpy as np
import pytest
import scipy.linalg

from hybrid_lattice import ed
from hybrid_lattice.errors import InvalidArgumentError, ResourceLimitError
from hybrid_lattice.lattice import (
    BondSpec,
    ChainParams,
    LatticeSpec,
    SiteSpec,
    build_chain,
    local_operator,
    polariton_vector,
    preset_params,
)
from hybrid_lattice.mps import TruncationPolicy
from hybrid_lattice.polariton import JCParams
from hybrid_lattice.tebd import SimulationConfig

V = 0.01


def fig2_like(L, g=4 * V):
    jc = JCParams(1.0, 1.0, g)
    return build_chain(ChainParams(L, jc, V, omega_A=1.0 - g, lam=-V / math.sqrt(2)))


def decoupled_units(g=0.04, omega=1.0, omega0=1.0):
    site = SiteSpec.jc_unit(JCParams(omega, omega0, g))
    return LatticeSpec((site, site), (BondSpec(0, 1, 0.0),))


def tls_profile(state):
    return np.array([
        ed.expectation_local(state, j, local_operator(s, "tls_number")).real
        for j, s in enumerate(state.lattice.sites)
    ])


class TestHamiltonian:
    def test_dimension(self):
        lat = fig2_like(4)
        assert ed.full_dimension(lat) == 432
        assert ed.build_dense_hamiltonian(lat).shape == (432, 432)

    def test_hermitian_and_conserving(self):
        lat = fig2_like(4)
        h = ed.build_dense_hamiltonian(lat)
        n = ed.total_excitation_operator(lat)
        assert np.max(np.abs(h - h.conj().T)) <= 1e-12
        assert np.max(np.abs(h @ n - n @ h)) <= 1e-10

    def test_resonant_unit_spectrum(self):
        lat = decoupled_units()
        assert sorted(np.linalg.eigvalsh(ed.build_dense_hamiltonian(lat, sector=1))) == pytest.approx(
            [0.96, 0.96, 1.04, 1.04], abs=1e-10
        )
        evals = np.linalg.eigvalsh(ed.build_dense_hamiltonian(lat))
        assert np.min(np.abs(evals - 0.96)) <= 1e-12 and np.min(np.abs(evals - 1.04)) <= 1e-12

    def test_cap(self):
        with pytest.raises(ResourceLimitError):
            ed.build_dense_hamiltonian(fig2_like(5), cap=1000)

    def test_sector_matches_full(self):
        lat = fig2_like(3)
        full = np.linalg.eigvalsh(ed.build_dense_hamiltonian(lat))
        for n_exc in (0, 1, 2):
            basis = ed.sector_basis(lat, n_exc)
            part = np.linalg.eigvalsh(ed.build_dense_hamiltonian(lat, sector=n_exc))
            assert len(part) == len(basis)
            for e in part:
                assert np.min(np.abs(full - e)) <= 1e-10

    def test_sector_sizes(self):
        lat = fig2_like(8)
        # one excitation: activation qubit, or a TLS or a photon in one of 7 units
        assert len(ed.sector_basis(lat, 1)) == 15
        assert len(ed.sector_basis(lat, 0)) == 1

    def test_reconstruction(self):
        lat = fig2_like(3)
        h = ed.build_dense_hamiltonian(lat)
        dec = ed.diagonalize(lat)
        assert dec.reconstruction_residual(h) <= 1e-9 * np.max(np.abs(h))
        assert np.all(np.diff(dec.eigenvalues) >= 0)


class TestEvolution:
    def test_time_zero(self):
        lat = fig2_like(3)
        dec = ed.diagonalize(lat)
        psi = ed.initial_dense_state(lat, "activation-excited")
        assert np.allclose(ed.evolve_exact(psi, 0.0, dec).vector, psi.vector, atol=1e-14)

    def test_eigenstate_is_stationary(self):
        lat = fig2_like(3)
        dec = ed.diagonalize(lat)
        psi = ed.DenseState(dec.eigenvectors[:, 17].copy(), lat)
        later = ed.evolve_exact(psi, 123.4, dec)
        assert np.max(np.abs(tls_profile(later) - tls_profile(psi))) <= 1e-12

    def test_two_site_against_expm(self):
        lat = fig2_like(2)
        h = ed.build_dense_hamiltonian(lat)
        dec = ed.diagonalize(lat)
        psi = ed.initial_dense_state(lat, "activation-excited")
        for t in (10.0, 250.0, 1000.0):
            exact = scipy.linalg.expm(-1j * t * h) @ psi.vector
            assert np.max(np.abs(ed.evolve_exact(psi, t, dec).vector - exact)) <= 1e-10

    def test_unitarity(self):
        lat = fig2_like(3)
        dec = ed.diagonalize(lat)
        psi = ed.initial_dense_state(lat, "activation-excited")
        for t in (1.0, 1e2, 1e4):
            assert abs(ed.evolve_exact(psi, t, dec).norm - 1.0) <= 1e-11

    def test_sector_confinement(self):
        lat = fig2_like(3)
        dec = ed.diagonalize(lat)
        psi = ed.initial_dense_state(lat, "activation-excited")
        n_diag = np.real(np.diag(ed.total_excitation_operator(lat)))
        for t in (50.0, 700.0, 5000.0):
            p = np.abs(ed.evolve_exact(psi, t, dec).vector) ** 2
            assert np.sum(p[n_diag != 1]) <= 1e-10

    def test_sector_evolution_matches_full(self):
        lat = fig2_like(3)
        full = ed.diagonalize(lat)
        sec = ed.diagonalize(lat, sector=1)
        a = ed.initial_dense_state(lat, "activation-excited")
        b = ed.initial_dense_state(lat, "activation-excited", sector=1)
        for t in (30.0, 400.0):
            sa, sb = ed.evolve_exact(a, t, full), ed.evolve_exact(b, t, sec)
            assert np.max(np.abs(tls_profile(sa) - tls_profile(sb))) <= 1e-12
            for j in (1, 2):
                assert ed.branch_populations(sa, j) == pytest.approx(ed.branch_populations(sb, j), abs=1e-12)

    def test_basis_mismatch(self):
        lat = fig2_like(3)
        with pytest.raises(InvalidArgumentError):
            ed.evolve_exact(ed.initial_dense_state(lat, "activation-excited"), 1.0, ed.diagonalize(lat, sector=1))


class TestBranches:
    def test_ground_state(self):
        lat = fig2_like(3)
        dec = ed.diagonalize(lat)
        ground = ed.DenseState(dec.eigenvectors[:, 0], lat)
        assert ed.branch_populations(ground, 1) == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_local_lower_polariton(self):
        lat = fig2_like(3)
        vectors = [np.array([1.0, 0.0])]
        vectors.append(polariton_vector(lat.sites[1], "-"))
        vectors.append(np.eye(6)[0])
        psi = ed.product_state(lat, vectors)
        assert ed.branch_populations(psi, 1) == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_activation_site_rejected(self):
        lat = fig2_like(3)
        with pytest.raises(InvalidArgumentError):
            ed.branch_populations(ed.initial_dense_state(lat, "activation-excited"), 0)


class TestCompare:
    def test_fig2_like_l4(self):
        chain, d = preset_params("fig2")
        lat = build_chain(dataclasses.replace(chain, L=4))
        config = SimulationConfig(d.tau, 50 / V, 100)
        report = ed.compare_with_tebd(lat, config)
        assert report.basis == "full"
        assert report.worst <= 1e-4
        exact_policy = dataclasses.replace(config, policy=TruncationPolicy(4, 0.0))
        assert ed.compare_with_tebd(lat, exact_policy).worst <= 1e-5

    def test_zero_coupling(self):
        lat = build_chain(ChainParams(3, JCParams(1.0, 1.2, 0.0), 0.0, omega_A=0.9, lam=0.0))
        report = ed.compare_with_tebd(lat, SimulationConfig(1.0, 500.0, 50))
        assert report.worst <= 1e-10

    def test_tau_halving(self):
        lat = fig2_like(4)
        devs = []
        for tau_v in (1e-3, 5e-4):
            config = SimulationConfig(tau_v / V, 20 / V, round(0.5 / tau_v), TruncationPolicy(4, 0.0))
            devs.append(ed.compare_with_tebd(lat, config).worst)
        assert 3.0 <= devs[0] / devs[1] <= 5.0

    def test_sector_basis_for_long_chain(self):
        lat = fig2_like(8)
        report = ed.compare_with_tebd(lat, SimulationConfig(1e-3 / V, 2 / V, 100))
        assert report.basis == "sector"
        assert report.worst <= 1e-4

    def test_bad_basis(self):
        with pytest.raises(InvalidArgumentError):
            ed.compare_with_tebd(fig2_like(2), SimulationConfig(1.0, 1.0), basis="krylov")
