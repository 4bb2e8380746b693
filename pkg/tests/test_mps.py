import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from hybrid_lattice.errors import DegenerateStateError, InvalidArgumentError, NumericalError
from hybrid_lattice.lattice import (
    ChainParams,
    build_chain,
    initial_state,
    local_operator,
    scenario_preset,
)
from hybrid_lattice.mps import (
    MatrixProductState,
    TruncationLedger,
    TruncationPolicy,
    split_and_truncate,
    truncation_error,
)
from hybrid_lattice.polariton import JCParams

EXACT = TruncationPolicy(chi_max=64, epsilon0=0.0)
RESONANT = JCParams(1.0, 1.0, 0.04)


def small_chain(L=4):
    return build_chain(ChainParams(L, RESONANT, 0.01, omega_A=0.96, lam=-0.01 / math.sqrt(2)))


def random_local(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def dense_apply(psi, dims, bond, gate):
    """Apply a two-site gate to a dense state vector by reshaping."""
    left = math.prod(dims[:bond])
    pair = dims[bond] * dims[bond + 1]
    t = psi.reshape(left, pair, -1)
    return np.einsum("ij,ajb->aib", gate, t).ravel()


def dense_local(psi, dims, site, op):
    t = np.moveaxis(psi.reshape(dims), site, 0).reshape(dims[site], -1)
    return complex(np.einsum("ia,ij,ja->", t.conj(), op, t))


def scrambled_state(lattice, seed, layers=3, policy=EXACT):
    rng = np.random.default_rng(seed)
    dims = lattice.dims
    mps = MatrixProductState.from_product_state([random_local(d, rng) for d in dims])
    for _ in range(layers):
        for b in range(lattice.L - 1):
            u = unitary_group.rvs(dims[b] * dims[b + 1], random_state=rng)
            mps.apply_two_site_gate(b, u, policy)
    return mps


class TestProductState:
    def test_weights_and_norm(self):
        lat = small_chain()
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        assert all(np.array_equal(l, [1.0]) for l in mps.lambdas)
        assert mps.bond_dimensions == [1, 1, 1]
        assert abs(mps.norm() - 1.0) <= 1e-14

    def test_activation_excited_expectations(self):
        lat = small_chain()
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        assert mps.expectation_local(0, local_operator(lat.sites[0], "tls_number")) == pytest.approx(1.0)
        for j in range(1, lat.L):
            assert mps.expectation_local(j, local_operator(lat.sites[j], "photon_number")) == 0.0

    def test_centered_polariton(self):
        lat, _ = scenario_preset("fig7")
        mps = MatrixProductState.from_product_state(initial_state(lat, "centered-polariton"))
        c = lat.L // 2
        site = lat.sites[c]
        assert mps.bond_dimensions == [1] * (lat.L - 1)
        assert mps.expectation_local(c, local_operator(site, "polariton_number")).real == pytest.approx(1.0, abs=1e-12)
        assert mps.expectation_local(c, local_operator(site, "branch_minus")).real == pytest.approx(1.0, abs=1e-12)

    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidArgumentError):
            MatrixProductState.from_product_state([np.array([1.0, 1.0]), np.array([1.0, 0.0])])


class TestSplit:
    def test_product_has_rank_one(self):
        a, b = np.array([0.6, 0.8]), np.array([1.0, 0.0, 0.0])
        theta = np.kron(a, b).reshape(1, 2, 3, 1).astype(complex)
        left, w, right, eps = split_and_truncate(theta, TruncationPolicy())
        assert w.size == 1 and eps == 0.0

    def test_two_level_spectrum(self):
        theta = np.zeros((1, 2, 2, 1), dtype=complex)
        theta[0, 0, 0, 0], theta[0, 1, 1, 0] = math.sqrt(0.8), math.sqrt(0.2)
        _, w, _, eps = split_and_truncate(theta, TruncationPolicy(chi_max=1))
        assert w == pytest.approx([1.0])
        assert eps == pytest.approx(0.2, abs=1e-14)
        ledger = TruncationLedger()
        ledger.append(0, 0, eps, 1)
        assert ledger.product == pytest.approx(0.6, abs=1e-14)

    def test_threshold_drops_small_values(self):
        theta = np.zeros((1, 2, 2, 1), dtype=complex)
        theta[0, 0, 0, 0], theta[0, 1, 1, 0] = 1.0, 1e-7
        _, w, _, eps = split_and_truncate(theta, TruncationPolicy(chi_max=4, epsilon0=1e-6))
        assert w.size == 1
        assert eps == pytest.approx(1e-14, rel=1e-6)

    def test_vanished_state(self):
        theta = np.full((1, 2, 2, 1), 1e-8, dtype=complex)
        with pytest.raises(DegenerateStateError):
            split_and_truncate(theta, TruncationPolicy(epsilon0=1e-6))
        with pytest.raises(DegenerateStateError):
            split_and_truncate(np.zeros((1, 2, 2, 1), dtype=complex), TruncationPolicy())

    def test_non_finite(self):
        theta = np.ones((1, 2, 2, 1), dtype=complex)
        theta[0, 0, 0, 0] = np.nan
        with pytest.raises(NumericalError):
            split_and_truncate(theta, TruncationPolicy())

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(1, 3), st.integers(2, 6), st.integers(2, 6), st.integers(1, 3),
        st.integers(1, 6), st.integers(0, 2**31 - 1),
    )
    def test_isometries_and_weight(self, cl, da, db, cr, chi, seed):
        rng = np.random.default_rng(seed)
        theta = rng.normal(size=(cl, da, db, cr)) + 1j * rng.normal(size=(cl, da, db, cr))
        theta /= np.linalg.norm(theta)
        left, w, right, eps = split_and_truncate(theta, TruncationPolicy(chi_max=chi, epsilon0=1e-6))
        k = w.size
        u = left.reshape(cl * da, k)
        vh = right.reshape(k, db * cr)
        assert np.max(np.abs(u.conj().T @ u - np.eye(k))) <= 1e-10
        assert np.max(np.abs(vh @ vh.conj().T - np.eye(k))) <= 1e-10
        assert np.sum(w**2) == pytest.approx(1.0, abs=1e-12)
        # independent SVD of the same matrix
        s = np.linalg.svd(theta.reshape(cl * da, db * cr), compute_uv=False)
        assert eps == pytest.approx(1.0 - np.sum(s[:k] ** 2) / np.sum(s**2), abs=1e-12)
        if k == len(s):
            rebuilt = np.einsum("aik,k,kjb->aijb", left, w * math.sqrt(np.sum(s**2)), right)
            assert np.max(np.abs(rebuilt - theta)) <= 1e-10


class TestGates:
    def test_identity_gate(self):
        lat = small_chain()
        mps = scrambled_state(lat, 1, layers=1)
        before = [mps.site_rdm(j) for j in range(lat.L)]
        ledger = TruncationLedger()
        policy = TruncationPolicy(chi_max=64, epsilon0=1e-6)
        for b in range(lat.L - 1):
            d = lat.dims[b] * lat.dims[b + 1]
            mps.apply_two_site_gate(b, np.eye(d), policy, ledger)
        for j in range(lat.L):
            assert np.max(np.abs(mps.site_rdm(j) - before[j])) <= 1e-12
        assert np.all(ledger.eps <= 1e-14)

    def test_rabi_exchange_on_activation_bond(self):
        lat = small_chain(2)
        lam = lat.bonds[0].coupling
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        sp0 = local_operator(lat.sites[0], "tls_raise")
        sp1 = local_operator(lat.sites[1], "tls_raise")
        hop = np.kron(sp0, sp1.conj().T)
        h = lam * (hop + hop.conj().T)
        t = math.pi / (2 * abs(lam))
        evals, evecs = np.linalg.eigh(h)
        gate = (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T
        mps.apply_two_site_gate(0, gate, TruncationPolicy())
        n0 = mps.expectation_local(0, local_operator(lat.sites[0], "tls_number")).real
        n1 = mps.expectation_local(1, local_operator(lat.sites[1], "tls_number")).real
        assert n0 == pytest.approx(0.0, abs=1e-10)
        assert n1 == pytest.approx(1.0, abs=1e-10)

    def test_gate_then_inverse(self):
        lat = small_chain()
        mps = scrambled_state(lat, 2, layers=1)
        rng = np.random.default_rng(3)
        before = [mps.site_rdm(j) for j in range(lat.L)]
        u = unitary_group.rvs(36, random_state=rng)
        mps.apply_two_site_gate(1, u, EXACT)
        mps.apply_two_site_gate(1, u.conj().T, EXACT)
        for j in range(lat.L):
            assert np.max(np.abs(mps.site_rdm(j) - before[j])) <= 1e-9

    def test_dimension_mismatch(self):
        lat = small_chain()
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        with pytest.raises(InvalidArgumentError):
            mps.apply_two_site_gate(0, np.eye(36), TruncationPolicy())
        with pytest.raises(InvalidArgumentError):
            mps.apply_two_site_gate(5, np.eye(36), TruncationPolicy())

    def test_non_unitary_rejected(self):
        lat = small_chain()
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        with pytest.raises(InvalidArgumentError):
            mps.apply_two_site_gate(1, 2 * np.eye(36), TruncationPolicy())

    def test_nan_reports_step_and_bond(self):
        lat = small_chain()
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        gate = np.full((36, 36), np.nan, dtype=complex)
        with pytest.raises(NumericalError) as info:
            mps.apply_two_site_gate(2, gate, TruncationPolicy(), step=17, check=False)
        assert (info.value.step, info.value.bond) == (17, 2)

    def test_norm_and_deficit(self):
        lat = small_chain()
        mps = scrambled_state(lat, 4, layers=2)
        rng = np.random.default_rng(5)
        policy = TruncationPolicy(chi_max=2, epsilon0=1e-6)
        for b in (1, 0, 2, 1):
            u = unitary_group.rvs(lat.dims[b] * lat.dims[b + 1], random_state=rng)
            theta = mps.theta(b)
            new = np.einsum("ij,ajb->aib", u, theta.reshape(theta.shape[0], -1, theta.shape[3]))
            s = np.linalg.svd(new.reshape(theta.shape[0] * theta.shape[1], -1), compute_uv=False)
            eps = mps.apply_two_site_gate(b, u, policy)
            k = mps.bond_weights(b).size
            assert eps == pytest.approx(1.0 - np.sum(s[:k] ** 2) / np.sum(s**2), abs=1e-12)
            assert mps.norm() == pytest.approx(1.0, abs=1e-10)


class TestGauge:
    def test_dense_contraction_agrees(self):
        lat = small_chain()
        mps = scrambled_state(lat, 6)
        psi = mps.to_dense()
        assert psi.size == 432
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
        for j, site in enumerate(lat.sites):
            for name in ("tls_number", "tls_raise") + (("photon_number", "branch_plus") if site.kind == "jc" else ()):
                op = local_operator(site, name)
                assert abs(mps.expectation_local(j, op) - dense_local(psi, lat.dims, j, op)) <= 1e-10

    def test_hermitian_expectations_are_real(self):
        lat = small_chain()
        mps = scrambled_state(lat, 7)
        for j, site in enumerate(lat.sites):
            assert abs(mps.expectation_local(j, local_operator(site, "tls_number")).imag) <= 1e-10

    def test_layer_matches_dense(self):
        lat = small_chain(5)
        mps = scrambled_state(lat, 8, layers=1)
        psi = mps.to_dense()
        rng = np.random.default_rng(9)
        bonds = [0, 2]
        gates = [unitary_group.rvs(lat.dims[b] * lat.dims[b + 1], random_state=rng) for b in bonds]
        mps.apply_layer(bonds, gates, EXACT)
        for b, g in zip(bonds, gates):
            psi = dense_apply(psi, lat.dims, b, g)
        overlap = abs(np.vdot(psi, mps.to_dense()))
        assert overlap == pytest.approx(1.0, abs=1e-9)

    def test_layer_equals_sequential(self):
        lat = small_chain(6)
        a = scrambled_state(lat, 10, layers=1)
        b = a.copy()
        rng = np.random.default_rng(11)
        bonds = [1, 3]
        gates = [unitary_group.rvs(lat.dims[x] * lat.dims[x + 1], random_state=rng) for x in bonds]
        eps_layer = a.apply_layer(bonds, gates, TruncationPolicy())
        eps_seq = [b.apply_two_site_gate(x, g, TruncationPolicy()) for x, g in zip(bonds, gates)]
        assert np.allclose(eps_layer, eps_seq, atol=1e-15)
        for j in range(lat.L):
            assert np.max(np.abs(a.site_rdm(j) - b.site_rdm(j))) <= 1e-12

    def test_overlapping_layer_rejected(self):
        lat = small_chain()
        mps = MatrixProductState.from_product_state(initial_state(lat, "activation-excited"))
        with pytest.raises(InvalidArgumentError):
            mps.apply_layer([1, 2], [np.eye(36), np.eye(36)], TruncationPolicy())


class TestLedger:
    def test_empty(self):
        assert truncation_error(TruncationLedger()) == 0.0

    def test_single(self):
        ledger = TruncationLedger()
        ledger.append(0, 0, 0.2, 1)
        assert truncation_error(ledger) == pytest.approx(0.4, abs=1e-15)

    def test_many_small(self):
        ledger = TruncationLedger()
        for n in range(1000):
            ledger.append(n, 0, 1e-9, 2)
        expected = 1.0 - (1.0 - 2e-9) ** 1000
        assert truncation_error(ledger) == pytest.approx(expected, rel=1e-9)
        assert truncation_error(ledger) == pytest.approx(2.0e-6, rel=1e-3)
        assert len(ledger) == 1000 and ledger.eps_sum == pytest.approx(1e-6)

    @given(st.lists(st.floats(0.0, 0.5), max_size=50))
    def test_monotone(self, values):
        ledger = TruncationLedger()
        last = truncation_error(ledger)
        for e in values:
            ledger.append(0, 0, e, 1)
            now = truncation_error(ledger)
            assert now >= last
            last = now

    def test_extend_matches_append(self):
        a, b = TruncationLedger(), TruncationLedger()
        eps = np.array([1e-3, 0.0, 2e-5])
        a.extend(3, [0, 2, 4], eps, np.array([1, 2, 2]))
        for bond, e in zip([0, 2, 4], eps):
            b.append(3, bond, e, 1)
        assert a.truncation_error() == pytest.approx(b.truncation_error(), rel=1e-15)
        assert list(a.bonds) == [0, 2, 4] and list(a.steps) == [3, 3, 3]

    def test_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            TruncationLedger().append(0, 0, 1.5, 1)


def test_policy_validation():
    with pytest.raises(InvalidArgumentError):
        TruncationPolicy(chi_max=0)
    with pytest.raises(InvalidArgumentError):
        TruncationPolicy(epsilon0=-1.0)
