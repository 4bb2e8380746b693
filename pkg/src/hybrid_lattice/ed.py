"""Exact-diagonalization reference for small chains.

The Hamiltonian is assembled term by term from its three parts (activation
qubit, Jaynes-Cummings units, TLS-TLS exchange) without going through the
bond decomposition used by TEBD, so the two constructions can check each
other.

Two bases are supported. The full tensor-product space uses the same
site-major, TLS-major ordering as the MPS. A fixed excitation-number sector
keeps only product states with a given total excitation; since the
Hamiltonian conserves that number, evolution restricted to the sector of
the initial state is exact and reaches chains far beyond the full-space cap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, ResourceLimitError
from .lattice import LatticeSpec, excitation_counts, initial_state, local_operator

DEFAULT_DIM_CAP = 20000


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Product states of total excitation ``n_exc`` as rows of local indices."""

    lattice: LatticeSpec
    n_exc: int
    states: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)


def full_dimension(lattice: LatticeSpec) -> int:
    return math.prod(lattice.dims)


def sector_basis(lattice: LatticeSpec, n_exc: int) -> SectorBasis:
    """Enumerate the basis of the ``n_exc`` excitation sector (lexicographic order)."""
    counts = [excitation_counts(s) for s in lattice.sites]
    rows = []

    def extend(prefix, site, budget):
        if site == lattice.L:
            if budget == 0:
                rows.append(prefix)
            return
        for idx, c in enumerate(counts[site]):
            if c <= budget:
                extend(prefix + (idx,), site + 1, budget - int(c))

    extend((), 0, n_exc)
    states = np.array(rows, dtype=np.int64).reshape(len(rows), lattice.L)
    return SectorBasis(lattice, n_exc, states)


# --- operator embedding ------------------------------------------------------


def _embed_full(lattice: LatticeSpec, factors: dict[int, np.ndarray]) -> sp.csr_matrix:
    out = sp.identity(1, dtype=complex, format="csr")
    for j, d in enumerate(lattice.dims):
        op = factors.get(j)
        block = sp.identity(d, dtype=complex, format="csr") if op is None else sp.csr_matrix(op)
        out = sp.kron(out, block, format="csr")
    return out


def _embed_sector(basis: SectorBasis, factors: dict[int, np.ndarray]) -> np.ndarray:
    """Matrix of a product of single-site operators restricted to ``basis``."""
    states = basis.states
    index = {tuple(row): k for k, row in enumerate(states.tolist())}
    out = np.zeros((len(states), len(states)), dtype=complex)
    sites = sorted(factors)
    for col, row in enumerate(states.tolist()):
        # nonzero output components of each factor applied to this state's local index
        choices = []
        for j in sites:
            column = factors[j][:, row[j]]
            nz = np.flatnonzero(column)
            choices.append([(int(i), column[i]) for i in nz])
        for combo in itertools.product(*choices):
            new = list(row)
            amp = 1.0 + 0j
            for j, (i, value) in zip(sites, combo):
                new[j] = i
                amp *= value
            target = index.get(tuple(new))
            if target is not None:
                out[target, col] += amp
    return out


def _hamiltonian_terms(lattice: LatticeSpec) -> list[tuple[float, dict[int, np.ndarray]]]:
    """``(coefficient, {site: local factor})`` for every term of H_A + H_JC + H_I."""
    terms = []
    sites = lattice.sites
    for j, site in enumerate(sites):
        sp_, sm = local_operator(site, "tls_raise"), local_operator(site, "tls_lower")
        if site.kind == "activation":
            terms.append((site.omega_A, {j: sp_ @ sm}))
            continue
        p = site.jc
        a = local_operator(site, "photon_annihilate")
        ad = a.conj().T
        terms.append((p.omega, {j: ad @ a}))
        terms.append((p.omega0, {j: sp_ @ sm}))
        terms.append((p.g, {j: sp_ @ a}))
        terms.append((p.g, {j: sm @ ad}))
    for bond in lattice.bonds:
        l, r = bond.left_site, bond.right_site
        sp_l, sm_l = local_operator(sites[l], "tls_raise"), local_operator(sites[l], "tls_lower")
        sp_r, sm_r = local_operator(sites[r], "tls_raise"), local_operator(sites[r], "tls_lower")
        terms.append((bond.coupling, {l: sp_l, r: sm_r}))
        terms.append((bond.coupling, {l: sm_l, r: sp_r}))
    return terms


def _check_cap(dim: int, cap: int) -> None:
    if dim > cap:
        raise ResourceLimitError(f"dense dimension {dim} exceeds the cap {cap}")


def build_dense_hamiltonian(
    lattice: LatticeSpec, cap: int = DEFAULT_DIM_CAP, sector: int | None = None
) -> np.ndarray:
    """Dense Hermitian Hamiltonian in the full space or in an excitation sector."""
    if sector is None:
        dim = full_dimension(lattice)
        _check_cap(dim, cap)
        h = sp.csr_matrix((dim, dim), dtype=complex)
        for coef, factors in _hamiltonian_terms(lattice):
            h = h + coef * _embed_full(lattice, factors)
        return h.toarray()
    basis = sector_basis(lattice, sector)
    _check_cap(len(basis), cap)
    h = np.zeros((len(basis), len(basis)), dtype=complex)
    for coef, factors in _hamiltonian_terms(lattice):
        h += coef * _embed_sector(basis, factors)
    return h


def total_excitation_operator(lattice: LatticeSpec, sector: int | None = None) -> np.ndarray:
    """Dense ``N_tot`` (diagonal in the product basis)."""
    counts = [excitation_counts(s) for s in lattice.sites]
    if sector is None:
        diag = np.zeros(1, dtype=np.int64)
        for c in counts:
            diag = (diag[:, None] + c[None, :]).ravel()
        return np.diag(diag.astype(complex))
    basis = sector_basis(lattice, sector)
    return np.eye(len(basis), dtype=complex) * sector


# --- states and spectra ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseState:
    """State vector over the full space (``basis is None``) or a sector."""

    vector: np.ndarray
    lattice: LatticeSpec
    basis: SectorBasis | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    lattice: LatticeSpec
    basis: SectorBasis | None = None

    def reconstruction_residual(self, hamiltonian: np.ndarray) -> float:
        v = self.eigenvectors
        rebuilt = (v * self.eigenvalues) @ v.conj().T
        return float(np.max(np.abs(hamiltonian - rebuilt)))


def diagonalize(
    lattice: LatticeSpec, cap: int = DEFAULT_DIM_CAP, sector: int | None = None
) -> SpectralDecomposition:
    h = build_dense_hamiltonian(lattice, cap=cap, sector=sector)
    evals, evecs = np.linalg.eigh(h)
    basis = None if sector is None else sector_basis(lattice, sector)
    return SpectralDecomposition(evals, evecs, lattice, basis)


def product_state(
    lattice: LatticeSpec, vectors: list[np.ndarray], basis: SectorBasis | None = None
) -> DenseState:
    """Dense form of a product state given one local vector per site.

    In a sector basis, components outside the sector are dropped; the caller
    is responsible for choosing the sector that carries the whole state.
    """
    if basis is None:
        psi = np.ones(1, dtype=complex)
        for vec in vectors:
            psi = np.kron(psi, vec)
        return DenseState(psi, lattice)
    amps = np.ones(len(basis), dtype=complex)
    for j, vec in enumerate(vectors):
        amps *= np.asarray(vec)[basis.states[:, j]]
    return DenseState(amps, lattice, basis)


def initial_dense_state(
    lattice: LatticeSpec, kind: str, sector: int | None = None
) -> DenseState:
    vectors = initial_state(lattice, kind)
    basis = None if sector is None else sector_basis(lattice, sector)
    return product_state(lattice, vectors, basis)


def evolve_exact(state: DenseState, t: float, decomposition: SpectralDecomposition) -> DenseState:
    """``V exp(-i E t) V^dagger psi``."""
    if decomposition.lattice is not state.lattice and decomposition.lattice != state.lattice:
        raise InvalidArgumentError("decomposition belongs to a different lattice")
    if decomposition.eigenvectors.shape[0] != state.vector.shape[0]:
        raise InvalidArgumentError("decomposition and state live in different bases")
    v = decomposition.eigenvectors
    coeffs = v.conj().T @ state.vector
    psi = v @ (np.exp(-1j * decomposition.eigenvalues * t) * coeffs)
    return DenseState(psi, state.lattice, state.basis)


# --- observables -------------------------------------------------------------


def reduced_density_matrix(state: DenseState, site: int) -> np.ndarray:
    """Single-site reduced density matrix ``rho[i, i'] = sum_rest psi(i) psi*(i')``."""
    lattice = state.lattice
    d = lattice.dims[site]
    if state.basis is None:
        psi = state.vector.reshape(lattice.dims)
        psi = np.moveaxis(psi, site, 0).reshape(d, -1)
        return psi @ psi.conj().T
    states = state.basis.states
    rest = np.delete(states, site, axis=1)
    _, group = np.unique(rest, axis=0, return_inverse=True)
    group = np.asarray(group).ravel()
    table = np.zeros((group.max() + 1, d), dtype=complex)
    table[group, states[:, site]] = state.vector
    return table.T @ table.conj()


def expectation_local(state: DenseState, site: int, operator: np.ndarray) -> complex:
    rho = reduced_density_matrix(state, site)
    if operator.shape != rho.shape:
        raise InvalidArgumentError("operator dimension does not match the site")
    return complex(np.trace(rho @ operator))


def branch_populations(state: DenseState, site: int) -> tuple[float, float]:
    """Populations ``(p_minus, p_plus)`` of ``|1,->`` and ``|1,+>`` at a jc site."""
    spec = state.lattice.sites[site]
    if spec.kind != "jc":
        raise InvalidArgumentError("branch populations are defined on jc units only")
    rho = reduced_density_matrix(state, site)
    p_minus = float(np.real(np.trace(rho @ local_operator(spec, "branch_minus"))))
    p_plus = float(np.real(np.trace(rho @ local_operator(spec, "branch_plus"))))
    return p_minus, p_plus


# --- cross-check against TEBD -----------------------------------------------


@dataclass(frozen=True)
class Deviation:
    observable: str
    max_abs: float
    time: float
    site: int


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Largest TEBD-vs-exact deviation per observable family."""

    deviations: dict[str, Deviation]
    basis: str
    tebd: object = field(repr=False)

    @property
    def worst(self) -> float:
        return max(d.max_abs for d in self.deviations.values())


def _sector_of(lattice: LatticeSpec, vectors) -> int | None:
    """Excitation number carried by a product state, or None if it mixes sectors."""
    total = 0
    for site, vec in zip(lattice.sites, vectors):
        counts = excitation_counts(site)
        support = np.unique(counts[np.abs(np.asarray(vec)) > 1e-14])
        if len(support) != 1:
            return None
        total += int(support[0])
    return total


def exact_observables(state: DenseState) -> dict[str, np.ndarray]:
    """Per-site tls, photon, polariton and branch populations of a dense state."""
    lattice = state.lattice
    L = lattice.L
    out = {name: np.full(L, np.nan) for name in ("tls", "photon", "polariton", "branch_minus", "branch_plus")}
    for j, site in enumerate(lattice.sites):
        rho = reduced_density_matrix(state, j)
        ev = lambda name: float(np.real(np.trace(rho @ local_operator(site, name))))  # noqa: E731
        out["tls"][j] = ev("tls_number")
        if site.kind == "jc":
            out["photon"][j] = ev("photon_number")
            out["polariton"][j] = ev("polariton_number")
            out["branch_minus"][j] = ev("branch_minus")
            out["branch_plus"][j] = ev("branch_plus")
        else:
            out["polariton"][j] = out["tls"][j]
    return out


def compare_with_tebd(
    lattice: LatticeSpec,
    config,
    initial: str = "activation-excited",
    basis: str = "auto",
    cap: int = DEFAULT_DIM_CAP,
) -> ComparisonReport:
    """Run TEBD and exact evolution from the same state and compare samples.

    ``basis`` is ``"full"``, ``"sector"`` (the excitation sector of the
    initial product state) or ``"auto"`` (full space when it fits under
    ``cap``, otherwise the sector).
    """
    from .tebd import run

    vectors = initial_state(lattice, initial)
    sector = _sector_of(lattice, vectors)
    if basis == "auto":
        basis = "full" if full_dimension(lattice) <= cap or sector is None else "sector"
    if basis == "full":
        n_exc = None
    elif basis == "sector":
        if sector is None:
            raise InvalidArgumentError("initial state is not confined to one excitation sector")
        n_exc = sector
    else:
        raise InvalidArgumentError(f"basis must be 'auto', 'full' or 'sector', got {basis!r}")
    decomposition = diagonalize(lattice, cap=cap, sector=n_exc)
    psi0 = product_state(lattice, vectors, decomposition.basis)
    result = run(lattice, vectors, config)
    series = result.series
    families = ["tls", "photon", "polariton"]
    if series.branch_plus is not None:
        families += ["branch_minus", "branch_plus"]
    worst = {name: Deviation(name, 0.0, 0.0, -1) for name in families}
    for k, t in enumerate(series.times):
        exact = exact_observables(evolve_exact(psi0, t, decomposition))
        for name in families:
            diff = np.abs(exact[name] - getattr(series, name)[k])
            diff = np.where(np.isnan(diff), 0.0, diff)
            j = int(np.argmax(diff))
            if diff[j] > worst[name].max_abs:
                worst[name] = Deviation(name, float(diff[j]), float(t), j)
    return ComparisonReport(worst, basis, result)
