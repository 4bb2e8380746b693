"""Hybrid chain model: sites, local operators, bond Hamiltonians, initial states.

Site indices are 0-based throughout the Python API; bond ``b`` couples sites
``b`` and ``b + 1``. User-facing labels (CSV headers, manifests) are 1-based,
so an activation qubit is "site 1" there and index 0 here.

Local basis ordering is TLS-major. A Jaynes-Cummings unit with cutoff
``n_max`` has basis ``|down,0>, ..., |down,n_max>, |up,0>, ..., |up,n_max>``,
i.e. index ``s * (n_max + 1) + n``; the activation qubit has ``|down>, |up>``.
The same ordering is used by the MPS and the dense oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np

from .errors import InvalidArgumentError
from .polariton import JCParams, coefficients, matching_conditions, swap_interface

SiteKind = Literal["activation", "jc"]
InitialKind = Literal["activation-excited", "centered-polariton"]

OPERATOR_NAMES = (
    "tls_raise",
    "tls_lower",
    "tls_number",
    "photon_annihilate",
    "photon_number",
    "polariton_number",
    "branch_minus",
    "branch_plus",
)
INITIAL_KINDS = ("activation-excited", "centered-polariton")
PRESET_NAMES = ("fig2", "fig3", "fig4", "fig6", "fig7")


@dataclass(frozen=True)
class SiteSpec:
    kind: SiteKind
    omega_A: float | None = None
    jc: JCParams | None = None
    n_max: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "activation":
            if self.omega_A is None or not math.isfinite(self.omega_A):
                raise InvalidArgumentError("activation qubit needs a finite omega_A")
        elif self.kind == "jc":
            if self.jc is None:
                raise InvalidArgumentError("jc unit needs JCParams")
            if self.n_max is None or self.n_max < 1:
                raise InvalidArgumentError(f"n_max must be >= 1, got {self.n_max}")
        else:
            raise InvalidArgumentError(f"unknown site kind {self.kind!r}")

    @classmethod
    def activation(cls, omega_A: float) -> SiteSpec:
        return cls("activation", omega_A=float(omega_A))

    @classmethod
    def jc_unit(cls, params: JCParams, n_max: int = 2) -> SiteSpec:
        return cls("jc", jc=params, n_max=int(n_max))

    @property
    def dim(self) -> int:
        return 2 if self.kind == "activation" else 2 * (self.n_max + 1)


@dataclass(frozen=True)
class BondSpec:
    left_site: int
    right_site: int
    coupling: float

    def __post_init__(self) -> None:
        if self.right_site != self.left_site + 1:
            raise InvalidArgumentError("bonds must join nearest neighbours")
        if not math.isfinite(self.coupling):
            raise InvalidArgumentError("bond coupling must be finite")


@dataclass(frozen=True)
class LatticeSpec:
    sites: tuple[SiteSpec, ...]
    bonds: tuple[BondSpec, ...]
    label: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        if len(self.sites) < 2:
            raise InvalidArgumentError("a lattice needs at least two sites")
        if len(self.bonds) != len(self.sites) - 1:
            raise InvalidArgumentError(
                f"{len(self.sites)} sites need {len(self.sites) - 1} bonds, got {len(self.bonds)}"
            )
        for b, bond in enumerate(self.bonds):
            if bond.left_site != b:
                raise InvalidArgumentError(f"bond {b} must join sites {b} and {b + 1}")
        for j, site in enumerate(self.sites):
            if site.kind == "activation" and j != 0:
                raise InvalidArgumentError("the activation qubit can only sit at the first site")

    @property
    def L(self) -> int:
        return len(self.sites)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.sites)

    @property
    def has_activation(self) -> bool:
        return self.sites[0].kind == "activation"

    @property
    def jc_sites(self) -> list[int]:
        return [j for j, s in enumerate(self.sites) if s.kind == "jc"]


# --- local basis and operators ----------------------------------------------


def local_basis(site: SiteSpec) -> list[tuple[str, int | None]]:
    """Ordered basis labels ``(tls_state, photon_number)``.

    The activation qubit has no resonator, so its photon entry is ``None``.
    """
    if site.kind == "activation":
        return [("down", None), ("up", None)]
    return [(s, n) for s in ("down", "up") for n in range(site.n_max + 1)]


def _tls_ops() -> tuple[np.ndarray, np.ndarray]:
    lower = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    return lower.conj().T.copy(), lower


def _annihilator(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def local_operator(site: SiteSpec, name: str) -> np.ndarray:
    """Dense matrix of a named single-site operator in the local basis.

    Photon operators are truncated at ``n_max``. ``branch_minus`` and
    ``branch_plus`` project onto ``|1,->`` and ``|1,+>`` built from the site's
    own ``JCParams``. The returned array is read-only.
    """
    if name not in OPERATOR_NAMES:
        raise InvalidArgumentError(f"unknown operator {name!r}; expected one of {OPERATOR_NAMES}")
    raise_, lower = _tls_ops()
    if site.kind == "activation":
        if name == "tls_raise":
            return _frozen(raise_)
        if name == "tls_lower":
            return _frozen(lower)
        if name in ("tls_number", "polariton_number"):
            return _frozen(raise_ @ lower)
        raise InvalidArgumentError(f"{name} is not defined on the activation qubit")

    nb = site.n_max + 1
    eye_b = np.eye(nb, dtype=complex)
    a = _annihilator(site.n_max)
    if name == "tls_raise":
        op = np.kron(raise_, eye_b)
    elif name == "tls_lower":
        op = np.kron(lower, eye_b)
    elif name == "tls_number":
        op = np.kron(raise_ @ lower, eye_b)
    elif name == "photon_annihilate":
        op = np.kron(np.eye(2, dtype=complex), a)
    elif name == "photon_number":
        op = np.kron(np.eye(2, dtype=complex), a.conj().T @ a)
    elif name == "polariton_number":
        op = np.kron(raise_ @ lower, eye_b) + np.kron(np.eye(2, dtype=complex), a.conj().T @ a)
    else:
        vec = polariton_vector(site, "-" if name == "branch_minus" else "+")
        op = np.outer(vec, vec.conj())
    return _frozen(op)


def polariton_vector(site: SiteSpec, branch: str, n: int = 1) -> np.ndarray:
    """Local vector of ``|n, branch>`` for a jc unit."""
    if site.kind != "jc":
        raise InvalidArgumentError("polariton states exist only on jc units")
    if not 1 <= n <= site.n_max:
        raise InvalidArgumentError(f"n must lie in 1..{site.n_max}, got {n}")
    c = coefficients(site.jc, n)
    nb = site.n_max + 1
    vec = np.zeros(site.dim, dtype=complex)
    vec[n] = c.gamma(branch)  # |down, n>
    vec[nb + n - 1] = c.rho(branch)  # |up, n-1>
    return vec


def excitation_counts(site: SiteSpec) -> np.ndarray:
    """Excitation number of each local basis state (TLS excitation plus photons)."""
    if site.kind == "activation":
        return np.array([0, 1])
    nb = site.n_max + 1
    return np.array([s + n for s in (0, 1) for n in range(nb)])


@lru_cache(maxsize=None)
def onsite_hamiltonian(site: SiteSpec) -> np.ndarray:
    """``omega_A s+s-`` for the activation qubit, the JC Hamiltonian for a unit."""
    if site.kind == "activation":
        h = site.omega_A * local_operator(site, "tls_number")
    else:
        p = site.jc
        sp = local_operator(site, "tls_raise")
        a = local_operator(site, "photon_annihilate")
        h = (
            p.omega * local_operator(site, "photon_number")
            + p.omega0 * local_operator(site, "tls_number")
            + p.g * (sp @ a + (sp @ a).conj().T)
        )
    return _frozen(np.asarray(h, dtype=complex))


# --- bond Hamiltonians -------------------------------------------------------


@dataclass(frozen=True)
class BondHamiltonian:
    bond: int
    matrix: np.ndarray = field(repr=False)


def onsite_weights(lattice: LatticeSpec) -> list[tuple[float, float]]:
    """Share of each bond's end-site on-site terms.

    Interior sites are split half and half between their two bonds; the first
    and last site give their whole on-site term to their only bond.
    """
    L = lattice.L
    weights = []
    for b in range(L - 1):
        w_left = 1.0 if b == 0 else 0.5
        w_right = 1.0 if b + 1 == L - 1 else 0.5
        weights.append((w_left, w_right))
    return weights


def exchange_term(left: SiteSpec, right: SiteSpec, coupling: float) -> np.ndarray:
    """``coupling * (s+_l s-_r + s-_l s+_r)`` on the two-site space."""
    sp_l = local_operator(left, "tls_raise")
    sp_r = local_operator(right, "tls_raise")
    hop = np.kron(sp_l, sp_r.conj().T)
    return coupling * (hop + hop.conj().T)


def bond_hamiltonians(lattice: LatticeSpec) -> list[BondHamiltonian]:
    out = []
    for b, (w_left, w_right) in enumerate(onsite_weights(lattice)):
        left, right = lattice.sites[b], lattice.sites[b + 1]
        h = exchange_term(left, right, lattice.bonds[b].coupling)
        h = h + w_left * np.kron(onsite_hamiltonian(left), np.eye(right.dim))
        h = h + w_right * np.kron(np.eye(left.dim), onsite_hamiltonian(right))
        out.append(BondHamiltonian(b, _frozen(h)))
    return out


def even_odd_split(lattice: LatticeSpec) -> tuple[list[int], list[int]]:
    """Bond indices of the two commuting layers.

    ``F`` holds bonds 0, 2, 4, ... (sites (1,2), (3,4), ... in 1-based
    labels) and ``G`` holds bonds 1, 3, 5, ...
    """
    n_bonds = lattice.L - 1
    return list(range(0, n_bonds, 2)), list(range(1, n_bonds, 2))


# --- initial states ----------------------------------------------------------


def _ground(site: SiteSpec) -> np.ndarray:
    vec = np.zeros(site.dim, dtype=complex)
    vec[0] = 1.0
    return vec


def initial_state(lattice: LatticeSpec, kind: InitialKind) -> list[np.ndarray]:
    """Product state as one normalized local vector per site.

    ``activation-excited``: activation qubit up, every unit in ``|down,0>``.
    ``centered-polariton``: ``|1,->`` on the middle site of an odd chain
    without activation qubit, ``|down,0>`` elsewhere.
    """
    vectors = [_ground(s) for s in lattice.sites]
    if kind == "activation-excited":
        if not lattice.has_activation:
            raise InvalidArgumentError("activation-excited start needs an activation qubit")
        vectors[0] = np.array([0.0, 1.0], dtype=complex)
    elif kind == "centered-polariton":
        if lattice.has_activation:
            raise InvalidArgumentError("centered-polariton start needs a chain without activation qubit")
        if lattice.L % 2 == 0:
            raise InvalidArgumentError(f"centered-polariton start needs odd L, got {lattice.L}")
        center = lattice.L // 2
        vectors[center] = polariton_vector(lattice.sites[center], "-")
    else:
        raise InvalidArgumentError(f"unknown initial state {kind!r}; expected one of {INITIAL_KINDS}")
    return vectors


# --- parameterized chains and scenario presets -------------------------------


@dataclass(frozen=True)
class ChainParams:
    """Flat parameterization of a (possibly two-section) hybrid chain.

    ``boundary`` is the 1-based label of the last left-section site; sites
    after it use ``right`` and ``v_right``, and the bond across the boundary
    carries ``lambda_C``. Without ``boundary`` the chain is homogeneous.
    """

    L: int
    left: JCParams
    v_left: float
    n_max: int = 2
    activation: bool = True
    omega_A: float | None = None
    lam: float | None = None
    boundary: int | None = None
    right: JCParams | None = None
    v_right: float | None = None
    lambda_C: float | None = None
    label: str = "custom"

    def validate(self) -> None:
        if self.L < 2:
            raise InvalidArgumentError("L must be >= 2")
        if self.n_max < 1:
            raise InvalidArgumentError("n_max must be >= 1")
        if self.activation and (self.omega_A is None or self.lam is None):
            raise InvalidArgumentError("an activation qubit needs omega_A and lambda")
        if self.boundary is not None:
            first = 2 if self.activation else 1
            if not first <= self.boundary < self.L:
                raise InvalidArgumentError(
                    f"boundary must lie in {first}..{self.L - 1}, got {self.boundary}"
                )
            if self.right is None or self.v_right is None or self.lambda_C is None:
                raise InvalidArgumentError("a sectioned chain needs right params, v_right and lambda_C")


def build_chain(params: ChainParams) -> LatticeSpec:
    params.validate()
    sites: list[SiteSpec] = []
    couplings: list[float] = []
    for label in range(1, params.L + 1):
        if label == 1 and params.activation:
            sites.append(SiteSpec.activation(params.omega_A))
            continue
        on_right = params.boundary is not None and label > params.boundary
        jc = params.right if on_right else params.left
        sites.append(SiteSpec.jc_unit(jc, params.n_max))
    for left_label in range(1, params.L):
        if left_label == 1 and params.activation:
            couplings.append(params.lam)
        elif params.boundary is not None and left_label == params.boundary:
            couplings.append(params.lambda_C)
        elif params.boundary is not None and left_label > params.boundary:
            couplings.append(params.v_right)
        else:
            couplings.append(params.v_left)
    bonds = [BondSpec(b, b + 1, float(c)) for b, c in enumerate(couplings)]
    return LatticeSpec(tuple(sites), tuple(bonds), params.label)


@dataclass(frozen=True)
class SimulationDefaults:
    """Run settings shipped with a preset; times are absolute (1/energy)."""

    tau: float
    t_final: float
    measure_stride: int
    chi_max: int
    epsilon0: float
    time_unit: float
    initial_state: InitialKind
    regime: str | None


def default_stride(tau: float, v: float) -> int:
    """Steps between samples so that samples are ~0.1/v apart."""
    return max(1, math.ceil(0.1 / (abs(v) * tau) - 1e-9))


def preset_params(name: str) -> tuple[ChainParams, SimulationDefaults]:
    """Parameter sets of the five scenarios.

    ``t_final`` (in units of 1/v) is chosen per preset so that the launched
    pulse crosses the chain once; see the README for the values.
    """
    if name == "fig2":
        v = 0.01
        jc = JCParams(1.0, 1.0, 4 * v)
        m = matching_conditions(jc, v, "resonant-polariton")
        chain = ChainParams(26, jc, v, omega_A=m.omega_A, lam=m.lam, label=name)
        tau_v, t_v, regime = 1e-3, 30.0, m.regime
    elif name == "fig3":
        omega = 10.0
        v = 0.05 * omega
        jc = JCParams(omega, 1.0, 0.08 * omega)
        m = matching_conditions(jc, v, "dispersive-photon")
        chain = ChainParams(26, jc, v, omega_A=m.omega_A, lam=m.lam, label=name)
        tau_v, t_v, regime = 5e-3, 1400.0, m.regime
    elif name == "fig4":
        omega = 1.0
        v = 0.02 * omega
        jc = JCParams(omega, 10.0, 0.05 * omega)
        m = matching_conditions(jc, v, "dispersive-spinwave")
        chain = ChainParams(26, jc, v, omega_A=m.omega_A, lam=m.lam, label=name)
        tau_v, t_v, regime = 1e-3, 15.0, m.regime
    elif name in ("fig6", "fig7"):
        v = 0.05 if name == "fig6" else 0.01
        left = JCParams(1.0, 1.0, 4 * v)
        omega_pol = left.omega - left.g
        right = JCParams(50 * omega_pol, omega_pol, left.g)
        swap = swap_interface(left, v)
        if name == "fig6":
            m = matching_conditions(left, v, "resonant-polariton")
            chain = ChainParams(
                31, left, v, omega_A=m.omega_A, lam=m.lam, boundary=15,
                right=right, v_right=swap.v_r, lambda_C=swap.lambda_C, label=name,
            )
            tau_v, t_v, regime = 1e-3, 42.0, m.regime
        else:
            chain = ChainParams(
                31, left, v, activation=False, boundary=16,
                right=right, v_right=swap.v_r, lambda_C=swap.lambda_C, label=name,
            )
            tau_v, t_v, regime = 1e-3, 15.0, None
    else:
        raise InvalidArgumentError(f"unknown scenario {name!r}; expected one of {PRESET_NAMES}")
    tau = tau_v / v
    defaults = SimulationDefaults(
        tau=tau,
        t_final=t_v / v,
        measure_stride=default_stride(tau, v),
        chi_max=4,
        epsilon0=1e-6,
        time_unit=1.0 / v,
        initial_state="activation-excited" if chain.activation else "centered-polariton",
        regime=regime,
    )
    return chain, defaults


def scenario_preset(name: str) -> tuple[LatticeSpec, SimulationDefaults]:
    chain, defaults = preset_params(name)
    return build_chain(chain), defaults
