"""Second-order Suzuki-Trotter time evolution of a lattice MPS.

One step of size ``tau`` is ``F(c1 tau) G(d1 tau) F(c2 tau) G(d2 tau)`` with
``(c, d) = ((1/2, 1), (1/2, 0))``, where ``F`` holds the even bonds and ``G``
the odd bonds of the chain. Bonds within a layer share no site, so each layer
is a product of independent two-site gates. Between two samples the trailing
half ``F`` layer of one step and the leading half ``F`` layer of the next are
fused into a single full-``tau`` layer.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .lattice import (
    LatticeSpec,
    bond_hamiltonians,
    even_odd_split,
    exchange_term,
    excitation_counts,
    initial_state,
    local_operator,
    onsite_hamiltonian,
    onsite_weights,
)
from .mps import MatrixProductState, TruncationLedger, TruncationPolicy

# (c_l, d_l) pairs of the second-order approximant
SECOND_ORDER = ((0.5, 1.0), (0.5, 0.0))

OBSERVABLES = ("tls", "photon", "polariton", "branch")


def exponentiate_bond(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i dt h)`` for Hermitian ``h`` via its eigendecomposition."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidArgumentError(f"bond Hamiltonian must be square, got {h.shape}")
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > 1e-10:
        raise InvalidArgumentError(f"bond Hamiltonian is not Hermitian (deviation {dev:.2e})")
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (evecs * np.exp(-1j * dt * evals)) @ evecs.conj().T


@dataclass(frozen=True)
class SimulationConfig:
    tau: float
    t_final: float
    measure_stride: int = 1
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    observables: tuple[str, ...] = OBSERVABLES
    # None: use the initial state's energy per excitation
    frame_frequency: float | None = None

    def __post_init__(self) -> None:
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidArgumentError(f"tau must be positive, got {self.tau}")
        if not (self.t_final >= 0 and math.isfinite(self.t_final)):
            raise InvalidArgumentError(f"t_final must be >= 0, got {self.t_final}")
        if int(self.measure_stride) != self.measure_stride or self.measure_stride < 1:
            raise InvalidArgumentError(f"measure_stride must be an integer >= 1, got {self.measure_stride}")
        unknown = set(self.observables) - set(OBSERVABLES)
        if unknown:
            raise InvalidArgumentError(f"unknown observables {sorted(unknown)}; expected {OBSERVABLES}")

    @property
    def n_steps(self) -> int:
        # tolerate t_final/tau landing a hair above an integer
        return int(math.ceil(self.t_final / self.tau - 1e-9))


def frame_bond_hamiltonians(lattice: LatticeSpec, frame_frequency: float) -> list[np.ndarray]:
    """Bond Hamiltonians of ``H - frame_frequency * N_tot``.

    ``N_tot`` commutes with ``H`` and with every bond term's excitation
    count, so evolving with the shifted operator changes the state only by
    the phase ``exp(i frame_frequency N t)`` inside each excitation sector.
    Sampled populations are unaffected while the large common on-site
    frequency drops out of the Trotter commutators.
    """
    out = []
    weights = onsite_weights(lattice)
    for bh, (w_left, w_right) in zip(bond_hamiltonians(lattice), weights):
        left, right = lattice.sites[bh.bond], lattice.sites[bh.bond + 1]
        if frame_frequency == 0.0:
            out.append(bh.matrix)
            continue
        n_left = np.kron(excitation_counts(left), np.ones(right.dim))
        n_right = np.kron(np.ones(left.dim), excitation_counts(right))
        shift = frame_frequency * (w_left * n_left + w_right * n_right)
        out.append(bh.matrix - np.diag(shift))
    return out


def energy_per_excitation(lattice: LatticeSpec, vectors: Sequence[np.ndarray]) -> float:
    """``<H> / <N_tot>`` of a product state (0 when it holds no excitation)."""
    energy = 0.0
    n_tot = 0.0
    for site, vec in zip(lattice.sites, vectors):
        energy += float(np.real(np.vdot(vec, onsite_hamiltonian(site) @ vec)))
        n_tot += float(np.abs(vec) ** 2 @ excitation_counts(site))
    for bond in lattice.bonds:
        l, r = bond.left_site, bond.right_site
        pair = np.kron(vectors[l], vectors[r])
        h = exchange_term(lattice.sites[l], lattice.sites[r], bond.coupling)
        energy += float(np.real(np.vdot(pair, h @ pair)))
    return energy / n_tot if n_tot > 0 else 0.0


class TrotterPlan:
    """Gate schedule and gate cache for one lattice and step size."""

    def __init__(
        self,
        lattice: LatticeSpec,
        tau: float,
        coefficients: Sequence[tuple[float, float]] = SECOND_ORDER,
        frame_frequency: float = 0.0,
    ):
        c = [pair[0] for pair in coefficients]
        d = [pair[1] for pair in coefficients]
        if abs(sum(c) - 1.0) > 1e-12 or abs(sum(d) - 1.0) > 1e-12:
            raise InvalidArgumentError("Trotter coefficients must each sum to 1")
        self.lattice = lattice
        self.tau = float(tau)
        self.coefficients = tuple((float(a), float(b)) for a, b in coefficients)
        even, odd = even_odd_split(lattice)
        self.layers = {"F": even, "G": odd}
        self.frame_frequency = float(frame_frequency)
        self._hamiltonians = frame_bond_hamiltonians(lattice, self.frame_frequency)
        self._gates: dict[tuple[int, float], np.ndarray] = {}
        self._segments: dict[int, list[tuple[str, float]]] = {}

    def step_sequence(self) -> list[tuple[str, float]]:
        """Layers of a single step as ``(layer, fraction of tau)``, zeros dropped."""
        seq = []
        for c_l, d_l in self.coefficients:
            seq.append(("F", c_l))
            seq.append(("G", d_l))
        return [(name, frac) for name, frac in seq if frac != 0.0 and self.layers[name]]

    def segment(self, n_steps: int) -> list[tuple[str, float]]:
        """Fused schedule for ``n_steps`` consecutive steps."""
        if n_steps not in self._segments:
            merged: list[tuple[str, float]] = []
            for _ in range(n_steps):
                for name, frac in self.step_sequence():
                    if merged and merged[-1][0] == name:
                        merged[-1] = (name, merged[-1][1] + frac)
                    else:
                        merged.append((name, frac))
            self._segments[n_steps] = merged
        return self._segments[n_steps]

    def gate(self, bond: int, fraction: float) -> np.ndarray:
        key = (bond, fraction)
        if key not in self._gates:
            self._gates[key] = exponentiate_bond(self._hamiltonians[bond], fraction * self.tau)
        return self._gates[key]

    def gate_count(self, n_steps: int) -> int:
        return sum(len(self.layers[name]) for name, _ in self.segment(n_steps))

    def apply_segment(
        self,
        mps: MatrixProductState,
        n_steps: int,
        policy: TruncationPolicy,
        ledger: TruncationLedger | None,
        step: int,
    ) -> None:
        for name, frac in self.segment(n_steps):
            bonds = self.layers[name]
            mps.apply_layer(bonds, [self.gate(b, frac) for b in bonds], policy, ledger, step)


def build_plan(
    lattice: LatticeSpec, config: SimulationConfig, frame_frequency: float | None = None
) -> TrotterPlan:
    if frame_frequency is None:
        frame_frequency = config.frame_frequency or 0.0
    return TrotterPlan(lattice, config.tau, frame_frequency=frame_frequency)


@dataclass(eq=False)
class ObservableSeries:
    """Sampled observables; per-site arrays have shape ``(n_samples, L)``.

    Photon numbers and branch populations are NaN on the activation qubit.
    """

    times: np.ndarray
    tls: np.ndarray
    photon: np.ndarray
    polariton: np.ndarray
    branch_minus: np.ndarray | None
    branch_plus: np.ndarray | None
    norm: np.ndarray
    energy: np.ndarray
    total_excitation: np.ndarray
    eps_trunc: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


@dataclass(eq=False)
class SimulationResult:
    series: ObservableSeries
    ledger: TruncationLedger
    mps: MatrixProductState
    n_steps: int
    wall_time: float


class _Sampler:
    def __init__(self, lattice: LatticeSpec, observables: Sequence[str]):
        self.lattice = lattice
        self.want_branch = "branch" in observables
        self.jc = np.array([s.kind == "jc" for s in lattice.sites])
        self.tls_ops = [local_operator(s, "tls_number") for s in lattice.sites]
        self.photon_ops = [
            local_operator(s, "photon_number") if s.kind == "jc" else None for s in lattice.sites
        ]
        self.branch_ops = [
            (local_operator(s, "branch_minus"), local_operator(s, "branch_plus"))
            if s.kind == "jc" else None
            for s in lattice.sites
        ]
        self.counts = [excitation_counts(s) for s in lattice.sites]
        self.bond_h = [bh.matrix for bh in bond_hamiltonians(lattice)]
        self.rows: list[tuple] = []

    def sample(self, t: float, mps: MatrixProductState, ledger: TruncationLedger) -> None:
        L = self.lattice.L
        tls = np.empty(L)
        photon = np.full(L, np.nan)
        b_minus = np.full(L, np.nan)
        b_plus = np.full(L, np.nan)
        n_tot = 0.0
        for j in range(L):
            rho = mps.site_rdm(j)
            tls[j] = np.real(np.trace(rho @ self.tls_ops[j]))
            n_tot += float(np.real(np.diagonal(rho)) @ self.counts[j])
            if self.photon_ops[j] is not None:
                photon[j] = np.real(np.trace(rho @ self.photon_ops[j]))
                if self.want_branch:
                    pm, pp = self.branch_ops[j]
                    b_minus[j] = np.real(np.trace(rho @ pm))
                    b_plus[j] = np.real(np.trace(rho @ pp))
        energy = sum(
            float(np.real(np.trace(mps.bond_rdm(b) @ h))) for b, h in enumerate(self.bond_h)
        )
        norm = mps.norm()
        if not (math.isfinite(norm) and math.isfinite(energy) and np.all(np.isfinite(tls))):
            raise NumericalError(f"non-finite observables at t={t}")
        self.rows.append((t, tls, photon, b_minus, b_plus, norm, energy, n_tot, ledger.truncation_error()))

    def series(self) -> ObservableSeries:
        cols = list(zip(*self.rows))
        tls, photon = np.array(cols[1]), np.array(cols[2])
        polariton = tls + np.where(self.jc[None, :], photon, 0.0)
        return ObservableSeries(
            times=np.array(cols[0]),
            tls=tls,
            photon=photon,
            polariton=polariton,
            branch_minus=np.array(cols[3]) if self.want_branch else None,
            branch_plus=np.array(cols[4]) if self.want_branch else None,
            norm=np.array(cols[5]),
            energy=np.array(cols[6]),
            total_excitation=np.array(cols[7]),
            eps_trunc=np.array(cols[8]),
        )


def run(
    lattice: LatticeSpec,
    initial: str | Sequence[np.ndarray],
    config: SimulationConfig,
    progress: Callable[[int, int], None] | None = None,
) -> SimulationResult:
    """Evolve from ``t = 0`` to ``t_final`` sampling every ``measure_stride`` steps.

    ``initial`` is an initial-state kind understood by
    :func:`hybrid_lattice.lattice.initial_state` or a list of local vectors.
    The final step is always sampled, even off-stride. Evolution runs in
    the frame rotating at ``config.frame_frequency`` (see
    :func:`frame_bond_hamiltonians`); reported energies are lab-frame values.
    """
    start = time.perf_counter()
    vectors = initial_state(lattice, initial) if isinstance(initial, str) else list(initial)
    if len(vectors) != lattice.L:
        raise InvalidArgumentError("need one local vector per site")
    mps = MatrixProductState.from_product_state(vectors)
    frame = config.frame_frequency
    if frame is None:
        frame = energy_per_excitation(lattice, vectors)
    plan = build_plan(lattice, config, frame)
    ledger = TruncationLedger()
    sampler = _Sampler(lattice, config.observables)
    n_steps = config.n_steps
    sampler.sample(0.0, mps, ledger)
    done = 0
    while done < n_steps:
        chunk = min(config.measure_stride, n_steps - done)
        plan.apply_segment(mps, chunk, config.policy, ledger, done + 1)
        done += chunk
        sampler.sample(done * config.tau, mps, ledger)
        if progress is not None:
            progress(done, n_steps)
    return SimulationResult(sampler.series(), ledger, mps, n_steps, time.perf_counter() - start)
