"""Dressed-state algebra of a single Jaynes-Cummings unit.

Everything here is closed form and stateless: mixing angles, polariton
amplitudes, branch energies, polariton hopping elements and the parameter
matching rules that select which carrier (polariton, photon or spin wave)
propagates along the chain.

Conventions
-----------
A unit is a resonator of frequency ``omega`` coupled with strength ``g`` to a
two-level system (TLS) of frequency ``omega0``; ``hbar = 1``. The polariton
with ``n`` excitations on branch ``alpha`` is

    |n, alpha> = gamma_{n alpha} |down, n> + rho_{n alpha} |up, n-1>

with ``rho_{n+} = cos(theta_n/2)``, ``gamma_{n+} = sin(theta_n/2)``,
``rho_{n-} = -gamma_{n+}`` and ``gamma_{n-} = rho_{n+}``. The mixing angle is
the principal value ``theta_n = arctan(2 g sqrt(n) / detuning)``, or ``pi/2``
on resonance. With this choice the "-" vector is always the eigenvector whose
energy is ``n omega + D/2 - (D/2) sqrt(1 + 4 n g^2 / D^2)``; for negative
detuning that is the *higher* of the two levels (the photon-like one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import InvalidArgumentError

Branch = Literal["+", "-"]
Regime = Literal["resonant-polariton", "dispersive-photon", "dispersive-spinwave"]

REGIMES: tuple[str, ...] = ("resonant-polariton", "dispersive-photon", "dispersive-spinwave")


def _check_branch(branch: str) -> None:
    if branch not in ("+", "-"):
        raise InvalidArgumentError(f"branch must be '+' or '-', got {branch!r}")


@dataclass(frozen=True)
class JCParams:
    """Frequencies and coupling of one Jaynes-Cummings unit."""

    omega: float
    omega0: float
    g: float

    def __post_init__(self) -> None:
        for name in ("omega", "omega0", "g"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
        if self.g < 0:
            raise InvalidArgumentError(f"light-matter coupling g must be >= 0, got {self.g}")

    @property
    def detuning(self) -> float:
        """``omega0 - omega``."""
        return self.omega0 - self.omega


@dataclass(frozen=True)
class PolaritonCoeffs:
    n: int
    theta_n: float | None
    rho_plus: float
    gamma_plus: float
    rho_minus: float
    gamma_minus: float

    def rho(self, branch: Branch) -> float:
        _check_branch(branch)
        return self.rho_plus if branch == "+" else self.rho_minus

    def gamma(self, branch: Branch) -> float:
        _check_branch(branch)
        return self.gamma_plus if branch == "+" else self.gamma_minus


@dataclass(frozen=True)
class BranchEnergy:
    n: int
    branch: Branch
    value: float


@dataclass(frozen=True)
class MatchingConditions:
    """Activation-qubit settings that launch a given carrier.

    ``suppression_ratio`` is ``g / (|v|/4)``; upper-branch transport is
    suppressed when it is large.
    """

    regime: Regime
    omega_A: float
    lam: float
    suppression_ratio: float


@dataclass(frozen=True)
class SwapInterface:
    """Couplings that impedance-match a resonant polariton section to a spin section."""

    lambda_C: float
    lambda_eff: float
    v_r: float


def mixing_angle(params: JCParams, n: int) -> float:
    """Mixing angle ``theta_n`` in radians.

    Principal value of ``arctan(2 g sqrt(n) / detuning)``; exactly ``pi/2`` on
    resonance, where the tangent diverges.
    """
    if n < 1:
        raise InvalidArgumentError(f"mixing angle is defined for n >= 1, got n={n}")
    delta = params.detuning
    if delta == 0.0:
        return math.pi / 2
    return math.atan(2.0 * params.g * math.sqrt(n) / delta)


def coefficients(params: JCParams, n: int) -> PolaritonCoeffs:
    """Polariton amplitudes for ``n`` excitations.

    ``n = 0`` returns the fixed ground-state constants
    ``gamma_{0-} = 1`` and ``gamma_{0+} = rho_{0+} = rho_{0-} = 0``.
    """
    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    if n == 0:
        return PolaritonCoeffs(0, None, 0.0, 0.0, 0.0, 1.0)
    theta = mixing_angle(params, n)
    rho_plus = math.cos(theta / 2)
    gamma_plus = math.sin(theta / 2)
    return PolaritonCoeffs(
        n=n,
        theta_n=theta,
        rho_plus=rho_plus,
        gamma_plus=gamma_plus,
        rho_minus=-gamma_plus,
        gamma_minus=rho_plus,
    )


def branch_energy(params: JCParams, n: int, branch: Branch) -> BranchEnergy:
    """Energy of ``|n, branch>``.

    Off resonance the closed form ``n omega + D/2 +- (D/2) sqrt(1 + 4 n g^2/D^2)``
    is evaluated as written (so the sign of ``D`` carries through); on
    resonance its limit ``n omega +- g sqrt(n)`` is returned.
    """
    _check_branch(branch)
    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    if n == 0:
        if branch == "+":
            raise InvalidArgumentError("|0,+> is the null vector and has no energy")
        return BranchEnergy(0, "-", 0.0)
    sign = 1.0 if branch == "+" else -1.0
    delta = params.detuning
    if delta == 0.0:
        value = n * params.omega + sign * params.g * math.sqrt(n)
    else:
        root = math.sqrt(1.0 + 4.0 * n * params.g**2 / delta**2)
        value = n * params.omega + delta / 2 + sign * (delta / 2) * root
    return BranchEnergy(n, branch, value)


def hopping_element(params: JCParams, n: int, alpha: Branch, beta: Branch) -> float:
    """``t_n^{alpha beta} = rho_{n alpha} * gamma_{n-1, beta}``."""
    if n < 1:
        raise InvalidArgumentError(f"hopping element needs n >= 1, got n={n}")
    return coefficients(params, n).rho(alpha) * coefficients(params, n - 1).gamma(beta)


def effective_hopping(v: float, params: JCParams) -> float:
    """Nearest-neighbour hopping of a lower-branch single polariton, ``v * rho_{1-}^2``."""
    return v * coefficients(params, 1).rho_minus ** 2


def suppression_ratio(params: JCParams, v: float) -> float:
    """``g / (|v|/4)``; infinite for ``v = 0``."""
    if v == 0.0:
        return math.inf
    # 4 g / |v| rather than g / (|v|/4): the latter underflows for subnormal v
    return 4.0 * params.g / abs(v)


def matching_conditions(params: JCParams, v: float, regime: Regime) -> MatchingConditions:
    """Activation frequency and coupling that launch the carrier of ``regime``.

    * ``resonant-polariton``: ``omega_A = omega - g``, ``lam = v rho_{1-}``
    * ``dispersive-photon``: ``omega_A = omega - g^2/D``, ``lam = v rho_{1-}``
    * ``dispersive-spinwave``: ``omega_A = omega0``, ``lam = v``
    """
    rho = coefficients(params, 1).rho_minus
    delta = params.detuning
    if regime == "resonant-polariton":
        omega_A, lam = params.omega - params.g, v * rho
    elif regime == "dispersive-photon":
        if delta == 0.0:
            raise InvalidArgumentError("dispersive regimes need a non-zero detuning")
        omega_A, lam = params.omega - params.g**2 / delta, v * rho
    elif regime == "dispersive-spinwave":
        if delta == 0.0:
            raise InvalidArgumentError("dispersive regimes need a non-zero detuning")
        omega_A, lam = params.omega0, v
    else:
        raise InvalidArgumentError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    return MatchingConditions(regime, omega_A, lam, suppression_ratio(params, v))


def swap_interface(left: JCParams, v_left: float) -> SwapInterface:
    """Interface couplings for a polariton -> spin-wave swap.

    ``lambda_C = v_l rho_{1-}``; dressing by the left polariton gives
    ``lambda_eff = rho_{1-} lambda_C``, which must equal the right-section
    TLS coupling ``v_r``. On a resonant left section ``v_r = v_l / 2``.
    """
    rho = coefficients(left, 1).rho_minus
    lambda_C = v_left * rho
    lambda_eff = rho * lambda_C
    return SwapInterface(lambda_C=lambda_C, lambda_eff=lambda_eff, v_r=lambda_eff)
