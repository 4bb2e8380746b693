"""Matrix product states in Vidal form for chains of mixed local dimension.

The state is stored as site tensors ``Gamma[j]`` of shape
``(chi_left, d_j, chi_right)`` and bond weight vectors ``lambdas[j]`` for
``j = 0..L``; the two boundary weight vectors are ``[1.0]``. Bond ``b`` joins
sites ``b`` and ``b + 1`` and its Schmidt weights are ``lambdas[b + 1]``.

Two-site gates are applied by contracting ``lambda Gamma lambda Gamma lambda``,
applying the gate, and splitting the result with a thresholded SVD:
singular values at or below ``epsilon0`` are dropped, at most ``chi_max`` are
kept, the kept weights are renormalized, and the discarded weight
``eps_n = 1 - (norm_new / norm_old)**2`` is recorded in a
:class:`TruncationLedger`, whose total error is ``1 - prod(1 - 2 eps_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateStateError, InvalidArgumentError, NumericalError

# weights below this are treated as unpopulated when dividing them out
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class TruncationPolicy:
    chi_max: int = 4
    epsilon0: float = 1e-6

    def __post_init__(self) -> None:
        if int(self.chi_max) != self.chi_max or self.chi_max < 1:
            raise InvalidArgumentError(f"chi_max must be an integer >= 1, got {self.chi_max}")
        if not self.epsilon0 >= 0:
            raise InvalidArgumentError(f"epsilon0 must be >= 0, got {self.epsilon0}")


class TruncationLedger:
    """Per-split truncation records with a running ``prod(1 - 2 eps_n)``.

    Records are kept in growable columnar arrays (step, bond, eps, kept rank)
    so that millions of splits stay cheap to store.
    """

    def __init__(self) -> None:
        self._n = 0
        self._steps = np.empty(1024, dtype=np.int64)
        self._bonds = np.empty(1024, dtype=np.int32)
        self._eps = np.empty(1024, dtype=np.float64)
        self._kept = np.empty(1024, dtype=np.int32)
        self.product = 1.0
        self.eps_sum = 0.0

    def __len__(self) -> int:
        return self._n

    def _grow(self, extra: int) -> None:
        need = self._n + extra
        if need <= len(self._eps):
            return
        size = max(need, 2 * len(self._eps))
        for name in ("_steps", "_bonds", "_eps", "_kept"):
            old = getattr(self, name)
            new = np.empty(size, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def append(self, step: int, bond: int, eps: float, kept: int) -> None:
        if not 0.0 <= eps <= 1.0:
            raise InvalidArgumentError(f"truncation weight must lie in [0, 1], got {eps}")
        self._grow(1)
        i = self._n
        self._steps[i], self._bonds[i], self._eps[i], self._kept[i] = step, bond, eps, kept
        self._n += 1
        self.product *= 1.0 - 2.0 * eps
        self.eps_sum += eps

    def extend(self, step: int, bonds: Sequence[int], eps: np.ndarray, kept: np.ndarray) -> None:
        eps = np.asarray(eps, dtype=np.float64)
        if eps.size == 0:
            return
        if eps.min() < 0.0 or eps.max() > 1.0:
            raise InvalidArgumentError("truncation weights must lie in [0, 1]")
        self._grow(eps.size)
        sl = slice(self._n, self._n + eps.size)
        self._steps[sl] = step
        self._bonds[sl] = bonds
        self._eps[sl] = eps
        self._kept[sl] = kept
        self._n += eps.size
        self.product *= float(np.prod(1.0 - 2.0 * eps))
        self.eps_sum += float(eps.sum())

    @property
    def steps(self) -> np.ndarray:
        return self._steps[: self._n]

    @property
    def bonds(self) -> np.ndarray:
        return self._bonds[: self._n]

    @property
    def eps(self) -> np.ndarray:
        return self._eps[: self._n]

    @property
    def kept(self) -> np.ndarray:
        return self._kept[: self._n]

    def truncation_error(self) -> float:
        return 1.0 - self.product


def truncation_error(ledger: TruncationLedger) -> float:
    """``1 - prod_n (1 - 2 eps_n)`` over every recorded split."""
    return ledger.truncation_error()


# rows and columns of a theta matrix holding less than this fraction of its
# squared norm are left out of the SVD; their weight is booked in eps_n
NEGLIGIBLE = 1e-28


def _svd(matrix: np.ndarray):
    try:
        return np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def split_matrix(
    m: np.ndarray, policy: TruncationPolicy
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Thresholded, capped SVD of a matrix: ``(u, weights, vh, eps)``.

    ``u`` is ``rows x k`` with orthonormal columns, ``vh`` is ``k x cols``
    with orthonormal rows, ``weights`` are the kept singular values scaled to
    unit norm, and ``eps = 1 - (norm_new / norm_old)**2``.
    """
    p = m.real * m.real + m.imag * m.imag
    row_w = p.sum(axis=1)
    total = float(row_w.sum())
    if not np.isfinite(total):
        raise NumericalError("non-finite entries in the two-site tensor")
    if total == 0.0:
        raise DegenerateStateError("the two-site tensor vanished")
    cut = NEGLIGIBLE * total
    rows = row_w > cut
    cols = p.sum(axis=0) > cut
    n_rows, n_cols = int(rows.sum()), int(cols.sum())
    sub = m[rows][:, cols]
    sub_total = float(p[rows][:, cols].sum())
    if n_rows == 1 or n_cols == 1:
        # rank one: the SVD is a normalization
        norm = np.sqrt(sub_total)
        s = np.array([norm])
        if n_rows == 1:
            u, vh = np.ones((1, 1), dtype=complex), sub / norm
        else:
            u, vh = sub / norm, np.ones((1, 1), dtype=complex)
    else:
        u, s, vh = _svd(sub)
    n_kept = int(np.count_nonzero(s > policy.epsilon0))
    if n_kept == 0:
        raise DegenerateStateError(
            f"all singular values are <= epsilon0={policy.epsilon0}; the state vanished"
        )
    k = min(policy.chi_max, n_kept)
    kept = s[:k]
    kept_sq = float(kept @ kept)
    # discarded = weight outside the SVD block plus the dropped singular values
    discarded = max(total - sub_total, 0.0) + float(s[k:] @ s[k:])
    eps = min(discarded / total, 1.0)
    if n_rows == m.shape[0]:
        u_full = np.ascontiguousarray(u[:, :k])
    else:
        u_full = np.zeros((m.shape[0], k), dtype=complex)
        u_full[rows] = u[:, :k]
    if n_cols == m.shape[1]:
        vh_full = vh[:k]
    else:
        vh_full = np.zeros((k, m.shape[1]), dtype=complex)
        vh_full[:, cols] = vh[:k]
    return u_full, kept / np.sqrt(kept_sq), vh_full, eps


def split_and_truncate(
    theta: np.ndarray, policy: TruncationPolicy
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Split a two-site tensor ``(chi_l, d_a, d_b, chi_r)`` by a truncated SVD.

    Returns ``(left, weights, right, eps)``: ``left`` has shape
    ``(chi_l, d_a, k)`` with orthonormal columns, ``right`` has shape
    ``(k, d_b, chi_r)`` with orthonormal rows, and ``weights`` are the kept
    singular values scaled to unit 2-norm.
    """
    if theta.ndim != 4:
        raise InvalidArgumentError(f"theta must be rank 4, got shape {theta.shape}")
    chi_l, d_a, d_b, chi_r = theta.shape
    u, weights, vh, eps = split_matrix(theta.reshape(chi_l * d_a, d_b * chi_r), policy)
    k = weights.size
    return u.reshape(chi_l, d_a, k), weights, vh.reshape(k, d_b, chi_r), eps


def _inverse_weights(lam: np.ndarray) -> np.ndarray:
    """Elementwise ``1 / lam`` with weights at or below ``WEIGHT_FLOOR`` mapped to 0."""
    safe = np.where(lam > WEIGHT_FLOOR, lam, 1.0)
    return np.where(lam > WEIGHT_FLOOR, 1.0 / safe, 0.0)


def check_unitary(gate: np.ndarray, atol: float = 1e-10) -> None:
    if gate.ndim != 2 or gate.shape[0] != gate.shape[1]:
        raise InvalidArgumentError(f"gate must be square, got shape {gate.shape}")
    dev = np.max(np.abs(gate.conj().T @ gate - np.eye(gate.shape[0])))
    if dev > atol:
        raise InvalidArgumentError(f"gate is not unitary (deviation {dev:.2e})")


class MatrixProductState:
    """Finite MPS in Vidal form (see module docstring for the layout)."""

    def __init__(self, gammas: Sequence[np.ndarray], lambdas: Sequence[np.ndarray]):
        gammas = [np.asarray(g, dtype=complex) for g in gammas]
        lambdas = [np.asarray(l, dtype=float) for l in lambdas]
        if len(lambdas) != len(gammas) + 1:
            raise InvalidArgumentError("need one more weight vector than site tensors")
        if lambdas[0].shape != (1,) or lambdas[-1].shape != (1,):
            raise InvalidArgumentError("boundary bonds must have dimension 1")
        for j, g in enumerate(gammas):
            if g.ndim != 3 or g.shape[0] != lambdas[j].size or g.shape[2] != lambdas[j + 1].size:
                raise InvalidArgumentError(f"site tensor {j} has inconsistent shape {g.shape}")
        self.gammas = gammas
        self.lambdas = lambdas
        self._dims = tuple(g.shape[1] for g in gammas)
        self._inv = [_inverse_weights(l) for l in lambdas]

    @classmethod
    def from_product_state(
        cls, vectors: Sequence[np.ndarray], policy: TruncationPolicy | None = None
    ) -> MatrixProductState:
        """Bond-dimension-1 MPS of a product state.

        ``policy`` is accepted for symmetry with the evolution API; a product
        state never needs truncation.
        """
        gammas = []
        for j, vec in enumerate(vectors):
            vec = np.asarray(vec, dtype=complex)
            if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
                raise InvalidArgumentError(f"local vector {j} is not normalized")
            gammas.append(vec.reshape(1, -1, 1).copy())
        lambdas = [np.ones(1) for _ in range(len(vectors) + 1)]
        return cls(gammas, lambdas)

    def copy(self) -> MatrixProductState:
        return MatrixProductState([g.copy() for g in self.gammas], [l.copy() for l in self.lambdas])

    @property
    def L(self) -> int:
        return len(self.gammas)

    @property
    def dims(self) -> tuple[int, ...]:
        return self._dims

    @property
    def bond_dimensions(self) -> list[int]:
        """Dimension of each internal bond ``0..L-2``."""
        return [l.size for l in self.lambdas[1:-1]]

    def bond_weights(self, bond: int) -> np.ndarray:
        return self.lambdas[bond + 1]

    # --- gate application -----------------------------------------------

    def theta(self, bond: int) -> np.ndarray:
        """``lambda Gamma lambda Gamma lambda`` around ``bond``, shape ``(chi_l, d_a, d_b, chi_r)``."""
        la, lm, lr = self.lambdas[bond], self.lambdas[bond + 1], self.lambdas[bond + 2]
        ga = self.gammas[bond] * la[:, None, None] * lm[None, None, :]
        gb = self.gammas[bond + 1] * lr[None, None, :]
        return np.tensordot(ga, gb, axes=(2, 0))

    def _check_bond(self, bond: int) -> None:
        if not 0 <= bond < self.L - 1:
            raise InvalidArgumentError(f"bond index {bond} out of range for L={self.L}")

    def _apply(self, bond: int, gate: np.ndarray, policy: TruncationPolicy, step: int):
        d_a, d_b = self._dims[bond], self._dims[bond + 1]
        la, lm, lr = self.lambdas[bond], self.lambdas[bond + 1], self.lambdas[bond + 2]
        ga, gb = self.gammas[bond], self.gammas[bond + 1]
        chi_l, chi_m, chi_r = la.size, lm.size, lr.size
        left = (ga * la[:, None, None]).reshape(chi_l * d_a, chi_m) * lm
        right = (gb * lr).reshape(chi_m, d_b * chi_r)
        theta = (left @ right).reshape(chi_l, d_a * d_b, chi_r)
        # the gate acts on the fused physical index
        if chi_l == 1:
            theta = (gate @ theta[0]).reshape(1, d_a * d_b, chi_r)
        else:
            theta = np.matmul(gate, theta)
        try:
            u, weights, vh, eps = split_matrix(theta.reshape(chi_l * d_a, d_b * chi_r), policy)
        except NumericalError as exc:
            exc.step, exc.bond = step, bond
            raise
        k = weights.size
        self.gammas[bond] = u.reshape(chi_l, d_a, k) * self._inv[bond][:, None, None]
        self.gammas[bond + 1] = vh.reshape(k, d_b, chi_r) * self._inv[bond + 2]
        self.lambdas[bond + 1] = weights
        self._inv[bond + 1] = _inverse_weights(weights)
        return eps, k

    def _check_gate(self, bond: int, gate: np.ndarray) -> None:
        self._check_bond(bond)
        d_a, d_b = self._dims[bond], self._dims[bond + 1]
        if gate.shape != (d_a * d_b, d_a * d_b):
            raise InvalidArgumentError(
                f"gate shape {gate.shape} does not match local dimensions {d_a}x{d_b}"
            )

    def apply_two_site_gate(
        self,
        bond: int,
        gate: np.ndarray,
        policy: TruncationPolicy,
        ledger: TruncationLedger | None = None,
        step: int = 0,
        check: bool = True,
    ) -> float:
        """Apply a two-site unitary on ``bond`` in place and return ``eps_n``."""
        self._check_gate(bond, gate)
        if check:
            check_unitary(gate)
        eps, k = self._apply(bond, gate, policy, step)
        if ledger is not None:
            ledger.append(step, bond, eps, k)
        return eps

    def apply_layer(
        self,
        bonds: Sequence[int],
        gates: Sequence[np.ndarray],
        policy: TruncationPolicy,
        ledger: TruncationLedger | None = None,
        step: int = 0,
    ) -> np.ndarray:
        """Apply gates on mutually disjoint bonds; returns ``eps_n`` per bond.

        Gates are taken as already validated (shape is checked, unitarity is
        not). Since the bonds share no site, the order of application does
        not matter.
        """
        bonds = list(bonds)
        touched = [s for b in bonds for s in (b, b + 1)]
        if len(touched) != len(set(touched)):
            raise InvalidArgumentError("layer bonds must act on disjoint sites")
        eps_out = np.zeros(len(bonds))
        kept_out = np.zeros(len(bonds), dtype=np.int32)
        for i, (b, gate) in enumerate(zip(bonds, gates)):
            self._check_gate(b, gate)
            eps_out[i], kept_out[i] = self._apply(b, gate, policy, step)
        if ledger is not None:
            ledger.extend(step, bonds, eps_out, kept_out)
        return eps_out

    # --- measurement -----------------------------------------------------

    def site_tensor(self, site: int) -> np.ndarray:
        """``lambda_left Gamma lambda_right`` at ``site``."""
        return (
            self.gammas[site]
            * self.lambdas[site][:, None, None]
            * self.lambdas[site + 1][None, None, :]
        )

    def site_rdm(self, site: int) -> np.ndarray:
        t = self.site_tensor(site)
        return np.einsum("aib,ajb->ij", t, t.conj())

    def bond_rdm(self, bond: int) -> np.ndarray:
        """Two-site reduced density matrix on ``bond``, shape ``(d_a d_b, d_a d_b)``."""
        t = self.theta(bond)
        d = t.shape[1] * t.shape[2]
        t = t.reshape(t.shape[0], d, t.shape[3])
        return np.einsum("aib,ajb->ij", t, t.conj())

    def expectation_local(self, site: int, operator: np.ndarray) -> complex:
        """``<psi| O_site |psi>`` from the canonical environment of ``site``."""
        d = self.dims[site]
        if operator.shape != (d, d):
            raise InvalidArgumentError(
                f"operator shape {operator.shape} does not match site dimension {d}"
            )
        return complex(np.trace(self.site_rdm(site) @ operator))

    def expectation_two_site(self, bond: int, operator: np.ndarray) -> complex:
        d = self.dims[bond] * self.dims[bond + 1]
        if operator.shape != (d, d):
            raise InvalidArgumentError("operator does not match the bond dimensions")
        return complex(np.trace(self.bond_rdm(bond) @ operator))

    def norm(self) -> float:
        """2-norm from a full transfer-matrix contraction (no gauge assumption)."""
        env = np.ones((1, 1), dtype=complex)
        for j, g in enumerate(self.gammas):
            a = g * self.lambdas[j + 1][None, None, :]
            env = np.einsum("ab,aic,bid->cd", env, a, a.conj())
        return float(np.sqrt(abs(env[0, 0].real)))

    def to_dense(self) -> np.ndarray:
        """Full state vector (site-major ordering); only sensible for short chains."""
        psi = np.ones((1, 1), dtype=complex)
        for j, g in enumerate(self.gammas):
            a = g * self.lambdas[j + 1][None, None, :]
            psi = np.tensordot(psi, a, axes=(1, 0)).reshape(-1, a.shape[2])
        return psi[:, 0]


def expectation_local(mps: MatrixProductState, site: int, operator: np.ndarray) -> complex:
    return mps.expectation_local(site, operator)
