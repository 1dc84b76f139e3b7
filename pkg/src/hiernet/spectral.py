"""Jordan/spectral data for hierarchical networks.

The decomposition stores the full transformation pair: ``left_matrix`` has the
generalized left eigenvectors as rows (first row is the normalized all-ones
vector), ``right_matrix`` has the generalized right eigenvectors as columns
(first column is the dominant right eigenvector).  Their product is the
identity, and conjugating the weight matrix gives the Jordan matrix
``Diag(1, J_1, ..., J_T)`` with superdiagonal ones inside each block.

No numeric Jordan decomposition of arbitrary matrices is attempted: the
structure is discontinuous in the entries, so spectral data comes either from
the closed-form constructors below or from user-supplied matrices validated
against the invariants.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import HierarchicalNetwork, validate_network

__all__ = [
    "SpectralDecomposition",
    "Regime",
    "SpectralValidationError",
    "IdentityViolation",
    "JordanViolation",
    "NormalizationImpossible",
    "build_example1",
    "build_example2",
    "build_sim_network",
    "from_user_spectral",
    "classify_regime",
    "pairwise_projection",
    "spectral_to_json",
    "spectral_from_json",
]

IDENTITY_TOL = 1e-10
BOUNDARY_TOL = 1e-9


class SpectralValidationError(ValueError):
    pass


class IdentityViolation(SpectralValidationError):
    """left_matrix @ right_matrix is not the identity at tolerance."""


class JordanViolation(SpectralValidationError):
    """left_matrix @ W @ right_matrix is not the expected Jordan matrix."""


class NormalizationImpossible(SpectralValidationError):
    """The supplied dominant left eigenvector is not proportional to the all-ones vector."""


class Regime(Enum):
    """Second-order regime of the coupled process, set by (gamma, c, tau)."""

    SUBPOLYNOMIAL = "subpolynomial"            # 1/2 < gamma < 1
    CRITICAL_SUBCRITICAL = "critical_subcritical"  # gamma = 1, tau < 1 - 1/(2c)
    CRITICAL_BOUNDARY = "critical_boundary"        # gamma = 1, tau = 1 - 1/(2c)
    UNSUPPORTED = "unsupported"                    # gamma = 1, tau > 1 - 1/(2c)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues, Jordan block orders and generalized eigenvector matrices.

    ``eigenvalues[0]`` is the dominant eigenvalue 1; ``eigenvalues[t]`` for
    t >= 1 is the eigenvalue of the t-th Jordan block, whose order is
    ``block_orders[t-1]``.  Chains are stored head-first: within a block the
    generalized eigenvector at the smallest global column index is the true
    eigenvector, and W q_h = lambda q_h + q_{h-1} walks down the chain.
    """

    eigenvalues: np.ndarray        # complex, length T+1, [0] == 1
    block_orders: tuple[int, ...]  # length T
    left_matrix: np.ndarray        # (N, N) complex, rows are p_1 ... p_N
    right_matrix: np.ndarray       # (N, N) complex, columns are q_1 ... q_N

    @property
    def n_agents(self) -> int:
        return self.left_matrix.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.block_orders)

    @property
    def cumulative_indices(self) -> tuple[int, ...]:
        """(I_0, I_1, ..., I_T) with I_t the cumulative sum of block orders."""
        out, acc = [0], 0
        for r in self.block_orders:
            acc += r
            out.append(acc)
        return tuple(out)

    @property
    def tau(self) -> float:
        return float(max(ev.real for ev in self.eigenvalues[1:]))

    @property
    def tau_star(self) -> float:
        return float(min(ev.real for ev in self.eigenvalues[1:]))

    @property
    def rho(self) -> int:
        tau = self.tau
        return max(
            r for ev, r in zip(self.eigenvalues[1:], self.block_orders)
            if abs(ev.real - tau) <= BOUNDARY_TOL
        )

    # Convenience views ----------------------------------------------------

    @property
    def q1(self) -> np.ndarray:
        return self.right_matrix[:, 0]

    @property
    def p1(self) -> np.ndarray:
        return self.left_matrix[0, :]

    @property
    def P(self) -> np.ndarray:
        """N x (N-1) matrix with columns p_2, ..., p_N."""
        return self.left_matrix[1:, :].T

    @property
    def Q(self) -> np.ndarray:
        """N x (N-1) matrix with columns q_2, ..., q_N."""
        return self.right_matrix[:, 1:]

    @property
    def P_tilde_cols(self) -> np.ndarray:
        """N x N matrix with columns p_1, ..., p_N (transpose of left_matrix)."""
        return self.left_matrix.T

    def jordan_matrix(self) -> np.ndarray:
        n = self.n_agents
        jt = np.zeros((n, n), dtype=complex)
        jt[0, 0] = 1.0
        pos = 1
        for ev, order in zip(self.eigenvalues[1:], self.block_orders):
            for k in range(order):
                jt[pos + k, pos + k] = ev
                if k + 1 < order:
                    jt[pos + k, pos + k + 1] = 1.0
            pos += order
        return jt

    def entry_block(self, i: int) -> tuple[int, int]:
        """Block index u (1-based) and chain position of a 1-based S-entry index i.

        Entry i of the (N-1)-dimensional chain coordinates corresponds to the
        generalized eigenvector q_{i+1}; the returned position is
        i - I_{u-1} (1 at the chain head).
        """
        cum = self.cumulative_indices
        for u in range(1, len(cum)):
            if cum[u - 1] < i <= cum[u]:
                return u, i - cum[u - 1]
        raise IndexError(i)

    def gram(self) -> np.ndarray:
        """Plain-transpose Gram matrix of the right eigenvectors, G[a, b] = q_{a+1}^T q_{b+1}."""
        return self.right_matrix.T @ self.right_matrix

    def projector(self) -> np.ndarray:
        """Real N x N matrix P Q^T = I - q_1 p_1^T projecting onto the chain space."""
        mat = self.P @ self.Q.T
        if np.abs(mat.imag).max() > 1e-8:
            raise SpectralValidationError("projector has a non-trivial imaginary part")
        return mat.real

    def verify(self, weights: np.ndarray, tol: float = IDENTITY_TOL) -> None:
        """Raise if any decomposition invariant fails against ``weights``."""
        n = self.n_agents
        w = np.asarray(weights, dtype=float)
        if abs(self.eigenvalues[0] - 1.0) > tol:
            raise SpectralValidationError("dominant eigenvalue must be 1")
        if any(ev.real >= 1.0 for ev in self.eigenvalues[1:]):
            raise SpectralValidationError("non-dominant eigenvalues must have real part < 1")
        if sum(self.block_orders) != n - 1:
            raise SpectralValidationError("block orders must sum to N - 1")
        if not np.array_equal(self.p1, np.full(n, 1.0 / np.sqrt(n), dtype=complex)):
            raise NormalizationImpossible("p_1 must equal N**-0.5 * ones exactly")
        ident = self.left_matrix @ self.right_matrix
        if np.abs(ident - np.eye(n)).max() > tol:
            raise IdentityViolation(
                f"max |P~ Q~ - I| = {np.abs(ident - np.eye(n)).max():.3e}"
            )
        jordan = self.left_matrix @ w @ self.right_matrix
        resid = np.abs(jordan - self.jordan_matrix()).max()
        if resid > tol:
            raise JordanViolation(f"max |P~ W Q~ - J~| = {resid:.3e}")
        recon = np.outer(self.q1, self.p1) + self.Q @ self.jordan_matrix()[1:, 1:] @ self.P.T
        if np.abs(recon.imag).max() > tol:
            raise SpectralValidationError("reconstruction has a non-trivial imaginary part")
        if np.abs(recon.real - w).max() > tol:
            raise SpectralValidationError(
                f"max |q1 p1^T + Q J P^T - W| = {np.abs(recon.real - w).max():.3e}"
            )


def build_example1(n_agents: int, alpha: float) -> tuple[HierarchicalNetwork, SpectralDecomposition]:
    """Top-down cascade: agent 1 is autonomous, each later agent copies its
    predecessor with weight alpha and reinforces itself with 1 - alpha.

    The non-dominant spectrum is the single eigenvalue 1 - alpha with one
    Jordan chain of order N - 1.
    """
    n = int(n_agents)
    if n < 2:
        raise ValueError("n_agents must be >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    w = np.zeros((n, n))
    w[0, 0] = 1.0
    for i in range(1, n):
        w[i, i] = 1.0 - alpha
        w[i - 1, i] = alpha
    network = validate_network(w, (1,) * n)

    rt = np.sqrt(float(n))
    q = np.zeros((n, n), dtype=complex)
    p = np.zeros((n, n), dtype=complex)
    q[0, 0] = rt
    p[0, :] = 1.0 / rt
    for h in range(2, n + 1):
        q[0, h - 1] = rt * alpha ** (2 - h)
        q[h - 1, h - 1] = -rt * alpha ** (2 - h)
        p[h - 1, h - 1] = -(alpha ** (h - 2)) / rt
    spec = SpectralDecomposition(
        eigenvalues=np.array([1.0, 1.0 - alpha], dtype=complex),
        block_orders=(n - 1,),
        left_matrix=p,
        right_matrix=q,
    )
    spec.verify(w)
    return network, spec


def build_example2(
    n_leading: int, n_downstream: int, alpha: float, beta: float
) -> tuple[HierarchicalNetwork, SpectralDecomposition]:
    """Two-group hierarchy: a mean-field leading group with self-weight alpha
    feeding a downstream group whose agents self-reinforce with weight beta.

    Diagonalizable: eigenvalue alpha with N1 - 1 order-1 blocks, eigenvalue
    beta with N2 order-1 blocks.  The dominant right eigenvector is rescaled
    to sqrt(N)/N1 times the leading-group indicator so that the dominant pair
    satisfies the p_1^T q_1 = 1 normalization for every (N1, N2).
    """
    n1, n2 = int(n_leading), int(n_downstream)
    if n1 < 2 or n2 < 1:
        raise ValueError("need n_leading >= 2 and n_downstream >= 1")
    if not 0.0 < beta < alpha < 1.0:
        raise ValueError("parameters must satisfy 0 < beta < alpha < 1")
    n = n1 + n2
    w = np.zeros((n, n))
    w[:n1, :n1] = (1.0 - alpha) / n1
    w[:n1, :n1] += alpha * np.eye(n1)
    w[:n1, n1:] = (1.0 - beta) / n1
    w[n1:, n1:] = beta * np.eye(n2)
    network = validate_network(w, (n1, n2))

    rt = np.sqrt(float(n))
    lead = np.zeros(n)
    lead[:n1] = 1.0
    q = np.zeros((n, n), dtype=complex)
    p = np.zeros((n, n), dtype=complex)
    q[:, 0] = (rt / n1) * lead
    p[0, :] = 1.0 / rt
    for h in range(2, n1 + 1):
        p[h - 1, :] = (lead - n1 * _unit(n, h - 1)) / rt
        q[:, h - 1] = (rt / n1) * (_unit(n, 0) - _unit(n, h - 1))
    for h in range(n1 + 1, n + 1):
        p[h - 1, :] = (n1 / rt) * _unit(n, h - 1)
        q[:, h - 1] = (rt / n1) * (-lead / n1 + _unit(n, h - 1))
    spec = SpectralDecomposition(
        eigenvalues=np.array([1.0] + [alpha] * (n1 - 1) + [beta] * n2, dtype=complex),
        block_orders=(1,) * (n - 1),
        left_matrix=p,
        right_matrix=q,
    )
    spec.verify(w)
    return network, spec


def build_sim_network(alpha: float, beta: float) -> tuple[HierarchicalNetwork, SpectralDecomposition]:
    """The four-agent two-group network of the simulation study, blocks (2, 2).

    Closed-form spectrum {1, 2*alpha - 1, beta, beta}, diagonalizable for all
    parameter values (the explicit eigenbasis below stays independent even at
    the eigenvalue collision 2*alpha - 1 = beta).
    """
    a, b = float(alpha), float(beta)
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError("alpha and beta must lie in (0, 1)")
    w = np.array(
        [
            [a, 1.0 - a, (1.0 - b) / 2.0, (1.0 - b) / 2.0],
            [1.0 - a, a, (1.0 - b) / 2.0, (1.0 - b) / 2.0],
            [0.0, 0.0, b, 0.0],
            [0.0, 0.0, 0.0, b],
        ]
    )
    network = validate_network(w, (2, 2))
    q = np.array(
        [
            [1.0, 1.0, -0.5, -0.5],
            [1.0, -1.0, -0.5, -0.5],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
        dtype=complex,
    )
    p = np.array(
        [
            [0.5, 0.5, 0.5, 0.5],
            [0.5, -0.5, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
        dtype=complex,
    )
    spec = SpectralDecomposition(
        eigenvalues=np.array([1.0, 2.0 * a - 1.0, b, b], dtype=complex),
        block_orders=(1, 1, 1),
        left_matrix=p,
        right_matrix=q,
    )
    try:
        spec.verify(w)
    except SpectralValidationError as exc:  # pragma: no cover - defensive
        raise SpectralValidationError(
            f"closed-form eigenbasis failed validation at alpha={a}, beta={b}: {exc}"
        ) from exc
    return network, spec


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def from_user_spectral(
    network: HierarchicalNetwork,
    eigenvalues,
    block_orders,
    left_matrix,
    right_matrix,
) -> SpectralDecomposition:
    """Validate user-supplied spectral data against the decomposition invariants.

    The dominant pair is rescaled so that p_1 equals N**-0.5 times the all-ones
    vector (and q_1 is scaled inversely, preserving every identity).  Raises
    :class:`NormalizationImpossible` if p_1 is not proportional to the all-ones
    vector, :class:`IdentityViolation` / :class:`JordanViolation` for the
    matrix identities.
    """
    p = np.array(left_matrix, dtype=complex)
    q = np.array(right_matrix, dtype=complex)
    evs = np.asarray(eigenvalues, dtype=complex)
    orders = tuple(int(r) for r in block_orders)
    n = network.n_agents
    if p.shape != (n, n) or q.shape != (n, n):
        raise ValueError("left_matrix and right_matrix must be N x N")
    if len(evs) != len(orders) + 1:
        raise ValueError("need one eigenvalue per Jordan block plus the dominant one")

    target = np.full(n, 1.0 / np.sqrt(n), dtype=complex)
    p1 = p[0, :]
    scales = p1 / target
    s = scales.mean()
    if abs(s) < 1e-300 or np.abs(scales - s).max() > 1e-8 * max(1.0, abs(s)):
        raise NormalizationImpossible(
            "supplied p_1 is not proportional to the all-ones vector"
        )
    p[0, :] = target
    q[:, 0] = q[:, 0] * s

    spec = SpectralDecomposition(
        eigenvalues=evs, block_orders=orders, left_matrix=p, right_matrix=q
    )
    spec.verify(network.weights)
    return spec


def classify_regime(gamma: float, c: float, spectral: SpectralDecomposition) -> Regime:
    """Regime of the coupled process for step sizes ~ c * n**-gamma.

    Total on its inputs: the unsupported case (gamma = 1 with tau above the
    critical boundary, where no limit law is available) is returned as a
    value, not raised, so callers can refuse covariance computation explicitly.
    """
    if gamma < 1.0:
        return Regime.SUBPOLYNOMIAL
    threshold = 1.0 - 1.0 / (2.0 * c)
    tau = spectral.tau
    if abs(tau - threshold) <= BOUNDARY_TOL:
        return Regime.CRITICAL_BOUNDARY
    if tau < threshold:
        return Regime.CRITICAL_SUBCRITICAL
    return Regime.UNSUPPORTED


def pairwise_projection(
    spectral: SpectralDecomposition, i: int, j: int
) -> tuple[np.ndarray, np.ndarray]:
    """Row difference of the chain-coordinate projection for agents i and j
    (0-based): p_ij = row i of P minus row j of P, and its zero-padded
    extension (0, p_ij) of length N.
    """
    if i == j:
        raise ValueError("agent indices must differ")
    n = spectral.n_agents
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError((i, j))
    pmat = spectral.P
    p_ij = pmat[i, :] - pmat[j, :]
    ptil_ij = np.concatenate(([0.0 + 0.0j], p_ij))
    return p_ij, ptil_ij


# JSON import/export --------------------------------------------------------


def _complex_to_pairs(arr: np.ndarray):
    a = np.asarray(arr, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def spectral_to_json(spec: SpectralDecomposition) -> dict:
    """JSON-serializable dict: eigenvalues as [re, im] pairs, block orders,
    and the two transformation matrices row-major with [re, im] entries."""
    return {
        "eigenvalues": _complex_to_pairs(spec.eigenvalues),
        "block_orders": list(spec.block_orders),
        "P_tilde": _complex_to_pairs(spec.left_matrix),
        "Q_tilde": _complex_to_pairs(spec.right_matrix),
    }


def spectral_from_json(network: HierarchicalNetwork, data: dict) -> SpectralDecomposition:
    """Inverse of :func:`spectral_to_json`, validated via :func:`from_user_spectral`."""
    required = {"eigenvalues", "block_orders", "P_tilde", "Q_tilde"}
    missing = required - set(data)
    if missing:
        raise ValueError(f"spectral JSON missing keys: {sorted(missing)}")
    return from_user_spectral(
        network,
        _pairs_to_complex(data["eigenvalues"]),
        data["block_orders"],
        _pairs_to_complex(data["P_tilde"]),
        _pairs_to_complex(data["Q_tilde"]),
    )
