"""Asymptotic covariance objects of the coupled process, per regime.

All entry formulas are finite sums over Jordan-chain offsets.  Entry index
``i`` of a chain-space matrix (1-based, i = 1..N-1) corresponds to the
generalized right eigenvector ``q_{i+1}``, so the chain walk ``q_{i-t+1}``
moves ``t`` steps toward the chain head.  Sums whose upper limit is below the
lower limit contribute zero; this empty-sum convention is exactly what makes
the order-1 (diagonalizable) case collapse to the single-term closed forms.

Everything is computed in complex arithmetic; assembled covariance matrices
are validated to be real (conjugate eigenvalue pairs cancel) and returned as
real arrays.  The per-trajectory mixture factor is never included: reports
are per unit mixture, callers apply their own estimate of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial, log

import numpy as np

from .model import StepSizeSchedule
from .spectral import Regime, SpectralDecomposition, classify_regime, pairwise_projection

__all__ = [
    "AuxInputs",
    "CovarianceReport",
    "RegimeError",
    "ZeroDenominator",
    "aux_N1",
    "aux_N2",
    "aux_N3",
    "aux_N4",
    "aux_D1",
    "aux_D2",
    "aux_N_D",
    "aux_H",
    "sigma_tilde_sq",
    "gamma_hat_sq",
    "s_gamma",
    "s_zz",
    "s_zn",
    "s_nn",
    "s_starred",
    "assemble_joint",
    "covariance_report",
    "pairwise_sync_cov",
    "limit_sum_oracle",
    "limit_sum_analytic",
]

IMAG_TOL = 1e-8
PAIR_TOL = 1e-9


class RegimeError(ValueError):
    """Operation invoked outside the regime it is defined for."""


class ZeroDenominator(ZeroDivisionError):
    def __init__(self, kind: str, k: int, m: int):
        self.kind, self.k, self.m = kind, k, m
        super().__init__(f"{kind} vanishes at (k={k}, m={m})")


# Auxiliary functions --------------------------------------------------------


@dataclass(frozen=True)
class AuxInputs:
    """Arguments of the combinatorial auxiliary functions."""

    k: int
    m: int = 0
    lam_a: complex = 0.0
    lam_b: complex = 0.0
    c: float = 1.0
    C1: complex = 0.0
    C2: complex = 0.0
    C3: complex = 0.0


def aux_N1(k: int, m: int, lam_b: complex, c: float) -> complex:
    """Geometric sum over q = 0..k-m of [c(1-lam_b)]^q (0 when m > k)."""
    base = c * (1.0 - lam_b)
    return sum(base**q for q in range(k - m + 1)) if m <= k else 0.0 + 0.0j


def aux_N2(k: int, lam_a: complex, lam_b: complex, c: float) -> complex:
    a = c * (1.0 - lam_a)
    b = c * (1.0 - lam_b) - 1.0
    return sum(comb(k + 1, q) * a**q * b ** (k - q) for q in range(k + 1))


def aux_N3(k: int, lam_a: complex, c: float) -> complex:
    return (c * (1.0 - lam_a)) ** (k + 1)


def aux_N4(k: int, lam_a: complex, c: float) -> complex:
    base = c * (1.0 - lam_a) - 1.0
    return sum(base ** (k - q) for q in range(k + 1))


def aux_D1(k: int, m: int, lam_a: complex, lam_b: complex, c: float) -> complex:
    return (c * (1.0 - lam_a)) ** (k + 1) * (c * (1.0 - lam_b)) ** (k + 1 - m)


def aux_D2(k: int, m: int, lam_a: complex, lam_b: complex, c: float) -> complex:
    return aux_D1(k, m, lam_a, lam_b, c) * (-1.0 + c * (2.0 - lam_a - lam_b)) ** (k + 1)


_AUX_DISPATCH = {
    "N1": lambda a: aux_N1(a.k, a.m, a.lam_b, a.c),
    "N2": lambda a: aux_N2(a.k, a.lam_a, a.lam_b, a.c),
    "N3": lambda a: aux_N3(a.k, a.lam_a, a.c),
    "N4": lambda a: aux_N4(a.k, a.lam_a, a.c),
    "D1": lambda a: aux_D1(a.k, a.m, a.lam_a, a.lam_b, a.c),
    "D2": lambda a: aux_D2(a.k, a.m, a.lam_a, a.lam_b, a.c),
}


def aux_N_D(kind: str, inputs: AuxInputs) -> complex:
    """Evaluate one of the named finite sums/products N1..N4, D1, D2."""
    try:
        fn = _AUX_DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown auxiliary function {kind!r}") from None
    return complex(fn(inputs))


def aux_H(inputs: AuxInputs) -> complex:
    """Combinatorial kernel of the non-diagonalizable action-mean covariance."""
    k, c = inputs.k, inputs.c
    lam_a, lam_b = inputs.lam_a, inputs.lam_b
    shift = c * (1.0 - lam_a) - 1.0
    n2 = aux_N2(k, lam_a, lam_b, c)
    n3 = aux_N3(k, lam_a, c)
    total = 0.0 + 0.0j
    for m in range(k + 1):
        d1 = aux_D1(k, m, lam_a, lam_b, c)
        d2 = aux_D2(k, m, lam_a, lam_b, c)
        if d1 == 0:
            raise ZeroDenominator("D1", k, m)
        if d2 == 0:
            raise ZeroDenominator("D2", k, m)
        total += comb(k + 1, m) * shift ** (k - m) * (
            inputs.C1 * aux_N1(k, m, lam_b, c) / d1
            + (inputs.C2 * n2 + inputs.C3 * n3) / d2
        )
    return factorial(k) * total


def _H(k, lam_a, lam_b, c, C1, C2, C3) -> complex:
    return aux_H(AuxInputs(k=k, lam_a=lam_a, lam_b=lam_b, c=c, C1=C1, C2=C2, C3=C3))


# Scalar blocks --------------------------------------------------------------


def sigma_tilde_sq(gamma: float, c: float, q1, n_agents: int) -> float:
    """Variance scale of the synchronized component, c^2 ||q1||^2 / (N (2 gamma - 1))."""
    if not 0.5 < gamma <= 1.0:
        raise ValueError("gamma must lie in (1/2, 1]")
    q1 = np.asarray(q1)
    norm_sq = float(np.real(np.vdot(q1, q1)))
    return c * c * norm_sq / (n_agents * (2.0 * gamma - 1.0))


def gamma_hat_sq(gamma: float, c: float, q1, n_agents: int) -> float:
    """Variance scale of the action-mean deviation, c^2 ||q1||^2 / (N (3 - 2 gamma))."""
    q1 = np.asarray(q1)
    norm_sq = float(np.real(np.vdot(q1, q1)))
    return c * c * norm_sq / (n_agents * (3.0 - 2.0 * gamma))


def _ones_block(scale: float, n: int) -> np.ndarray:
    return scale * np.ones((n, n))


def _realify(mat: np.ndarray, name: str, tol: float = IMAG_TOL) -> np.ndarray:
    resid = float(np.abs(mat.imag).max()) if np.iscomplexobj(mat) else 0.0
    if resid > tol:
        raise ValueError(f"{name} has imaginary residue {resid:.3e} > {tol}")
    return np.array(mat.real if np.iscomplexobj(mat) else mat, dtype=float)


def _require_regime(spectral: SpectralDecomposition, c: float, wanted: Regime, op: str):
    got = classify_regime(1.0, c, spectral)
    if got is not wanted:
        raise RegimeError(f"{op} requires regime {wanted.value}, got {got.value}")


# Chain-space matrices -------------------------------------------------------


def s_gamma(spectral: SpectralDecomposition, gamma: float, c: float):
    """Chain-space covariance of the slow-regime chain component and its
    agent-space assembly (used for 1/2 < gamma < 1; the entries themselves do
    not depend on gamma)."""
    if not gamma < 1.0:
        raise RegimeError("s_gamma is defined for gamma < 1")
    n = spectral.n_agents
    gram = spectral.gram()
    evs = spectral.eigenvalues
    s = np.zeros((n - 1, n - 1), dtype=complex)
    for i in range(1, n):
        u, it = spectral.entry_block(i)
        for j in range(1, n):
            v, jt = spectral.entry_block(j)
            denom = 2.0 - evs[u] - evs[v]
            acc = 0.0 + 0.0j
            for t in range(it):
                for sdx in range(jt):
                    acc += (
                        c
                        * factorial(t + sdx)
                        / denom ** (t + sdx + 1)
                        * gram[i - t, j - sdx]
                    )
            s[i - 1, j - 1] = acc
    sigma = _realify(spectral.P @ s @ spectral.P.T, "Sigma_gamma_hat")
    return s, sigma


def s_zz(spectral: SpectralDecomposition, c: float):
    """Chain-space inclination covariance at gamma = 1 below the critical
    boundary, and its agent-space assembly."""
    _require_regime(spectral, c, Regime.CRITICAL_SUBCRITICAL, "s_zz")
    n = spectral.n_agents
    gram = spectral.gram()
    evs = spectral.eigenvalues
    s = np.zeros((n - 1, n - 1), dtype=complex)
    for i in range(1, n):
        u, it = spectral.entry_block(i)
        for j in range(1, n):
            v, jt = spectral.entry_block(j)
            denom = -1.0 + c * (2.0 - evs[u] - evs[v])
            acc = 0.0 + 0.0j
            for t in range(it):
                for sdx in range(jt):
                    acc += (
                        c ** (t + sdx + 2)
                        * factorial(t + sdx)
                        / denom ** (t + sdx + 1)
                        * gram[i - t, j - sdx]
                    )
            s[i - 1, j - 1] = acc
    sigma = _realify(spectral.P @ s @ spectral.P.T, "Sigma_ZZ")
    return s, sigma


def s_zn(spectral: SpectralDecomposition, c: float):
    """Chain-space cross covariance between inclinations and action means at
    gamma = 1 below the boundary; shape (N-1, N), column 0 couples to the
    dominant direction."""
    _require_regime(spectral, c, Regime.CRITICAL_SUBCRITICAL, "s_zn")
    n = spectral.n_agents
    gram = spectral.gram()
    evs = spectral.eigenvalues
    s = np.zeros((n - 1, n), dtype=complex)
    for i in range(1, n):
        u, it = spectral.entry_block(i)
        lam_u = evs[u]
        s[i - 1, 0] = (1.0 - c) * sum(
            factorial(t) / (1.0 - lam_u) ** (t + 1) * gram[i - t, 0] for t in range(it)
        )
        for j in range(1, n):
            v, jt = spectral.entry_block(j)
            lam_v = evs[v]
            acc = 0.0 + 0.0j
            for sdx in range(1, jt):
                for t in range(it):
                    k1 = t + sdx - 1
                    k2 = t + sdx
                    acc += (
                        gram[i - t, j - sdx]
                        * c ** (t + sdx + 1)
                        * (
                            factorial(k1)
                            * aux_N2(k1, lam_u, lam_v, c)
                            / aux_D2(k1, k1 + 1, lam_u, lam_v, c)
                            + lam_v
                            * c
                            * factorial(k2)
                            * aux_N2(k2, lam_u, lam_v, c)
                            / aux_D2(k2, k2 + 1, lam_u, lam_v, c)
                        )
                    )
            for t in range(it):
                acc += (
                    gram[i - t, j]
                    * c ** (t + 1)
                    * factorial(t)
                    * ((c - 1.0) * aux_N2(t, lam_u, lam_v, c) + aux_N3(t, lam_u, c))
                    / aux_D2(t, t + 1, lam_u, lam_v, c)
                )
            s[i - 1, j] = acc
    sigma = _realify(spectral.P @ s @ spectral.P_tilde_cols.T, "Sigma_ZN")
    return s, sigma


def s_nn(spectral: SpectralDecomposition, c: float):
    """Chain-space action-mean covariance at gamma = 1 below the boundary,
    shape N x N (row/column 0 couple to the dominant direction)."""
    _require_regime(spectral, c, Regime.CRITICAL_SUBCRITICAL, "s_nn")
    n = spectral.n_agents
    gram = spectral.gram()
    evs = spectral.eigenvalues
    s = np.zeros((n, n), dtype=complex)
    s[0, 0] = (c - 1.0) ** 2 * gram[0, 0]

    for j in range(1, n):
        v, jt = spectral.entry_block(j)
        lam_v = evs[v]
        val = gram[j, 0] * (1.0 - c) / (1.0 - lam_v)
        for sdx in range(1, jt):
            val += (
                gram[j - sdx, 0]
                * c ** (sdx - 1)
                * (1.0 / c - 1.0)
                * (
                    c**2
                    * factorial(sdx - 1)
                    * aux_N4(sdx - 1, lam_v, c)
                    / aux_N3(sdx - 1, lam_v, c)
                    + c**3
                    * lam_v
                    * factorial(sdx)
                    * aux_N4(sdx, lam_v, c)
                    / aux_N3(sdx, lam_v, c)
                )
            )
        s[0, j] = val
        s[j, 0] = val

    for i in range(1, n):
        u, it = spectral.entry_block(i)
        lam_u = evs[u]
        for j in range(1, n):
            v, jt = spectral.entry_block(j)
            lam_v = evs[v]
            acc = 0.0 + 0.0j
            for t in range(1, it):
                for sdx in range(1, jt):
                    acc += (
                        gram[i - t, j - sdx]
                        * c ** (t + sdx)
                        * (
                            _H(t + sdx - 2, lam_u, lam_v, c, 1.0, 1.0, 0.0)
                            + c * (lam_u + lam_v)
                            * _H(t + sdx - 1, lam_u, lam_v, c, 1.0, 1.0, 0.0)
                            + c**2 * lam_u * lam_v
                            * _H(t + sdx, lam_u, lam_v, c, 1.0, 1.0, 0.0)
                        )
                    )
            for sdx in range(1, jt):
                acc += (
                    gram[i, j - sdx]
                    * c ** (sdx + 1)
                    * (
                        _H(sdx - 1, lam_v, lam_u, c, 1.0 - 1.0 / c, 1.0 - 1.0 / c, 1.0 / c)
                        + lam_v * _H(sdx, lam_v, lam_u, c, c - 1.0, c - 1.0, 1.0)
                    )
                )
            for t in range(1, it):
                acc += (
                    gram[j, i - t]
                    * c ** (t + 1)
                    * (
                        _H(t - 1, lam_u, lam_v, c, 1.0 - 1.0 / c, 1.0 - 1.0 / c, 1.0 / c)
                        + lam_u * _H(t, lam_u, lam_v, c, c - 1.0, c - 1.0, 1.0)
                    )
                )
            acc += gram[i, j] * (
                ((c - 1.0) * (2.0 - lam_u - lam_v) + (1.0 - lam_u) * (1.0 - lam_v))
                / ((1.0 - lam_u) * (1.0 - lam_v) * (-1.0 + c * (2.0 - lam_u - lam_v)))
            )
            s[i, j] = acc
    sigma = _realify(
        spectral.P_tilde_cols @ s @ spectral.P_tilde_cols.T, "Sigma_NN"
    )
    return s, sigma


def s_starred(spectral: SpectralDecomposition, c: float):
    """Sparse chain-space covariances at the critical boundary
    (gamma = 1, tau = 1 - 1/(2c)).

    The only nonzero entries sit at the chain tails (I_u, I_v) of maximal
    blocks (rho_u = rho_v = rho) whose eigenvalues satisfy
    lambda_u + lambda_v = 2 - 1/c; they involve the chain-head eigenvectors
    q_{I_u - rho + 2}.
    """
    _require_regime(spectral, c, Regime.CRITICAL_BOUNDARY, "s_starred")
    n = spectral.n_agents
    gram = spectral.gram()
    evs = spectral.eigenvalues
    rho = spectral.rho
    cum = spectral.cumulative_indices
    target = 2.0 - 1.0 / c

    szz = np.zeros((n - 1, n - 1), dtype=complex)
    szn = np.zeros((n - 1, n), dtype=complex)
    snn = np.zeros((n, n), dtype=complex)
    for u in range(1, spectral.n_blocks + 1):
        if spectral.block_orders[u - 1] != rho:
            continue
        lam_u = evs[u]
        iu = cum[u]
        for v in range(1, spectral.n_blocks + 1):
            if spectral.block_orders[v - 1] != rho:
                continue
            lam_v = evs[v]
            if abs((lam_u + lam_v) - target) > PAIR_TOL:
                continue
            iv = cum[v]
            head = gram[iu - rho + 1, iv - rho + 1]
            szz[iu - 1, iv - 1] = c ** (2 * rho) / (2 * rho - 1) * head
            szn[iu - 1, iv] = (
                c ** (2 * rho - 1) / (2 * rho - 1) * lam_v * head / (1.0 - lam_u)
            )
            snn[iu, iv] = (
                c ** (2 * rho - 2)
                / (2 * rho - 1)
                * lam_u
                * lam_v
                * head
                / ((1.0 - lam_u) * (1.0 - lam_v))
            )
    sigma_zz = _realify(spectral.P @ szz @ spectral.P.T, "Sigma_ZZ_star")
    sigma_zn = _realify(spectral.P @ szn @ spectral.P_tilde_cols.T, "Sigma_ZN_star")
    sigma_nn = _realify(
        spectral.P_tilde_cols @ snn @ spectral.P_tilde_cols.T, "Sigma_NN_star"
    )
    return (szz, szn, snn), (sigma_zz, sigma_zn, sigma_nn)


# Report assembly ------------------------------------------------------------


@dataclass
class CovarianceReport:
    """Regime tag, scaling description and the assembled covariance blocks.

    ``blocks`` maps names to matrices: agent-space assemblies are real,
    chain-space matrices (keys starting with ``S_``) stay complex.  ``joint``
    is the 2N x 2N per-unit-mixture covariance of the scaled (Z, N) vector.
    """

    regime: Regime
    scaling: str
    blocks: dict[str, np.ndarray]
    joint: np.ndarray


def assemble_joint(regime: Regime, blocks: dict[str, np.ndarray], n_agents: int) -> np.ndarray:
    """2N x 2N joint covariance from named agent-space blocks."""
    n = n_agents
    out = np.zeros((2 * n, 2 * n))
    if regime is Regime.SUBPOLYNOMIAL:
        st = blocks["Sigma_tilde"]
        gh = blocks["Gamma_hat"]
        out[:n, :n] = st
        out[:n, n:] = st
        out[n:, :n] = st
        out[n:, n:] = st + gh
    elif regime is Regime.CRITICAL_SUBCRITICAL:
        st = blocks["Sigma_tilde"]
        out[:n, :n] = st + blocks["Sigma_ZZ"]
        out[:n, n:] = st + blocks["Sigma_ZN"]
        out[n:, :n] = st + blocks["Sigma_ZN"].T
        out[n:, n:] = st + blocks["Sigma_NN"]
    elif regime is Regime.CRITICAL_BOUNDARY:
        out[:n, :n] = blocks["Sigma_ZZ_star"]
        out[:n, n:] = blocks["Sigma_ZN_star"]
        out[n:, :n] = blocks["Sigma_ZN_star"].T
        out[n:, n:] = blocks["Sigma_NN_star"]
    else:
        raise RegimeError(
            "no covariance is available for gamma = 1 with tau above the critical boundary"
        )
    return out


def covariance_report(
    spectral: SpectralDecomposition, schedule: StepSizeSchedule
) -> CovarianceReport:
    """Compute every covariance object of the regime selected by (gamma, c, tau)."""
    gamma, c = schedule.gamma, schedule.c
    regime = classify_regime(gamma, c, spectral)
    n = spectral.n_agents
    q1 = spectral.q1
    blocks: dict[str, np.ndarray] = {}
    if regime is Regime.SUBPOLYNOMIAL:
        st = _ones_block(sigma_tilde_sq(gamma, c, q1, n), n)
        gh = _ones_block(gamma_hat_sq(gamma, c, q1, n), n)
        sg, sigma_g = s_gamma(spectral, gamma, c)
        blocks.update(
            Sigma_tilde=st, Gamma_hat=gh, S_gamma=sg, Sigma_gamma_hat=sigma_g
        )
        scaling = (
            "n^(gamma-1/2) for the joint (Z, N) blocks; "
            "n^(gamma/2) for the chain component reported via S_gamma"
        )
    elif regime is Regime.CRITICAL_SUBCRITICAL:
        st = _ones_block(sigma_tilde_sq(1.0, c, q1, n), n)
        szz_c, sigma_zz = s_zz(spectral, c)
        szn_c, sigma_zn = s_zn(spectral, c)
        snn_c, sigma_nn = s_nn(spectral, c)
        blocks.update(
            Sigma_tilde=st,
            S_ZZ=szz_c,
            Sigma_ZZ=sigma_zz,
            S_ZN=szn_c,
            Sigma_ZN=sigma_zn,
            S_NN=snn_c,
            Sigma_NN=sigma_nn,
        )
        scaling = "sqrt(n)"
    elif regime is Regime.CRITICAL_BOUNDARY:
        (szz_c, szn_c, snn_c), (sigma_zz, sigma_zn, sigma_nn) = s_starred(spectral, c)
        blocks.update(
            S_ZZ_star=szz_c,
            Sigma_ZZ_star=sigma_zz,
            S_ZN_star=szn_c,
            Sigma_ZN_star=sigma_zn,
            S_NN_star=snn_c,
            Sigma_NN_star=sigma_nn,
        )
        scaling = "sqrt(n) / (log n)^(rho - 1/2)"
    else:
        raise RegimeError(
            "no covariance is available for gamma = 1 with tau above the critical boundary"
        )
    joint = assemble_joint(regime, blocks, n)
    return CovarianceReport(regime=regime, scaling=scaling, blocks=blocks, joint=joint)


def pairwise_sync_cov(
    spectral: SpectralDecomposition,
    regime: Regime,
    blocks: dict[str, np.ndarray],
    i: int,
    j: int,
):
    """Asymptotic covariance of the (i, j) agent difference (0-based agents).

    Subpolynomial regime: scalar variance of the scaled inclination gap.
    Critical regimes: the 2 x 2 covariance of the scaled (Z gap, N gap) pair.
    """
    if i == j:
        raise ValueError("agent indices must differ")
    if regime is Regime.SUBPOLYNOMIAL:
        sg = blocks["Sigma_gamma_hat"]
        return float(sg[i, i] + sg[j, j] - 2.0 * sg[i, j])
    if regime is Regime.CRITICAL_SUBCRITICAL:
        szz_c, szn_c, snn_c = blocks["S_ZZ"], blocks["S_ZN"], blocks["S_NN"]
    elif regime is Regime.CRITICAL_BOUNDARY:
        szz_c, szn_c, snn_c = (
            blocks["S_ZZ_star"],
            blocks["S_ZN_star"],
            blocks["S_NN_star"],
        )
    else:
        raise RegimeError("pairwise covariance undefined in the unsupported regime")
    p_ij, ptil_ij = pairwise_projection(spectral, i, j)
    m = np.empty((2, 2), dtype=complex)
    m[0, 0] = p_ij @ szz_c @ p_ij
    m[0, 1] = p_ij @ szn_c @ ptil_ij
    m[1, 0] = m[0, 1]
    m[1, 1] = ptil_ij @ snn_c @ ptil_ij
    return _realify(m, "pairwise covariance")


# Numeric cross-validation oracle -------------------------------------------


def limit_sum_analytic(x: complex, y: complex, q: int, c: float, gamma: float) -> complex:
    """Analytic limit matched by :func:`limit_sum_oracle`.

    gamma < 1: q! (1-gamma)^q c^(1-q) / (x+y)^(q+1).
    gamma = 1 with c(Re x + Re y) > 1: c^2 q! / (-1 + c(x+y))^(q+1).
    gamma = 1 with c(Re x + Re y) = 1: c^2/(q+1) for a real sum x + y, else 0.
    """
    x, y = complex(x), complex(y)
    if gamma < 1.0:
        return factorial(q) * (1.0 - gamma) ** q * c ** (1 - q) / (x + y) ** (q + 1)
    cre = c * (x.real + y.real)
    if cre > 1.0 + PAIR_TOL:
        return c * c * factorial(q) / (-1.0 + c * (x + y)) ** (q + 1)
    if abs(cre - 1.0) <= PAIR_TOL:
        return c * c / (q + 1) if abs((x + y).imag) <= PAIR_TOL else 0.0 + 0.0j
    raise ValueError("the scaled sum has no finite limit for c(Re x + Re y) < 1")


def limit_sum_oracle(
    x: complex,
    y: complex,
    q: int,
    c: float,
    gamma: float,
    n: int,
    r_max: float = 0.99,
) -> complex:
    """Finite-n evaluation of the scaled step-size sums behind every covariance
    coefficient.

    Computes t_n^2 * sum_{k=m0}^{n-1} r_k^2 w_{k,n}^q F_{k+1,n}(x) F_{k+1,n}(y)
    with F_{k+1,n}(x) the product of (1 - r_j x) over j = k+1..n,
    w_{k,n} = log n - log k at gamma = 1 and n^(1-gamma) - k^(1-gamma) below,
    and t_n^2 the regime scaling (n^gamma; n; or n/(log n)^(q+1) on the
    boundary).  m0 is the smallest index from which |r_j x|, |r_j y| < 1/2.
    Products are evaluated through complex log-space cumulative sums, so no
    overflow occurs and conjugate phases are tracked exactly.
    """
    if n < 100:
        raise ValueError("n too small for the oracle to be meaningful")
    if q < 0:
        raise ValueError("q must be a non-negative integer")
    x, y = complex(x), complex(y)
    schedule = StepSizeSchedule(gamma=gamma, c=c, r_max=r_max)
    r = schedule.sequence(n)  # r[j-1] = r_j for j = 1..n

    big = max(abs(x), abs(y))
    ok = r * big < 0.5
    if not ok.any():
        raise ValueError("no index satisfies |r_j x| < 1/2")
    m0 = int(np.argmax(ok)) + 1  # r is non-increasing, so ok is a suffix

    # L[a] = sum_{j=m0}^{m0+a-1} log(1 - r_j z), with L[0] = 0
    def cum_logs(z: complex) -> np.ndarray:
        terms = np.log(1.0 - r[m0 - 1 :] * z)
        out = np.empty(terms.size + 1, dtype=complex)
        out[0] = 0.0
        np.cumsum(terms, out=out[1:])
        return out

    lx, ly = cum_logs(x), cum_logs(y)
    ks = np.arange(m0, n, dtype=float)          # k = m0 .. n-1
    idx = np.arange(1, n - m0 + 1)              # L(k) sits at position k - m0 + 1
    ftail = np.exp((lx[-1] - lx[idx]) + (ly[-1] - ly[idx]))
    if gamma < 1.0:
        w = n ** (1.0 - gamma) - ks ** (1.0 - gamma)
        scale = float(n) ** gamma
    else:
        w = log(n) - np.log(ks)
        cre = c * (x.real + y.real)
        if cre > 1.0 + PAIR_TOL:
            scale = float(n)
        elif abs(cre - 1.0) <= PAIR_TOL:
            scale = float(n) / log(n) ** (q + 1)
        else:
            raise ValueError("the scaled sum has no finite limit for c(Re x + Re y) < 1")
    total = np.sum(r[m0 - 1 : n - 1] ** 2 * w**q * ftail)
    return scale * complex(total)
