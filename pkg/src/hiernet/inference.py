"""Structure tests against a hypothesized network, confidence intervals for
the synchronization limit, and confidence regions by test inversion.

The test statistics are scaled quadratic forms of the chain-space component
of the observed inclination vector, normalized by the mixing proxy
``z_tilde (1 - z_tilde)``.  When the proxy is close to zero the trajectory
has effectively polarized and the chi-square normalization is invalid: such
inputs are flagged degenerate rather than rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from scipy import special

from .model import StepSizeSchedule
from .spectral import Regime, SpectralDecomposition, classify_regime
from .asymptotics import RegimeError, s_gamma, s_starred, s_zz

__all__ = [
    "TestOutcome",
    "ConfidenceInterval",
    "pseudo_inverse",
    "chi2_tail",
    "chi2_quantile",
    "normal_quantile",
    "test_statistic",
    "ci_z_infinity",
    "confidence_region",
    "RegionPoint",
]

DEGENERACY_THRESHOLD = 0.01
PINV_TOL = 1e-10


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    dof: int
    p_value: float
    regime: Regime
    mixing_proxy: float
    degenerate: bool


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    lower: float
    upper: float
    level: float


def pseudo_inverse(mat: np.ndarray, tol: float = PINV_TOL) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudoinverse of a symmetric real matrix via its
    eigendecomposition, plus the numerical rank.

    Eigenvalues with magnitude at most ``tol`` times the largest magnitude are
    treated as exact zeros.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if np.abs(m - m.T).max() > 1e-10:
        raise ValueError("matrix must be symmetric to 1e-10")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    cutoff = tol * max(np.abs(vals).max(), np.finfo(float).tiny)
    keep = np.abs(vals) > cutoff
    inv_vals = np.zeros_like(vals)
    inv_vals[keep] = 1.0 / vals[keep]
    pinv = (vecs * inv_vals) @ vecs.T
    return pinv, int(keep.sum())


def chi2_tail(x: float, dof: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if dof < 1:
        raise ValueError("dof must be a positive integer")
    if x < 0:
        raise ValueError("statistic must be non-negative")
    return float(special.gammaincc(dof / 2.0, x / 2.0))


def chi2_quantile(p: float, dof: int) -> float:
    """Lower p-quantile of the chi-square distribution (inverse of 1 - tail)."""
    if dof < 1:
        raise ValueError("dof must be a positive integer")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return float(2.0 * special.gammainccinv(dof / 2.0, 1.0 - p))


def normal_quantile(p: float) -> float:
    """Standard normal quantile through the chi-square machinery:
    for p >= 1/2, z_p = sqrt of the (2p - 1)-quantile of chi-square(1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return sqrt(chi2_quantile(2.0 * p - 1.0, 1))
    return -sqrt(chi2_quantile(1.0 - 2.0 * p, 1))


def _chain_statistic_matrix(spectral: SpectralDecomposition, s_dagger: np.ndarray) -> np.ndarray:
    """Real N x N matrix A with Z^T A Z = (P Q^T Z)^T Sigma^dagger (P Q^T Z)."""
    proj = spectral.projector()
    return proj.T @ s_dagger @ proj


def statistic_quadratic_form(
    spectral: SpectralDecomposition,
    schedule: StepSizeSchedule,
    regime: Regime,
    pinv_tol: float = PINV_TOL,
) -> tuple[np.ndarray, int, float]:
    """Shared core of the structure tests: the quadratic-form matrix, its rank
    (the degrees of freedom) and a function-of-n scale factor exponent pack.

    Returns (A, dof, rho) where the statistic is
    scale(n) * Z^T A Z / mixing with scale(n) = n^gamma (subpolynomial),
    n (critical subcritical) or n / (log n)^(2 rho - 1) (critical boundary).
    """
    gamma, c = schedule.gamma, schedule.c
    if regime is Regime.SUBPOLYNOMIAL:
        _, sigma = s_gamma(spectral, gamma, c)
    elif regime is Regime.CRITICAL_SUBCRITICAL:
        _, sigma = s_zz(spectral, c)
    elif regime is Regime.CRITICAL_BOUNDARY:
        (_, _, _), (sigma, _, _) = s_starred(spectral, c)
    else:
        raise RegimeError("no test statistic exists in the unsupported regime")
    dagger, rank = pseudo_inverse(sigma, tol=pinv_tol)
    return _chain_statistic_matrix(spectral, dagger), rank, float(spectral.rho)


def statistic_scale(regime: Regime, schedule: StepSizeSchedule, n: int, rho: float) -> float:
    if regime is Regime.SUBPOLYNOMIAL:
        return float(n) ** schedule.gamma
    if regime is Regime.CRITICAL_SUBCRITICAL:
        return float(n)
    if regime is Regime.CRITICAL_BOUNDARY:
        return float(n) / log(n) ** (2.0 * rho - 1.0)
    raise RegimeError("no test statistic exists in the unsupported regime")


def test_statistic(
    zn,
    n: int,
    schedule: StepSizeSchedule,
    spectral0: SpectralDecomposition,
    regime: Regime | None = None,
    degeneracy_threshold: float = DEGENERACY_THRESHOLD,
) -> TestOutcome:
    """Chi-square structure test of the observed inclinations against the
    hypothesized network's spectral data.

    The spectral data must carry the canonical dominant-pair normalization
    (enforced by every constructor and by ``from_user_spectral``), which makes
    the statistic invariant to the scale freedom of user-supplied
    decompositions.
    """
    z = np.asarray(zn, dtype=float)
    if regime is None:
        regime = classify_regime(schedule.gamma, schedule.c, spectral0)
    n_agents = spectral0.n_agents
    q1 = np.real(spectral0.q1)
    z_tilde = float(z @ q1) / sqrt(n_agents)
    mixing = z_tilde * (1.0 - z_tilde)
    a_mat, dof, rho = statistic_quadratic_form(spectral0, schedule, regime)
    degenerate = mixing < degeneracy_threshold
    if mixing <= 0.0:
        stat = float("inf") if float(z @ a_mat @ z) > 0 else 0.0
    else:
        stat = statistic_scale(regime, schedule, n, rho) * float(z @ a_mat @ z) / mixing
    p_value = chi2_tail(stat, dof) if np.isfinite(stat) else 0.0
    return TestOutcome(
        statistic=stat,
        dof=dof,
        p_value=p_value,
        regime=regime,
        mixing_proxy=mixing,
        degenerate=bool(degenerate),
    )


def ci_z_infinity(
    zn,
    n: int,
    schedule: StepSizeSchedule,
    spectral: SpectralDecomposition,
    level: float = 0.95,
) -> ConfidenceInterval:
    """Confidence interval for the synchronization limit from one observation.

    Width n^-(gamma - 1/2) * z * sqrt(mixing * sigma_tilde^2), clipped to
    [0, 1]; a polarized observation yields a zero-width boundary interval.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    from .asymptotics import sigma_tilde_sq

    z = np.asarray(zn, dtype=float)
    n_agents = spectral.n_agents
    z_tilde = float(z @ np.real(spectral.q1)) / sqrt(n_agents)
    var_scale = sigma_tilde_sq(schedule.gamma, schedule.c, spectral.q1, n_agents)
    half = normal_quantile(0.5 + level / 2.0) * sqrt(
        float(n) ** -(2.0 * schedule.gamma - 1.0) * max(z_tilde * (1.0 - z_tilde), 0.0) * var_scale
    )
    return ConfidenceInterval(
        center=z_tilde,
        lower=max(0.0, z_tilde - half),
        upper=min(1.0, z_tilde + half),
        level=level,
    )


@dataclass(frozen=True)
class RegionPoint:
    theta: tuple
    statistic: float
    dof: int
    accepted: bool
    degenerate: bool
    valid: bool = True


def confidence_region(
    grid,
    builder,
    zn,
    n: int,
    schedule: StepSizeSchedule,
    level: float = 0.95,
) -> tuple[list[tuple], list[RegionPoint]]:
    """Invert the structure test over a parameter grid.

    ``builder`` maps a grid point theta to a (network, spectral) pair, as the
    closed-form constructors do.  A point is accepted when its statistic does
    not exceed the chi-square quantile at ``level`` with the point's degrees
    of freedom.  Grid points the builder rejects (invalid parameters) are
    returned with ``valid=False``; they are never accepted.

    Returns (accepted points, full statistic surface).
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty parameter grid")
    surface: list[RegionPoint] = []
    accepted: list[tuple] = []
    n_degenerate = 0
    for theta in grid:
        key = tuple(np.atleast_1d(theta))
        try:
            _, spectral0 = builder(theta)
            outcome = test_statistic(zn, n, schedule, spectral0)
        except (ValueError, RegimeError):
            # invalid parameters, or a point whose spectrum leaves the
            # supported regimes: never accepted, flagged in the surface
            surface.append(
                RegionPoint(key, float("nan"), 0, False, False, valid=False)
            )
            continue
        ok = outcome.statistic <= chi2_quantile(level, outcome.dof)
        n_degenerate += outcome.degenerate
        surface.append(
            RegionPoint(key, outcome.statistic, outcome.dof, bool(ok), outcome.degenerate)
        )
        if ok:
            accepted.append(key)
    if all(not p.valid or p.degenerate for p in surface):
        raise ValueError("all grid points are degenerate or invalid")
    return accepted, surface
