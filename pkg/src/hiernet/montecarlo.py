"""Ensemble orchestration and empirical validation.

Runs are embarrassingly parallel: every run's stream is derived from
``(master_seed, run_index)`` alone, chunks are assembled in run-index order,
and all summary statistics are computed after assembly, so a summary is
bit-identical for any chunk size or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, sqrt

import numpy as np
from joblib import Parallel, delayed
from scipy import special
from scipy.stats import gaussian_kde

from .model import HierarchicalNetwork, StepSizeSchedule
from .spectral import Regime, SpectralDecomposition
from .simulate import derive_rng, materialize_z0, simulate_batch
from .inference import statistic_quadratic_form, statistic_scale, chi2_quantile
from .asymptotics import RegimeError, covariance_report

__all__ = [
    "InitialCondition",
    "EnsembleConfig",
    "EnsembleSummary",
    "DensityReport",
    "CltReport",
    "CouplingReport",
    "CalibrationReport",
    "run_ensemble",
    "table1",
    "sim_scenarios",
    "density_report",
    "clt_check",
    "coupling_check",
    "calibration_run",
]


@dataclass(frozen=True)
class InitialCondition:
    """Initial inclinations; masked entries are drawn uniform(0,1) per run."""

    values: tuple
    random_mask: tuple | None = None
    label: str = ""

    def resolved_mask(self) -> np.ndarray:
        if self.random_mask is None:
            return np.zeros(len(self.values), dtype=bool)
        return np.asarray(self.random_mask, dtype=bool)


@dataclass(frozen=True)
class EnsembleConfig:
    network: HierarchicalNetwork
    schedule: StepSizeSchedule
    z0: InitialCondition
    horizon: int
    n_sims: int
    master_seed: int = 424243
    first_run_index: int = 0
    checkpoints: tuple[int, ...] = ()
    boundary_eps: float = 0.05
    exact_boundary_tol: float = 1e-9
    degeneracy_threshold: float = 0.01
    chunk_size: int = 4096
    workers: int = 1

    def __post_init__(self):
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if not 0.0 < self.boundary_eps < 0.5:
            raise ValueError("boundary_eps must lie in (0, 1/2)")
        if not 0.0 < self.degeneracy_threshold < 0.5:
            raise ValueError("degeneracy_threshold must lie in (0, 1/2)")


@dataclass
class EnsembleSummary:
    """Final states of an ensemble plus pooled interval statistics.

    ``proportions`` holds the pooled-over-agents fractions of final values in
    [0, eps], (eps, 1-eps), [1-eps, 1] and within ``exact_boundary_tol`` of
    an endpoint.  ``z_tilde`` is present when spectral data was supplied.
    """

    config: EnsembleConfig
    final_z: np.ndarray
    final_ncnt: np.ndarray
    checkpoint_states: dict[int, tuple[np.ndarray, np.ndarray]]
    proportions: dict[str, float]
    spread: np.ndarray
    z_tilde: np.ndarray | None = None

    @property
    def pooled_final(self) -> np.ndarray:
        return self.final_z.ravel()


def _run_chunk(weights, schedule, z0_values, z0_mask, horizon, master_seed, run_lo, run_hi, checkpoints):
    rngs = [derive_rng(master_seed, idx) for idx in range(run_lo, run_hi)]
    z0 = materialize_z0(z0_values, z0_mask, run_hi - run_lo, rngs)
    z, ncnt, records, _ = simulate_batch(
        weights, schedule, z0, horizon, rngs, record_steps=checkpoints
    )
    return z, ncnt, records


def _simulate_runs(config: EnsembleConfig):
    lo = config.first_run_index
    hi = lo + config.n_sims
    bounds = [(a, min(a + config.chunk_size, hi)) for a in range(lo, hi, config.chunk_size)]
    args = [
        (
            config.network.weights,
            config.schedule,
            np.asarray(config.z0.values, dtype=float),
            config.z0.resolved_mask(),
            config.horizon,
            config.master_seed,
            a,
            b,
            tuple(config.checkpoints),
        )
        for a, b in bounds
    ]
    if config.workers > 1 and len(bounds) > 1:
        parts = Parallel(n_jobs=config.workers)(delayed(_run_chunk)(*a) for a in args)
    else:
        parts = [_run_chunk(*a) for a in args]
    final_z = np.vstack([p[0] for p in parts])
    final_n = np.vstack([p[1] for p in parts])
    checkpoints: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for s in config.checkpoints:
        checkpoints[int(s)] = (
            np.vstack([p[2][s][0] for p in parts]),
            np.vstack([p[2][s][1] for p in parts]),
        )
    return final_z, final_n, checkpoints


def _extend_until_non_degenerate(
    config: EnsembleConfig,
    spectral: SpectralDecomposition,
    target: int,
    max_factor: int = 25,
) -> EnsembleSummary:
    """Grow an ensemble in n_sims-sized batches of fresh run indices until at
    least ``target`` runs have mixing proxy above the degeneracy threshold.
    Deterministic: batches are keyed by consecutive run indices."""
    from dataclasses import replace

    q1 = np.real(spectral.q1)
    rt_n = sqrt(spectral.n_agents)
    parts = []
    n_good = 0
    offset = config.first_run_index
    for _ in range(max_factor):
        batch = replace(config, first_run_index=offset)
        summary = run_ensemble(batch, spectral)
        parts.append(summary)
        zt = summary.z_tilde
        n_good += int(((zt * (1 - zt)) >= config.degeneracy_threshold).sum())
        offset += config.n_sims
        if n_good >= target:
            break
    else:
        raise ValueError(
            f"could not reach {target} non-degenerate runs within "
            f"{max_factor} batches of {config.n_sims}"
        )
    if len(parts) == 1:
        return parts[0]
    final_z = np.vstack([p.final_z for p in parts])
    final_n = np.vstack([p.final_ncnt for p in parts])
    checkpoints = {
        s: (
            np.vstack([p.checkpoint_states[s][0] for p in parts]),
            np.vstack([p.checkpoint_states[s][1] for p in parts]),
        )
        for s in config.checkpoints
    }
    merged = replace(config, n_sims=config.n_sims * len(parts))
    pooled = final_z.ravel()
    eps, tol = config.boundary_eps, config.exact_boundary_tol
    proportions = {
        "low": float(np.mean(pooled <= eps)),
        "mid": float(np.mean((pooled > eps) & (pooled < 1.0 - eps))),
        "high": float(np.mean(pooled >= 1.0 - eps)),
        "exact_boundary": float(np.mean((pooled <= tol) | (pooled >= 1.0 - tol))),
    }
    return EnsembleSummary(
        config=merged,
        final_z=final_z,
        final_ncnt=final_n,
        checkpoint_states=checkpoints,
        proportions=proportions,
        spread=final_z.max(axis=1) - final_z.min(axis=1),
        z_tilde=final_z @ q1 / rt_n,
    )


def run_ensemble(
    config: EnsembleConfig, spectral: SpectralDecomposition | None = None
) -> EnsembleSummary:
    """Simulate ``n_sims`` independent trajectories and summarize final states."""
    final_z, final_n, checkpoints = _simulate_runs(config)
    pooled = final_z.ravel()
    eps, tol = config.boundary_eps, config.exact_boundary_tol
    low = float(np.mean(pooled <= eps))
    mid = float(np.mean((pooled > eps) & (pooled < 1.0 - eps)))
    high = float(np.mean(pooled >= 1.0 - eps))
    boundary = float(np.mean((pooled <= tol) | (pooled >= 1.0 - tol)))
    proportions = {"low": low, "mid": mid, "high": high, "exact_boundary": boundary}
    spread = final_z.max(axis=1) - final_z.min(axis=1)
    z_tilde = None
    if spectral is not None:
        q1 = np.real(spectral.q1)
        z_tilde = final_z @ q1 / sqrt(spectral.n_agents)
    return EnsembleSummary(
        config=config,
        final_z=final_z,
        final_ncnt=final_n,
        checkpoint_states=checkpoints,
        proportions=proportions,
        spread=spread,
        z_tilde=z_tilde,
    )


# Simulation-study scenario grid ---------------------------------------------


def sim_scenarios(alphas=(0.8, 0.2)):
    """The 12 scenario keys of the simulation study: two leading-group
    self-reinforcement strengths crossed with six initial conditions."""
    leading = [
        ("(0.5,0.5,d,d)", (0.5, 0.5), (False, False)),
        ("(0.1,0.5,d,d)", (0.1, 0.5), (False, False)),
        ("(U1,U2,d,d)", (0.0, 0.0), (True, True)),
    ]
    downstream = [("0", 0.0), ("1", 1.0)]
    out = []
    for alpha in alphas:
        for lead_label, lead_vals, lead_mask in leading:
            for down_label, down_val in downstream:
                label = lead_label.replace("d,d", f"{down_label},{down_label}")
                z0 = InitialCondition(
                    values=lead_vals + (down_val, down_val),
                    random_mask=lead_mask + (False, False),
                    label=label,
                )
                out.append((alpha, z0))
    return out


def table1(
    n_sims: int = 5000,
    horizon: int = 20000,
    master_seed: int = 424243,
    beta: float = 0.5,
    gamma: float = 0.9,
    c: float = 1.0,
    alphas=(0.8, 0.2),
    workers: int = 1,
    chunk_size: int = 4096,
):
    """Pooled final-state interval percentages for the 12 study scenarios.

    Returns (rows, summaries): rows are dicts with keys alpha, z0_label,
    bin_low, bin_mid, bin_high, boundary (percent, pooled over all agents);
    summaries maps (alpha, z0_label) to the underlying EnsembleSummary.
    Scenarios share the master seed, so the two rows of a downstream pair ride
    on identical leading-group paths.
    """
    from .spectral import build_sim_network

    rows = []
    summaries = {}
    for alpha, z0 in sim_scenarios(alphas):
        network, spectral = build_sim_network(alpha, beta)
        config = EnsembleConfig(
            network=network,
            schedule=StepSizeSchedule(gamma=gamma, c=c),
            z0=z0,
            horizon=horizon,
            n_sims=n_sims,
            master_seed=master_seed,
            workers=workers,
            chunk_size=chunk_size,
        )
        summary = run_ensemble(config, spectral)
        rows.append(
            {
                "alpha": alpha,
                "z0_label": z0.label,
                "bin_low": 100.0 * summary.proportions["low"],
                "bin_mid": 100.0 * summary.proportions["mid"],
                "bin_high": 100.0 * summary.proportions["high"],
                "boundary": 100.0 * summary.proportions["exact_boundary"],
            }
        )
        summaries[(alpha, z0.label)] = summary
    return rows, summaries


# Density estimation ----------------------------------------------------------


@dataclass
class DensityReport:
    grid: np.ndarray
    bin_edges: np.ndarray
    histogram: dict[str, np.ndarray]   # per-agent and "pooled" densities
    kde: dict[str, np.ndarray | None]
    bandwidth: dict[str, float | None]


def _reflected_kde(sample: np.ndarray, grid: np.ndarray):
    """Gaussian KDE with Silverman bandwidth, reflected at 0 and 1."""
    if np.std(sample) < 1e-12:
        return None, None
    kde = gaussian_kde(sample, bw_method="silverman")
    dens = kde(grid) + kde(-grid) + kde(2.0 - grid)
    bandwidth = float(kde.factor * np.std(sample, ddof=1))
    return dens, bandwidth


def density_report(summary: EnsembleSummary, bins: int = 40, grid_points: int = 256) -> DensityReport:
    """Per-agent and pooled density estimates of the final inclinations."""
    final = summary.final_z
    n_agents = final.shape[1]
    edges = np.linspace(0.0, 1.0, bins + 1)
    grid = np.linspace(0.0, 1.0, grid_points)
    histogram, kde, bandwidth = {}, {}, {}
    columns = {f"agent_{a + 1}": final[:, a] for a in range(n_agents)}
    columns["pooled"] = final.ravel()
    for name, sample in columns.items():
        hist, _ = np.histogram(sample, bins=edges, density=True)
        histogram[name] = hist
        dens, bw = _reflected_kde(sample, grid)
        kde[name] = dens
        bandwidth[name] = bw
    return DensityReport(
        grid=grid, bin_edges=edges, histogram=histogram, kde=kde, bandwidth=bandwidth
    )


# CLT covariance comparison ---------------------------------------------------


@dataclass
class CltReport:
    regime: Regime
    theory: np.ndarray
    empirical: np.ndarray            # normalized by the mean non-degenerate mixing
    empirical_per_run: np.ndarray    # alternative: mixing divided out per run
    mean_mixing: float
    n_used: int
    n_degenerate: int
    dominant_mask: np.ndarray
    rel_errors: np.ndarray           # NaN off the dominant mask
    max_rel_error: float
    chain_empirical: np.ndarray      # scaled chain coordinates (ZZ part only)
    chain_theory: np.ndarray


def _scaled_deviations(summary, spectral, regime, schedule):
    n = summary.config.horizon
    z = summary.final_z
    m = summary.final_ncnt
    n_agents = spectral.n_agents
    q1 = np.real(spectral.q1)
    z_tilde = z @ q1 / sqrt(n_agents)
    z_hat = z @ spectral.projector().T
    n_hat = m - z_tilde[:, None]
    if regime is Regime.SUBPOLYNOMIAL:
        t_n = float(n) ** (schedule.gamma / 2.0)
        dev = t_n * z_hat
    elif regime is Regime.CRITICAL_SUBCRITICAL:
        t_n = sqrt(float(n))
        dev = t_n * np.hstack([z_hat, n_hat])
    elif regime is Regime.CRITICAL_BOUNDARY:
        t_n = sqrt(float(n)) / log(float(n)) ** (spectral.rho - 0.5)
        dev = t_n * np.hstack([z_hat, n_hat])
    else:
        raise RegimeError("no CLT check in the unsupported regime")
    chain = t_n * (z @ np.real(spectral.Q))  # scaled Q^T Z, chain coordinates
    return dev, chain, z_tilde


def clt_check(
    config: EnsembleConfig,
    spectral: SpectralDecomposition,
    regime: Regime,
    dominance: float = 0.10,
    min_non_degenerate: int | None = None,
) -> CltReport:
    """Compare the ensemble covariance of the regime-scaled deviations against
    the assembled theoretical matrix, per unit mixture.

    Degenerate runs (mixing proxy below the config threshold) are excluded;
    the empirical second moment of the rest is divided by their mean mixing.
    Relative errors are reported on entries whose theoretical magnitude is at
    least ``dominance`` times the maximum.  When ``min_non_degenerate`` is
    given, the ensemble is grown in n_sims-sized batches until that many
    non-degenerate runs are available.
    """
    if min_non_degenerate is not None:
        summary = _extend_until_non_degenerate(config, spectral, min_non_degenerate)
    else:
        summary = run_ensemble(config, spectral)
    report = covariance_report(spectral, config.schedule)
    if regime is not report.regime:
        raise RegimeError(f"requested {regime.value} but (gamma, c, tau) give {report.regime.value}")
    n_agents = spectral.n_agents
    if regime is Regime.SUBPOLYNOMIAL:
        theory = report.blocks["Sigma_gamma_hat"]
        chain_theory = np.real(report.blocks["S_gamma"])
    elif regime is Regime.CRITICAL_SUBCRITICAL:
        theory = np.block(
            [
                [report.blocks["Sigma_ZZ"], report.blocks["Sigma_ZN"]],
                [report.blocks["Sigma_ZN"].T, report.blocks["Sigma_NN"]],
            ]
        )
        chain_theory = np.real(report.blocks["S_ZZ"])
    else:
        theory = np.block(
            [
                [report.blocks["Sigma_ZZ_star"], report.blocks["Sigma_ZN_star"]],
                [report.blocks["Sigma_ZN_star"].T, report.blocks["Sigma_NN_star"]],
            ]
        )
        chain_theory = np.real(report.blocks["S_ZZ_star"])

    dev, chain, z_tilde = _scaled_deviations(summary, spectral, regime, config.schedule)
    mixing = z_tilde * (1.0 - z_tilde)
    keep = mixing >= config.degeneracy_threshold
    n_used = int(keep.sum())
    if n_used == 0:
        # fully polarized ensemble (absorbing initial state): report the raw,
        # unnormalized second moment, which is exactly zero for absorbing runs
        keep = np.ones_like(keep)
        dev_k = dev
        second = dev_k.T @ dev_k / len(dev_k)
        mask = np.abs(theory) >= dominance * np.abs(theory).max()
        return CltReport(
            regime=regime,
            theory=theory,
            empirical=second,
            empirical_per_run=second,
            mean_mixing=0.0,
            n_used=0,
            n_degenerate=len(dev),
            dominant_mask=mask,
            rel_errors=np.full_like(theory, np.nan),
            max_rel_error=float("nan"),
            chain_empirical=chain.T @ chain / len(chain),
            chain_theory=chain_theory,
        )
    dev_k = dev[keep]
    mean_mixing = float(mixing[keep].mean())
    second = dev_k.T @ dev_k / n_used
    empirical = second / mean_mixing
    per_run = (dev_k / np.sqrt(mixing[keep])[:, None]).T @ (
        dev_k / np.sqrt(mixing[keep])[:, None]
    ) / n_used
    chain_k = chain[keep]
    chain_emp = chain_k.T @ chain_k / n_used / mean_mixing

    mask = np.abs(theory) >= dominance * np.abs(theory).max()
    rel = np.full_like(theory, np.nan)
    rel[mask] = (empirical[mask] - theory[mask]) / theory[mask]
    max_rel = float(np.nanmax(np.abs(rel))) if mask.any() else float("nan")
    return CltReport(
        regime=regime,
        theory=theory,
        empirical=empirical,
        empirical_per_run=per_run,
        mean_mixing=mean_mixing,
        n_used=n_used,
        n_degenerate=int((~keep).sum()),
        dominant_mask=mask,
        rel_errors=rel,
        max_rel_error=max_rel,
        chain_empirical=chain_emp,
        chain_theory=chain_theory,
    )


# Leading-group coupling -------------------------------------------------------


@dataclass
class CouplingReport:
    equal: bool
    n_leading: int
    compared_steps: list[int]
    first_divergence: int | None


def coupling_check(
    config_a: EnsembleConfig, config_b: EnsembleConfig, stride: int = 1
) -> CouplingReport:
    """Bitwise comparison of leading-block paths between two ensembles that
    differ only in downstream initial values.

    Exactness is structural, not statistical: shared (seed, run_index) streams
    plus the block upper-triangular weights make the leading-group actions
    identical path by path.
    """
    if config_a.network.block_sizes != config_b.network.block_sizes:
        raise ValueError("paired configs must share the block structure")
    if (
        config_a.horizon != config_b.horizon
        or config_a.n_sims != config_b.n_sims
        or config_a.master_seed != config_b.master_seed
        or config_a.first_run_index != config_b.first_run_index
    ):
        raise ValueError("paired configs must share horizon, sims, seed and run indices")
    # weights, schedule and leading initial state are compared through the
    # paths themselves: any difference there legitimately breaks equality
    n1 = config_a.network.block_sizes[0]

    steps = sorted(set(range(stride, config_a.horizon + 1, stride)) | {config_a.horizon})
    sa = run_ensemble(_with_checkpoints(config_a, steps))
    sb = run_ensemble(_with_checkpoints(config_b, steps))
    first_div = None
    for s in steps:
        za = sa.checkpoint_states[s][0][:, :n1]
        zb = sb.checkpoint_states[s][0][:, :n1]
        if not np.array_equal(za, zb):
            first_div = s
            break
    return CouplingReport(
        equal=first_div is None,
        n_leading=n1,
        compared_steps=steps,
        first_divergence=first_div,
    )


def _with_checkpoints(config: EnsembleConfig, steps) -> EnsembleConfig:
    from dataclasses import replace

    return replace(config, checkpoints=tuple(steps))


# Test-statistic calibration ---------------------------------------------------


@dataclass
class CalibrationReport:
    statistics: np.ndarray
    dof: int
    n_degenerate: int
    ks_distance: float
    rejection_rate: float
    rejection_ci: tuple[float, float]
    mean: float
    var: float


def calibration_run(
    config: EnsembleConfig,
    spectral0: SpectralDecomposition,
    regime: Regime,
    level: float = 0.05,
    min_non_degenerate: int | None = None,
) -> CalibrationReport:
    """Distribution diagnostics of the structure-test statistic over an
    ensemble simulated under the hypothesized network.

    Degenerate runs are excluded (when ``min_non_degenerate`` is given the
    ensemble grows in batches until that many remain).  The rejection-rate
    confidence interval is the +-2 binomial standard error band.
    """
    if min_non_degenerate is not None:
        summary = _extend_until_non_degenerate(config, spectral0, min_non_degenerate)
    else:
        summary = run_ensemble(config, spectral0)
    a_mat, dof, rho = statistic_quadratic_form(spectral0, config.schedule, regime)
    scale = statistic_scale(regime, config.schedule, config.horizon, rho)
    z = summary.final_z
    z_tilde = summary.z_tilde
    mixing = z_tilde * (1.0 - z_tilde)
    keep = mixing >= config.degeneracy_threshold
    if not keep.any():
        raise ValueError("all runs degenerate")
    quad = np.einsum("ri,ij,rj->r", z[keep], a_mat, z[keep])
    stats = scale * quad / mixing[keep]
    m = stats.size
    cdf = special.gammainc(dof / 2.0, np.sort(stats) / 2.0)
    grid_hi = np.arange(1, m + 1) / m
    grid_lo = np.arange(0, m) / m
    ks = float(np.max(np.maximum(np.abs(cdf - grid_hi), np.abs(cdf - grid_lo))))
    crit = chi2_quantile(1.0 - level, dof)
    rate = float(np.mean(stats > crit))
    se = sqrt(max(rate * (1.0 - rate), 1e-12) / m)
    return CalibrationReport(
        statistics=stats,
        dof=dof,
        n_degenerate=int((~keep).sum()),
        ks_distance=ks,
        rejection_rate=rate,
        rejection_ci=(max(0.0, rate - 2 * se), min(1.0, rate + 2 * se)),
        mean=float(stats.mean()),
        var=float(stats.var()),
    )
