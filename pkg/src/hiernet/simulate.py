"""Exact forward simulation of the coupled inclination/action-mean dynamics.

Randomness contract: the stream of a run is derived solely from
``(master_seed, run_index)`` through a counter-based Philox generator, and is
consumed in a fixed positional order -- first one uniform per randomized
initial entry (in agent order), then one uniform per (step, agent) pair, step
major.  Two runs sharing ``(master_seed, run_index)`` therefore draw the same
uniform for every (step, agent) regardless of batch size, chunking or worker
count.  Because the weight matrix is block upper-triangular, the action
probability of a leading-group agent never reads downstream state, so paired
runs that differ only in downstream initial values produce bit-identical
leading-group paths.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import HierarchicalNetwork, StepSizeSchedule
from .spectral import SpectralDecomposition

__all__ = [
    "ProcessState",
    "Trajectory",
    "ProjectedSeries",
    "initial_state",
    "step",
    "run_trajectory",
    "project",
    "spread",
    "trajectory_to_csv",
    "derive_rng",
]

PROBABILITY_TOL = 1e-12


def derive_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Counter-based generator keyed by (master_seed, run_index) only."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class ProcessState:
    """State after n completed steps.

    ``ncnt`` holds the running mean of the first n action vectors; before the
    first step it is a zero placeholder that the first update overwrites
    completely (the weight on it is 1 - 1/(n+1) = 0 at n = 0), so a
    pre-action value is never exposed.
    """

    n: int
    z: np.ndarray
    ncnt: np.ndarray
    rng: np.random.Generator

    def copy_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.z.copy(), self.ncnt.copy()


@dataclass
class Trajectory:
    """Thinned record of one simulated path plus its final state."""

    record_stride: int
    records: list[tuple[int, np.ndarray, np.ndarray]]
    final: ProcessState
    seed: int
    run_index: int
    increments: np.ndarray | None = None  # optional (horizon, N) martingale increments


@dataclass
class ProjectedSeries:
    """Spectral projections of a trajectory's records."""

    steps: np.ndarray          # (n_records,)
    z_tilde: np.ndarray        # (n_records,)
    z_hat: np.ndarray          # (n_records, N)
    n_hat: np.ndarray          # (n_records, N)
    increments: np.ndarray | None = None


def initial_state(z0, master_seed: int = 0, run_index: int = 0) -> ProcessState:
    """Fresh state at n = 0 with its derived random stream."""
    z = np.array(z0, dtype=float)
    if z.ndim != 1:
        raise ValueError("z0 must be a vector")
    if (z < 0).any() or (z > 1).any():
        raise ValueError("initial inclinations must lie in [0, 1]")
    return ProcessState(
        n=0, z=z, ncnt=np.zeros_like(z), rng=derive_rng(master_seed, run_index)
    )


def _action_probabilities(z: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Column-wise probabilities sum_h w[h, j] * z[..., h].

    Accumulated one influencing agent at a time, in index order, so the result
    is bitwise identical for any batch shape (no BLAS blocking effects) and
    downstream zero weights contribute exactly nothing to leading columns.
    """
    p = np.zeros_like(z)
    for h in range(weights.shape[0]):
        p += z[..., h, None] * weights[h, :]
    return p


def _advance(z, ncnt, uniforms, weights, r, n):
    """One in-place update of a (R, N) batch; returns the action matrix."""
    p = _action_probabilities(z, weights)
    if p.min() < -PROBABILITY_TOL or p.max() > 1.0 + PROBABILITY_TOL:
        raise FloatingPointError(
            f"action probability outside [0, 1] at step {n}: "
            f"range [{p.min():.17g}, {p.max():.17g}]"
        )
    x = (uniforms < p).astype(np.float64)
    z += r * (x - z)
    ncnt += (x - ncnt) / (n + 1.0)
    return x


def step(
    state: ProcessState, network: HierarchicalNetwork, schedule: StepSizeSchedule
) -> ProcessState:
    """Advance one step: draw actions, update inclinations and action means.

    Returns a new state with fresh arrays; the random stream inside ``state``
    advances (it is the only mutable part of the state).
    """
    z, ncnt = state.copy_arrays()
    u = state.rng.random((1, z.size))
    _advance(
        z[None, :], ncnt[None, :], u, network.weights, schedule.step(state.n + 1), state.n
    )
    return ProcessState(n=state.n + 1, z=z, ncnt=ncnt, rng=state.rng)


def simulate_batch(
    weights: np.ndarray,
    schedule: StepSizeSchedule,
    z0: np.ndarray,
    horizon: int,
    rngs: list[np.random.Generator],
    record_steps=(),
    block: int = 512,
    collect_increments: bool = False,
):
    """Run a batch of trajectories with one stream per run.

    Parameters
    ----------
    z0 : (R, N) array of initial inclinations (already materialized).
    record_steps : iterable of step counts at which to snapshot (z, ncnt).

    Returns
    -------
    z, ncnt : final (R, N) arrays
    records : dict step -> (z copy, ncnt copy)
    increments : (R, horizon, N) array or None
    """
    z = np.array(z0, dtype=float)
    if z.ndim != 2:
        raise ValueError("z0 must be a (runs, agents) array")
    n_runs, n_agents = z.shape
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(rngs) != n_runs:
        raise ValueError("need one generator per run")
    ncnt = np.zeros_like(z)
    wanted = set(int(s) for s in record_steps)
    if any(s < 1 or s > horizon for s in wanted):
        raise ValueError("record steps must lie in [1, horizon]")
    records: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    increments = np.empty((n_runs, horizon, n_agents)) if collect_increments else None

    u = np.empty((n_runs, block, n_agents))
    n = 0
    while n < horizon:
        b = min(block, horizon - n)
        for i, g in enumerate(rngs):
            g.random(out=u[i, :b, :])
        for k in range(b):
            if collect_increments:
                p = _action_probabilities(z, weights)
                x = _advance(z, ncnt, u[:, k, :], weights, schedule.step(n + 1), n)
                increments[:, n, :] = x - p
            else:
                _advance(z, ncnt, u[:, k, :], weights, schedule.step(n + 1), n)
            n += 1
            if n in wanted:
                records[n] = (z.copy(), ncnt.copy())
    return z, ncnt, records, increments


def materialize_z0(values, random_mask, n_runs: int, rngs) -> np.ndarray:
    """Per-run initial vectors; masked entries draw one uniform each, in agent
    order, from the run's stream (before any step uniforms)."""
    base = np.asarray(values, dtype=float)
    mask = np.asarray(random_mask, dtype=bool)
    if base.shape != mask.shape or base.ndim != 1:
        raise ValueError("values and random_mask must be matching vectors")
    z0 = np.tile(base, (n_runs, 1))
    k = int(mask.sum())
    if k:
        for i, g in enumerate(rngs):
            z0[i, mask] = g.random(k)
    return z0


def run_trajectory(
    network: HierarchicalNetwork,
    schedule: StepSizeSchedule,
    z0,
    horizon: int,
    seed: int,
    run_index: int = 0,
    record_stride: int | None = None,
    collect_increments: bool = False,
) -> Trajectory:
    """Simulate one path, recording every ``record_stride`` steps plus the final state.

    Deterministic: the stream is derived solely from (seed, run_index), so
    identical inputs reproduce the trajectory bit for bit.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    stride = record_stride if record_stride is not None else max(1, horizon // 100)
    if stride < 1:
        raise ValueError("record_stride must be >= 1")
    z0 = np.asarray(z0, dtype=float)
    if (z0 < 0).any() or (z0 > 1).any():
        raise ValueError("initial inclinations must lie in [0, 1]")
    rng = derive_rng(seed, run_index)
    record_steps = sorted(set(range(stride, horizon + 1, stride)) | {horizon})
    z, ncnt, records, increments = simulate_batch(
        network.weights,
        schedule,
        z0[None, :],
        horizon,
        [rng],
        record_steps=record_steps,
        collect_increments=collect_increments,
    )
    recs = [(s, records[s][0][0].copy(), records[s][1][0].copy()) for s in record_steps]
    final = ProcessState(n=horizon, z=z[0], ncnt=ncnt[0], rng=rng)
    return Trajectory(
        record_stride=stride,
        records=recs,
        final=final,
        seed=seed,
        run_index=run_index,
        increments=None if increments is None else increments[0],
    )


def project(trajectory: Trajectory, spectral: SpectralDecomposition) -> ProjectedSeries:
    """Spectral coordinates of the recorded states.

    z_tilde is the weighted average N**-0.5 q_1^T Z, z_hat the chain-space
    component P Q^T Z, and n_hat the action-mean deviation N - z_tilde * 1.
    The identity Z = z_tilde * 1 + z_hat reconstructs each record.
    """
    n = spectral.n_agents
    if trajectory.final.z.size != n:
        raise ValueError("spectral decomposition does not match trajectory dimension")
    steps = np.array([s for s, _, _ in trajectory.records])
    zmat = np.stack([z for _, z, _ in trajectory.records])
    nmat = np.stack([m for _, _, m in trajectory.records])
    q1 = np.real(spectral.q1)
    z_tilde = zmat @ q1 / np.sqrt(n)
    z_hat = zmat @ spectral.projector().T
    n_hat = nmat - z_tilde[:, None]
    return ProjectedSeries(
        steps=steps,
        z_tilde=z_tilde,
        z_hat=z_hat,
        n_hat=n_hat,
        increments=trajectory.increments,
    )


def spread(z) -> float:
    """Synchronization diagnostic max_i z_i - min_i z_i."""
    z = np.asarray(z, dtype=float)
    return float(z.max() - z.min())


def trajectory_to_csv(trajectory: Trajectory, path) -> None:
    """Write records as CSV with header ``n,Z_1..Z_N,N_1..N_N``."""
    n_agents = trajectory.final.z.size
    header = (
        ["n"]
        + [f"Z_{i + 1}" for i in range(n_agents)]
        + [f"N_{i + 1}" for i in range(n_agents)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s, z, m in trajectory.records:
            writer.writerow(
                [s] + [format(v, ".17g") for v in z] + [format(v, ".17g") for v in m]
            )
