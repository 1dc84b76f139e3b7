"""Network and step-size inputs shared by every other module.

A hierarchical network is a column-normalized adjacency matrix with a block
upper-triangular layout: agents are partitioned into ordered subgroups, and
weight ``w[h, j]`` (influence of agent ``h`` on agent ``j``) vanishes whenever
``h`` belongs to a later subgroup than ``j``.  The leading diagonal block must
be irreducible and every downstream diagonal block must have maximum column
sum strictly below one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "HierarchicalNetwork",
    "StepSizeSchedule",
    "NetworkValidationError",
    "Violation",
    "validate_network",
    "network_violations",
    "irreducibility_check",
    "step_size",
    "load_config",
    "dump_config",
]

COLUMN_SUM_TOL = 1e-12
ZERO_ENTRY_TOL = 1e-14


@dataclass(frozen=True)
class Violation:
    """One violated network invariant, with enough context to locate it."""

    code: str
    location: tuple
    detail: str

    def __str__(self) -> str:
        return f"{self.code}{self.location}: {self.detail}"


class NetworkValidationError(ValueError):
    """Raised when a weight matrix fails the hierarchical-network invariants."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class HierarchicalNetwork:
    """Validated column-normalized block upper-triangular network.

    Construct through :func:`validate_network`; direct construction skips the
    invariant checks.
    """

    weights: np.ndarray
    block_sizes: tuple[int, ...]

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def block_starts(self) -> tuple[int, ...]:
        out, acc = [], 0
        for s in self.block_sizes:
            out.append(acc)
            acc += s
        return tuple(out)

    def block_of(self, agent: int) -> int:
        """0-based block index of a 0-based agent index."""
        acc = 0
        for b, s in enumerate(self.block_sizes):
            acc += s
            if agent < acc:
                return b
        raise IndexError(agent)

    def block_slice(self, block: int) -> slice:
        start = self.block_starts[block]
        return slice(start, start + self.block_sizes[block])


@dataclass(frozen=True)
class StepSizeSchedule:
    """Step sizes r(n) = min(c * n**(-gamma), r_max).

    The clip keeps every step legal (r < 1) while leaving the tail, and hence
    all asymptotics, untouched: n**gamma * r(n) -> c, and for gamma = 1 the
    product n * r(n) equals c exactly beyond the clip point.  The k-th update
    of a trajectory (producing the state after k steps) uses r(k), so the
    first update engages the clip whenever c >= r_max.
    """

    gamma: float
    c: float
    r_max: float = 0.99

    def __post_init__(self):
        if not 0.5 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (1/2, 1], got {self.gamma}")
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0.0 < self.r_max < 1.0:
            raise ValueError(f"r_max must lie in (0, 1), got {self.r_max}")

    def step(self, n: int) -> float:
        if n < 1:
            raise ValueError("step index must be >= 1")
        return min(self.c * float(n) ** (-self.gamma), self.r_max)

    def sequence(self, n_max: int) -> np.ndarray:
        """Vector of r(n) for n = 1, ..., n_max."""
        n = np.arange(1, n_max + 1, dtype=float)
        return np.minimum(self.c * n ** (-self.gamma), self.r_max)

    @property
    def clip_point(self) -> int:
        """Smallest n >= 1 with c * n**(-gamma) <= r_max."""
        return max(1, int(np.ceil((self.c / self.r_max) ** (1.0 / self.gamma))))


def step_size(schedule: StepSizeSchedule, n: int) -> float:
    """Step size r(n) for step index n >= 1 (r(0) = r_max covers the first update)."""
    return schedule.step(n)


def irreducibility_check(block: np.ndarray) -> bool:
    """True iff the digraph with an edge h -> j whenever block[h, j] > 0 is
    strongly connected.

    Entries below ``ZERO_ENTRY_TOL`` in magnitude count as absent edges.  Uses
    one forward and one reverse reachability sweep from vertex 0.
    """
    a = np.asarray(block, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("block must be a square matrix")
    m = a.shape[0]
    if m == 0:
        raise ValueError("block must be non-empty")
    adj = np.abs(a) > ZERO_ENTRY_TOL
    return _reaches_all(adj, 0) and _reaches_all(adj.T, 0)


def _reaches_all(adj: np.ndarray, start: int) -> bool:
    m = adj.shape[0]
    seen = np.zeros(m, dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        h = stack.pop()
        for j in np.nonzero(adj[h])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def network_violations(weights: np.ndarray, block_sizes: Sequence[int]) -> list[Violation]:
    """All violated invariants of the would-be network (empty list if valid)."""
    w = np.asarray(weights, dtype=float)
    sizes = tuple(int(s) for s in block_sizes)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weights must be a square matrix")
    n = w.shape[0]
    if any(s <= 0 for s in sizes) or sum(sizes) != n:
        raise ValueError(f"block sizes {sizes} must be positive and sum to {n}")

    violations: list[Violation] = []

    col_sums = w.sum(axis=0)
    for j in np.nonzero(np.abs(col_sums - 1.0) > COLUMN_SUM_TOL)[0]:
        violations.append(
            Violation("NonNormalizedColumn", (int(j),), f"column sum {col_sums[j]:.15g}")
        )
    if (w < -ZERO_ENTRY_TOL).any():
        h, j = np.unravel_index(int(np.argmin(w)), w.shape)
        violations.append(
            Violation("NonNormalizedColumn", (int(j),), f"negative entry at ({h},{j})")
        )

    starts = np.cumsum((0,) + sizes)
    block_of = np.repeat(np.arange(len(sizes)), sizes)
    lower_mask = block_of[:, None] > block_of[None, :]
    bad = np.abs(w) > ZERO_ENTRY_TOL
    for h, j in zip(*np.nonzero(lower_mask & bad)):
        violations.append(
            Violation("LowerBlockNonZero", (int(h), int(j)), f"entry {w[h, j]:.3g}")
        )

    lead = w[: sizes[0], : sizes[0]]
    if not irreducibility_check(lead):
        violations.append(
            Violation("LeadingBlockReducible", (0,), "leading block digraph not strongly connected")
        )

    for b in range(1, len(sizes)):
        sub = w[starts[b] : starts[b + 1], starts[b] : starts[b + 1]]
        norm1 = np.abs(sub).sum(axis=0).max() if sub.size else 0.0
        if norm1 >= 1.0:
            violations.append(
                Violation("DownstreamNormTooLarge", (b,), f"L1 norm {norm1:.15g} >= 1")
            )
    return violations


def validate_network(weights: np.ndarray, block_sizes: Sequence[int]) -> HierarchicalNetwork:
    """Construct a :class:`HierarchicalNetwork`, raising on any violated invariant.

    Raises
    ------
    NetworkValidationError
        Carrying the full list of violations (every one found, not just the first).
    """
    violations = network_violations(weights, block_sizes)
    if violations:
        raise NetworkValidationError(violations)
    w = np.array(weights, dtype=float)
    w.setflags(write=False)
    return HierarchicalNetwork(weights=w, block_sizes=tuple(int(s) for s in block_sizes))


_CONFIG_KEYS = {"weights", "block_sizes", "gamma", "c", "r_max", "spectral"}


def load_config(path) -> tuple[HierarchicalNetwork, StepSizeSchedule, dict | None]:
    """Read a network + schedule config from a JSON file.

    Keys: ``weights`` (row-major, entry [h][j] = w_hj), ``block_sizes``,
    ``gamma``, ``c``, optional ``r_max`` (default 0.99), optional ``spectral``
    (passed through raw for :func:`hiernet.spectral.spectral_from_json`).
    Unknown keys are rejected.
    """
    with open(path) as fh:
        cfg = json.load(fh)
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("weights", "block_sizes", "gamma", "c"):
        if key not in cfg:
            raise ValueError(f"config missing required key {key!r}")
    network = validate_network(np.asarray(cfg["weights"], dtype=float), cfg["block_sizes"])
    schedule = StepSizeSchedule(
        gamma=float(cfg["gamma"]), c=float(cfg["c"]), r_max=float(cfg.get("r_max", 0.99))
    )
    return network, schedule, cfg.get("spectral")


def dump_config(network: HierarchicalNetwork, schedule: StepSizeSchedule, path, spectral: dict | None = None) -> None:
    """Write a config JSON readable by :func:`load_config`."""
    cfg = {
        "weights": network.weights.tolist(),
        "block_sizes": list(network.block_sizes),
        "gamma": schedule.gamma,
        "c": schedule.c,
        "r_max": schedule.r_max,
    }
    if spectral is not None:
        cfg["spectral"] = spectral
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=1)
        fh.write("\n")
