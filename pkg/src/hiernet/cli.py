"""Command-line entry point.

Subcommands: validate, simulate, ensemble, covariance, test, ci, region,
table1, figures, oracle.  All file outputs are RFC-4180-style CSV with a
header row or UTF-8 JSON.  Exit codes: 0 success, 1 validation error,
2 refusal because the requested (gamma, c, spectrum) combination has no
limit law.  Errors are emitted as one JSON object on stderr.

Every command echoes (or writes next to its output) a manifest with the
resolved configuration, the master seed and a hash of both, so any output
can be reproduced from its manifest alone.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .model import (
    NetworkValidationError,
    StepSizeSchedule,
    load_config,
    network_violations,
)
from .spectral import (
    Regime,
    SpectralValidationError,
    build_example2,
    spectral_from_json,
)
from .simulate import run_trajectory, trajectory_to_csv
from .asymptotics import RegimeError, covariance_report, limit_sum_analytic, limit_sum_oracle
from .inference import ci_z_infinity, confidence_region, test_statistic
from .montecarlo import (
    EnsembleConfig,
    InitialCondition,
    calibration_run,
    clt_check,
    density_report,
    run_ensemble,
    sim_scenarios,
    table1,
)

DEFAULT_SEED = 424243


def _json_ready(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"real": obj.real.tolist(), "imag": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, Regime):
        return obj.value
    return obj


def _manifest(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    blob = json.dumps(_json_ready(cfg), sort_keys=True)
    return {
        "version": __version__,
        "config": _json_ready(cfg),
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
    }


def _emit(payload: dict, args) -> None:
    payload = dict(payload)
    payload["manifest"] = _manifest(args)
    json.dump(_json_ready(payload), sys.stdout, indent=1)
    sys.stdout.write("\n")


def _write_manifest(path: str, args) -> None:
    with open(str(path) + ".manifest.json", "w") as fh:
        json.dump(_manifest(args), fh, indent=1)
        fh.write("\n")


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _parse_complex(text: str) -> complex:
    parts = [float(v) for v in text.split(",")]
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) == 2:
        return complex(parts[0], parts[1])
    raise ValueError(f"cannot parse complex number from {text!r}")


def _parse_range(text: str):
    lo, hi, steps = text.split(":")
    return np.linspace(float(lo), float(hi), int(steps))


def _load_network_spectral(args, need_spectral: bool):
    network, schedule, spectral_raw = load_config(args.network)
    if getattr(args, "gamma", None) is not None or getattr(args, "c", None) is not None:
        schedule = StepSizeSchedule(
            gamma=args.gamma if args.gamma is not None else schedule.gamma,
            c=args.c if args.c is not None else schedule.c,
            r_max=schedule.r_max,
        )
    spectral = None
    if getattr(args, "spectral", None):
        with open(args.spectral) as fh:
            spectral_raw = json.load(fh)
    if spectral_raw is not None:
        spectral = spectral_from_json(network, spectral_raw)
    if need_spectral and spectral is None:
        raise ValueError(
            "this command needs spectral data: embed a 'spectral' object in the "
            "network JSON or pass --spectral"
        )
    return network, schedule, spectral


def _read_state(path: str, n_flag: int | None):
    """Last recorded state of a trajectory CSV; returns (n, Z vector)."""
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"no state rows in {path}")
    z_cols = [i for i, name in enumerate(header) if name.startswith("Z_")]
    if not z_cols:
        raise ValueError("state CSV must carry Z_1..Z_N columns")
    last = rows[-1]
    n = int(float(last[0])) if n_flag is None else n_flag
    z = np.array([float(last[i]) for i in z_cols])
    return n, z


# Subcommand handlers ---------------------------------------------------------


def _cmd_validate(args) -> int:
    with open(args.network) as fh:
        cfg = json.load(fh)
    violations = network_violations(
        np.asarray(cfg["weights"], dtype=float), cfg["block_sizes"]
    )
    if violations:
        _emit(
            {
                "valid": False,
                "violations": [
                    {"code": v.code, "location": list(v.location), "detail": v.detail}
                    for v in violations
                ],
            },
            args,
        )
        return 1
    _emit({"valid": True}, args)
    return 0


def _cmd_simulate(args) -> int:
    network, schedule, _ = _load_network_spectral(args, need_spectral=False)
    trajectory = run_trajectory(
        network,
        schedule,
        _parse_vector(args.z0),
        args.horizon,
        seed=args.seed,
        run_index=args.run_index,
        record_stride=args.stride,
    )
    trajectory_to_csv(trajectory, args.out)
    _write_manifest(args.out, args)
    _emit({"out": args.out, "final_n": trajectory.final.n}, args)
    return 0


def _cmd_ensemble(args) -> int:
    network, schedule, spectral = _load_network_spectral(args, need_spectral=False)
    z0 = _parse_vector(args.z0)
    mask = None
    if args.random_mask:
        mask = tuple(bool(int(v)) for v in args.random_mask.split(","))
    config = EnsembleConfig(
        network=network,
        schedule=schedule,
        z0=InitialCondition(values=tuple(z0), random_mask=mask),
        horizon=args.horizon,
        n_sims=args.sims,
        master_seed=args.seed,
        workers=args.workers,
    )
    summary = run_ensemble(config, spectral)
    payload = {
        "n_sims": args.sims,
        "horizon": args.horizon,
        "proportions": summary.proportions,
        "median_spread": float(np.median(summary.spread)),
    }
    if summary.z_tilde is not None:
        payload["mean_z_tilde"] = float(summary.z_tilde.mean())
    if args.out:
        np.savetxt(
            args.out,
            np.hstack([summary.final_z, summary.final_ncnt]),
            delimiter=",",
            header=",".join(
                [f"Z_{i+1}" for i in range(network.n_agents)]
                + [f"N_{i+1}" for i in range(network.n_agents)]
            ),
            comments="",
        )
        _write_manifest(args.out, args)
        payload["out"] = args.out
    _emit(payload, args)
    return 0


def _cmd_covariance(args) -> int:
    network, schedule, spectral = _load_network_spectral(args, need_spectral=True)
    report = covariance_report(spectral, schedule)
    payload = {
        "regime": report.regime,
        "scaling": report.scaling,
        "blocks": {k: v for k, v in report.blocks.items()},
        "joint": report.joint,
    }
    if args.csv_dir:
        import os

        os.makedirs(args.csv_dir, exist_ok=True)
        for name, mat in report.blocks.items():
            out = np.asarray(mat)
            if np.iscomplexobj(out):
                out = out.real
            np.savetxt(f"{args.csv_dir}/{name}.csv", np.atleast_2d(out), delimiter=",")
        np.savetxt(f"{args.csv_dir}/joint.csv", report.joint, delimiter=",")
    _emit(payload, args)
    return 0


def _cmd_test(args) -> int:
    args.network = args.w0
    network, schedule, spectral = _load_network_spectral(args, need_spectral=True)
    n, z = _read_state(args.state, args.n)
    outcome = test_statistic(z, n, schedule, spectral)
    _emit(
        {
            "statistic": outcome.statistic,
            "dof": outcome.dof,
            "p_value": outcome.p_value,
            "regime": outcome.regime,
            "mixing_proxy": outcome.mixing_proxy,
            "degenerate": outcome.degenerate,
            "reject_at_level": bool(outcome.p_value < 1.0 - args.level),
        },
        args,
    )
    return 0


def _cmd_ci(args) -> int:
    network, schedule, spectral = _load_network_spectral(args, need_spectral=True)
    n, z = _read_state(args.state, args.n)
    ci = ci_z_infinity(z, n, schedule, spectral, level=args.level)
    _emit(
        {"center": ci.center, "lower": ci.lower, "upper": ci.upper, "level": ci.level},
        args,
    )
    return 0


def _cmd_region(args) -> int:
    n, z = _read_state(args.state, args.n)
    schedule = StepSizeSchedule(gamma=args.gamma, c=args.c)
    alphas = _parse_range(args.alpha_range)
    betas = _parse_range(args.beta_range)
    grid = [(a, b) for a in alphas for b in betas]

    def builder(theta):
        a, b = theta
        return build_example2(args.n1, args.n2, a, b)

    accepted, surface = confidence_region(grid, builder, z, n, schedule, level=args.level)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "statistic", "dof", "accepted", "valid"])
        for point in surface:
            writer.writerow(
                [
                    point.theta[0],
                    point.theta[1],
                    point.statistic,
                    point.dof,
                    int(point.accepted),
                    int(point.valid),
                ]
            )
    _write_manifest(args.out, args)
    _emit({"accepted_count": len(accepted), "grid_size": len(grid), "out": args.out}, args)
    return 0


def _cmd_table1(args) -> int:
    rows, _ = table1(
        n_sims=args.sims,
        horizon=args.horizon,
        master_seed=args.seed,
        workers=args.workers,
    )
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "z0_label", "bin_low", "bin_mid", "bin_high", "boundary"])
        for row in rows:
            writer.writerow(
                [
                    row["alpha"],
                    row["z0_label"],
                    f"{row['bin_low']:.2f}",
                    f"{row['bin_mid']:.2f}",
                    f"{row['bin_high']:.2f}",
                    f"{row['boundary']:.2f}",
                ]
            )
    _write_manifest(args.out, args)
    _emit({"rows": len(rows), "out": args.out}, args)
    return 0


def _cmd_figures(args) -> int:
    import os

    from .spectral import build_sim_network

    os.makedirs(args.out, exist_ok=True)
    written = []
    for alpha, z0 in sim_scenarios():
        network, spectral = build_sim_network(alpha, 0.5)
        config = EnsembleConfig(
            network=network,
            schedule=StepSizeSchedule(gamma=0.9, c=1.0),
            z0=z0,
            horizon=args.horizon,
            n_sims=args.sims,
            master_seed=args.seed,
            workers=args.workers,
        )
        summary = run_ensemble(config, spectral)
        report = density_report(summary)
        label = z0.label.replace("(", "").replace(")", "").replace(",", "_")
        path = os.path.join(args.out, f"density_a{alpha}_z0_{label}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            names = sorted(report.kde)
            writer.writerow(["x"] + [f"kde_{n}" for n in names])
            for i, x in enumerate(report.grid):
                writer.writerow(
                    [x]
                    + [
                        report.kde[n][i] if report.kde[n] is not None else ""
                        for n in names
                    ]
                )
        written.append(path)
    _write_manifest(args.out, args)
    _emit({"files": written}, args)
    return 0


def _ensemble_config_from_args(args, network, schedule) -> EnsembleConfig:
    z0 = _parse_vector(args.z0)
    mask = None
    if args.random_mask:
        mask = tuple(bool(int(v)) for v in args.random_mask.split(","))
    return EnsembleConfig(
        network=network,
        schedule=schedule,
        z0=InitialCondition(values=tuple(z0), random_mask=mask),
        horizon=args.horizon,
        n_sims=args.sims,
        master_seed=args.seed,
        workers=args.workers,
    )


def _cmd_clt_check(args) -> int:
    import os

    network, schedule, spectral = _load_network_spectral(args, need_spectral=True)
    from .spectral import classify_regime

    regime = classify_regime(schedule.gamma, schedule.c, spectral)
    config = _ensemble_config_from_args(args, network, schedule)
    rep = clt_check(
        config, spectral, regime, min_non_degenerate=args.min_non_degenerate
    )
    payload = {
        "regime": rep.regime,
        "n_used": rep.n_used,
        "n_degenerate": rep.n_degenerate,
        "mean_mixing": rep.mean_mixing,
        "theory": rep.theory,
        "empirical": rep.empirical,
        "rel_errors": rep.rel_errors,
        "max_rel_error": rep.max_rel_error,
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"cltcheck_{rep.regime.value}.json")
        with open(path, "w") as fh:
            json.dump(_json_ready(payload), fh, indent=1)
        _write_manifest(path, args)
        payload = {"out": path, "max_rel_error": rep.max_rel_error}
    _emit(payload, args)
    return 0


def _cmd_calibrate(args) -> int:
    args.network = args.w0
    network, schedule, spectral = _load_network_spectral(args, need_spectral=True)
    from .spectral import classify_regime

    regime = classify_regime(schedule.gamma, schedule.c, spectral)
    config = _ensemble_config_from_args(args, network, schedule)
    rep = calibration_run(
        config,
        spectral,
        regime,
        level=args.level,
        min_non_degenerate=args.min_non_degenerate,
    )
    _emit(
        {
            "regime": regime,
            "dof": rep.dof,
            "n_statistics": int(rep.statistics.size),
            "n_degenerate": rep.n_degenerate,
            "mean": rep.mean,
            "var": rep.var,
            "ks_distance": rep.ks_distance,
            "rejection_rate": rep.rejection_rate,
            "rejection_ci": list(rep.rejection_ci),
        },
        args,
    )
    return 0


def _cmd_oracle(args) -> int:
    x = _parse_complex(args.x)
    y = _parse_complex(args.y)
    value = limit_sum_oracle(x, y, args.q, args.c, args.gamma, args.n)
    limit = limit_sum_analytic(x, y, args.q, args.c, args.gamma)
    _emit(
        {
            "value": value,
            "analytic_limit": limit,
            "abs_error": abs(value - limit),
        },
        args,
    )
    return 0


# Parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiernet",
        description="Reinforced stochastic processes on hierarchical networks: "
        "simulation, asymptotic covariances and structure tests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=handler)
        return p

    p = add("validate", _cmd_validate, "check a network config against the model invariants")
    p.add_argument("--network", required=True, help="network config JSON")

    p = add("simulate", _cmd_simulate, "simulate one trajectory to CSV")
    p.add_argument("--network", required=True)
    p.add_argument("--z0", required=True, help="comma-separated initial inclinations")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None, help="override config gamma")
    p.add_argument("--c", type=float, default=None, help="override config c")
    p.add_argument("--out", required=True)

    p = add("ensemble", _cmd_ensemble, "run an ensemble and summarize final states")
    p.add_argument("--network", required=True)
    p.add_argument("--z0", required=True)
    p.add_argument("--random-mask", default=None, help="comma-separated 0/1 flags")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--sims", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--out", default=None, help="optional CSV of final states")

    p = add("covariance", _cmd_covariance, "emit the asymptotic covariance report")
    p.add_argument("--network", required=True)
    p.add_argument("--spectral", default=None, help="spectral data JSON (overrides embedded)")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--csv-dir", default=None)

    p = add("test", _cmd_test, "chi-square structure test against a hypothesized network")
    p.add_argument("--w0", required=True, help="hypothesized network config JSON")
    p.add_argument("--spectral", default=None)
    p.add_argument("--state", required=True, help="trajectory CSV; last row is tested")
    p.add_argument("--n", type=int, default=None, help="override the step count")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--level", type=float, default=0.95)

    p = add("ci", _cmd_ci, "confidence interval for the synchronization limit")
    p.add_argument("--network", required=True)
    p.add_argument("--spectral", default=None)
    p.add_argument("--state", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--level", type=float, default=0.95)

    p = add("region", _cmd_region, "confidence region for two-group parameters by test inversion")
    p.add_argument("--state", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--alpha-range", required=True, help="lo:hi:steps")
    p.add_argument("--beta-range", required=True, help="lo:hi:steps")
    p.add_argument("--n1", type=int, default=2)
    p.add_argument("--n2", type=int, default=2)
    p.add_argument("--out", required=True)

    p = add("table1", _cmd_table1, "pooled final-state percentages for the 12 study scenarios")
    p.add_argument("--sims", type=int, default=5000)
    p.add_argument("--horizon", type=int, default=20000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("figures", _cmd_figures, "density data for the study's distribution figures")
    p.add_argument("--sims", type=int, default=5000)
    p.add_argument("--horizon", type=int, default=20000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = add("clt-check", _cmd_clt_check, "ensemble covariance of scaled deviations vs. theory")
    p.add_argument("--network", required=True)
    p.add_argument("--spectral", default=None)
    p.add_argument("--z0", required=True)
    p.add_argument("--random-mask", default=None)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--sims", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--min-non-degenerate", type=int, default=None)
    p.add_argument("--out", default=None, help="directory for cltcheck_<regime>.json")

    p = add("calibrate", _cmd_calibrate, "null-distribution diagnostics of the structure test")
    p.add_argument("--w0", required=True)
    p.add_argument("--spectral", default=None)
    p.add_argument("--z0", required=True)
    p.add_argument("--random-mask", default=None)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--sims", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--level", type=float, default=0.05, help="rejection level alpha")
    p.add_argument("--min-non-degenerate", type=int, default=None)

    p = add("oracle", _cmd_oracle, "finite-n step-size sum vs. its analytic limit")
    p.add_argument("--x", required=True, help="complex as re or re,im")
    p.add_argument("--y", required=True)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--n", type=int, default=1000000)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RegimeError as exc:
        json.dump({"error": {"type": "RegimeError", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (
        NetworkValidationError,
        SpectralValidationError,
        ValueError,
        FileNotFoundError,
        KeyError,
    ) as exc:
        json.dump(
            {"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr
        )
        sys.stderr.write("\n")
        return 1


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
