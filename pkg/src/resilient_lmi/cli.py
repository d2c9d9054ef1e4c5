"""Command-line front end: synth, verify and simulate.

Exit codes: 0 success (synthesized and certified / stable / empirically
stable), 2 completed but not certified or not stable, 3 certifiably
infeasible (synth only), 4 numerical failure (synth only), 1 bad input or
I/O trouble.  A feasible solve always writes the gains file, even when
certification then fails; reports are written for exits 0 and 2.

Reports echo the command line, the config path and its SHA-256 digest, the
numeric settings used, the result fields and wall-clock timings.  Timings
are the one report section that varies between identical runs; everything
else, including the gains file and the CSVs, is byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from . import fileio, simulator, synthesis
from .linalg import LinalgError
from .model import ValidationError
from .simulator import SimConfig

__all__ = ["build_parser", "cmd_synth", "cmd_verify", "cmd_simulate", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resilient-lmi",
        description=(
            "Synthesize and check observer-based controllers that keep a "
            "discrete-time plant mean-square stable under stochastic "
            "sensor and actuator attacks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="solve the synthesis inequality for gains")
    synth.add_argument("config", help="problem config JSON")
    synth.add_argument("--out", default=".", help="output directory (default: .)")
    synth.set_defaults(func=cmd_synth)

    verify = sub.add_parser("verify", help="certify given gains by spectral radius")
    verify.add_argument("config", help="problem config JSON")
    verify.add_argument("gains", help="gains JSON with K and L")
    verify.add_argument("--out", default=".", help="output directory (default: .)")
    verify.set_defaults(func=cmd_verify)

    sim = sub.add_parser("simulate", help="Monte Carlo simulation of the attacked loop")
    sim.add_argument("config", help="problem config JSON (must provide x0)")
    sim.add_argument("gains", help="gains JSON with K and L")
    sim.add_argument("--runs", type=int, default=1000, help="number of runs (default: 1000)")
    sim.add_argument("--steps", type=int, default=100, help="steps per run (default: 100)")
    sim.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    sim.add_argument("--out", default=".", help="output directory (default: .)")
    sim.set_defaults(func=cmd_simulate)
    return parser


def _base_report(command: str, args, argv: list) -> dict:
    return {
        "command": command,
        "argv": list(argv),
        "config": str(args.config),
        "config_digest": fileio.config_digest(args.config),
    }


def _prepare_out(args) -> str:
    out = str(args.out)
    os.makedirs(out, exist_ok=True)
    return out


def cmd_synth(args, argv: list) -> int:
    t0 = time.perf_counter()
    report = _base_report("synth", args, argv)
    doc = fileio.load_config(args.config)
    report["settings"] = dataclasses.asdict(doc.settings)
    out = _prepare_out(args)
    t1 = time.perf_counter()
    try:
        result = synthesis.synthesize(doc.system, doc.settings)
    except synthesis.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except synthesis.NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    t2 = time.perf_counter()
    fileio.write_gains_file(
        os.path.join(out, "gains.json"),
        result.gains,
        Q1=result.Q1,
        Q2=result.variables.Q2,
        lmi_margin=result.lmi_margin,
        oracle_rho=result.oracle_rho,
    )
    report.update(
        lmi_margin=result.lmi_margin,
        oracle_rho=result.oracle_rho,
        certified=result.certified,
        w_condition=result.w_condition,
        iterations=result.iterations,
        timings_s={"load": t1 - t0, "solve": t2 - t1, "total": time.perf_counter() - t0},
    )
    fileio.write_report(os.path.join(out, "report.json"), report)
    if result.certified:
        print(f"certified: oracle_rho={result.oracle_rho:.6f} margin={result.lmi_margin:.3e}")
        return 0
    print(
        f"uncertified: feasible but oracle_rho={result.oracle_rho:.6f} >= 1",
        file=sys.stderr,
    )
    return 2


def cmd_verify(args, argv: list) -> int:
    t0 = time.perf_counter()
    report = _base_report("verify", args, argv)
    doc = fileio.load_config(args.config)
    gains = fileio.load_gains(args.gains, doc.system.plant)
    report["gains"] = str(args.gains)
    report["gains_digest"] = fileio.config_digest(args.gains)
    report["settings"] = dataclasses.asdict(doc.settings)
    out = _prepare_out(args)
    rho, stable = synthesis.verify_gains(doc.system, gains, doc.settings)
    report.update(
        oracle_rho=rho,
        stable=stable,
        timings_s={"total": time.perf_counter() - t0},
    )
    fileio.write_report(os.path.join(out, "report.json"), report)
    if stable:
        print(f"stable: oracle_rho={rho:.6f}")
        return 0
    print(f"not mean-square stable: oracle_rho={rho:.6f}", file=sys.stderr)
    return 2


def cmd_simulate(args, argv: list) -> int:
    t0 = time.perf_counter()
    report = _base_report("simulate", args, argv)
    doc = fileio.load_config(args.config)
    gains = fileio.load_gains(args.gains, doc.system.plant)
    report["gains"] = str(args.gains)
    report["gains_digest"] = fileio.config_digest(args.gains)
    report["settings"] = dataclasses.asdict(doc.settings)
    if doc.x0 is None:
        raise fileio.ConfigError("config lacks x0, required for simulation")
    xhat0 = doc.xhat0 if doc.xhat0 is not None else np.zeros(doc.system.plant.n)
    cfg = SimConfig(
        steps=args.steps, runs=args.runs, seed=args.seed, x0=doc.x0, xhat0=xhat0
    )
    out = _prepare_out(args)
    t1 = time.perf_counter()
    estimate = simulator.monte_carlo(
        doc.system, gains, cfg, keep_trajectories=True, settings=doc.settings
    )
    t2 = time.perf_counter()
    fileio.write_trajectories_csv(
        os.path.join(out, "trajectories.csv"), estimate.trajectories
    )
    fileio.write_mean_square_csv(
        os.path.join(out, "mean_square.csv"), estimate.mean_square
    )
    report.update(
        runs=cfg.runs,
        steps=cfg.steps,
        seed=cfg.seed,
        decay_slope=estimate.decay_slope,
        empirically_stable=estimate.empirically_stable,
        usable=estimate.usable,
        valid_runs_final=int(estimate.valid_runs[-1]),
        mean_square_final=float(estimate.mean_square[-1]),
        timings_s={
            "load": t1 - t0,
            "simulate": t2 - t1,
            "total": time.perf_counter() - t0,
        },
    )
    fileio.write_report(os.path.join(out, "report.json"), report)
    if estimate.empirically_stable:
        print(f"empirically stable: decay_slope={estimate.decay_slope:.6f}")
        return 0
    print(
        f"not empirically stable: decay_slope={estimate.decay_slope!r} "
        f"valid_runs_final={int(estimate.valid_runs[-1])}",
        file=sys.stderr,
    )
    return 2


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args, argv)
    except (fileio.ConfigError, ValidationError, LinalgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
