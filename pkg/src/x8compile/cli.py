"""Command-line entry point ``x8compile``.

Exit codes: 0 success, 1 job validation failure, 2 numerical or runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from x8compile.device import (
    JobValidationError,
    NoiseConfig,
    TruncationError,
    precompile_two_mode,
    read_job,
    run_job,
    validate_job,
)
from x8compile.driver import compile_phase, phase_grid, resolution_analysis, run_sweep, write_sweep_csv, write_trace_csv
from x8compile.measure import write_count_table
from x8compile.optics import Circuit, bs_two_mode_matrix, circuit_matrix, complete_sector_distance, gate_to_dict

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def parse_noise(text: str) -> NoiseConfig:
    """``eta,nbar[,placement]`` -> NoiseConfig."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected eta,nbar[,placement]")
    try:
        return NoiseConfig(float(parts[0]), float(parts[1]), *(parts[2:] or ["after"]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_sweep(args: argparse.Namespace) -> int:
    regularizer = args.regularizer
    if regularizer not in (None, "exact"):
        regularizer = float(regularizer)
    result = run_sweep(
        phase_grid(args.phi_min, args.phi_max, args.points),
        args.shots,
        args.runs,
        args.noise,
        strategy=args.strategy,
        paired=args.paired,
        regularizer=regularizer,
        seed=args.seed,
        native=args.native,
    )
    if args.out:
        write_sweep_csv(result, args.out)
    flagged = sum(r.status != "ok" for r in result.rows)
    _emit({"rows": len(result.rows), "flagged": flagged, "argmin_phi": result.argmin_phi(), "out": args.out})
    return EXIT_OK


def cmd_compile(args: argparse.Namespace) -> int:
    trace = compile_phase(args.phi0, args.lr, args.iters, args.backend, args.shots, args.seed, args.tol)
    if args.out:
        write_trace_csv(trace, args.out)
    _emit(
        {
            "iterations": len(trace.steps) - 1,
            "final_phi": trace.final_phi,
            "converged": trace.converged,
            "diverged": trace.diverged,
        }
    )
    return EXIT_RUNTIME if trace.diverged else EXIT_OK


def cmd_resolution(args: argparse.Namespace) -> int:
    rows = resolution_analysis(args.shots_list)
    print("shots,delta,sqrt_10_over_shots")
    for m, delta in rows:
        print(f"{m},{delta!r},{math.sqrt(10 / m)!r}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        issues = validate_job(read_job(args.job))
    except (ValueError, KeyError, TypeError) as exc:
        issues = [f"unreadable job: {exc}"]
    _emit({"ok": not issues, "violations": issues})
    return EXIT_INVALID if issues else EXIT_OK


def cmd_decompose(args: argparse.Namespace) -> int:
    word = Circuit(2, precompile_two_mode(args.theta, args.phi).gates)
    target = bs_two_mode_matrix(args.theta, args.phi, args.cutoff)
    distance = complete_sector_distance(circuit_matrix(word, args.cutoff), target, 2, args.cutoff)
    _emit({"gates": [gate_to_dict(g) for g in word.gates], "distance_up_to_phase": distance, "cutoff": args.cutoff})
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    job = read_job(args.job)
    table = run_job(job)
    out = Path(args.out) if args.out else Path(args.job).with_suffix(".counts.csv")
    csv_path, header_path = write_count_table(table, out)
    _emit({"shots": table.shots, "overflow": table.overflow, "counts": str(csv_path), "header": str(header_path)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="x8compile", description="Compile a zero-phase beamsplitter on a virtual X8.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="sample the ratio cost over a phase grid")
    p.add_argument("--phi-min", type=float, default=-math.pi / 2)
    p.add_argument("--phi-max", type=float, default=math.pi / 2)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--shots", type=int, default=50_000)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--noise", type=parse_noise, default=None, help="eta,nbar[,before|after]")
    p.add_argument("--strategy", choices=["serial", "parallel"], default=None)
    p.add_argument("--paired", action="store_true", help="fresh denominator job per row")
    p.add_argument("--regularizer", default=None, help="fixed denominator count, or 'exact'")
    p.add_argument("--native", action="store_true", help="precompile to PhaseShift/MachZehnder")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compile", help="gradient descent on the beamsplitter phase")
    p.add_argument("--phi0", type=float, default=1.0)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--backend", choices=["exact", "sampled"], default="exact")
    p.add_argument("--shots", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("resolution", help="phase resolution per shot budget")
    p.add_argument("--shots-list", type=_int_list, default=[100, 1000, 10_000, 100_000])
    p.set_defaults(func=cmd_resolution)

    p = sub.add_parser("validate", help="check a job file against the device constraints")
    p.add_argument("job")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("decompose", help="native word for BS(theta, phi)")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--cutoff", type=int, default=8)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("run", help="execute a job file and write its count table")
    p.add_argument("job")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except JobValidationError as exc:
        print(f"invalid job: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TruncationError, ValueError, ArithmeticError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
