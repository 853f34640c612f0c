"""Command-line entry points for running and inspecting experiments."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .channel import TrialStream, generate_channels, generate_direct_channels
from .harness import (
    REGISTRY,
    ExperimentSpec,
    SweepResult,
    TrialRecord,
    aggregate,
    estimate_multiplexing_gain,
    list_algorithms,
    run_sweep,
    serialize_results,
)

EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relayalign",
        description="Monte Carlo experiments for relay interference networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a sweep and write result files")
    sim.add_argument("--spec", required=True, help="JSON experiment spec file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--trials", type=int, default=None, help="override trial count")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument("--threads", type=int, default=1, help="worker processes")

    trace = sub.add_parser(
        "convergence-trace", help="print one algorithm's objective trace as CSV"
    )
    trace.add_argument("--spec", required=True, help="JSON experiment spec file")
    trace.add_argument("--trial", type=int, required=True, help="trial index")
    trace.add_argument("--algorithm", required=True, help="registry name")
    trace.add_argument(
        "--p-db", type=float, default=20.0, help="power level in dB (default 20)"
    )

    mux = sub.add_parser("mux-gain", help="estimate high-power slopes from a CSV")
    mux.add_argument("--in", dest="infile", required=True, help="results.csv path")
    mux.add_argument(
        "--window-db", type=float, default=20.0, help="top window width in dB"
    )

    sub.add_parser("list-algorithms", help="list registry names")
    return parser


def _load_spec(path: str, trials: int | None, seed: int | None) -> ExperimentSpec:
    spec = ExperimentSpec.from_json_file(path)
    if trials is not None or seed is not None:
        data = spec.to_dict()
        if trials is not None:
            data["trials"] = trials
        if seed is not None:
            data["master_seed"] = seed
        spec = ExperimentSpec.from_dict(data)
    return spec


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        spec = _load_spec(args.spec, args.trials, args.seed)
    except (ValueError, TypeError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    collected: list[TrialRecord] = []
    try:
        result = run_sweep(spec, threads=max(1, args.threads), collect=collected)
        serialize_results(result, args.out)
    except Exception as exc:
        # keep whatever trials completed before the failure
        partial = SweepResult(
            spec=spec, records=collected, aggregates=aggregate(spec, collected)
        )
        try:
            serialize_results(partial, args.out)
        except Exception:
            pass
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    for row in result.aggregates:
        print(
            f"{row.algorithm} P={row.p_db:g} dB: "
            f"{row.mean_sum_rate_bits:.4f} +- {row.stderr:.4f} bits ({row.trials} trials)"
        )
    print(f"wrote results to {Path(args.out)}")
    return EXIT_OK


def _cmd_convergence_trace(args: argparse.Namespace) -> int:
    try:
        spec = ExperimentSpec.from_json_file(args.spec)
        if args.algorithm not in REGISTRY:
            raise ValueError(f"unknown algorithm {args.algorithm!r}")
        if not 0 <= args.trial < spec.trials:
            raise ValueError(
                f"trial must be in [0, {spec.trials}), got {args.trial}"
            )
    except ValueError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    try:
        alg = REGISTRY[args.algorithm]
        config = spec.config_at(args.p_db)
        stream = TrialStream(master_seed=spec.master_seed, trial=args.trial)
        ch = generate_channels(stream, config)
        direct = (
            generate_direct_channels(stream, config)
            if args.algorithm.startswith("direct-")
            else None
        )
        outcome = alg.run(ch, direct, config, spec.stop, stream, 0)
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    if not outcome.trace:
        print(
            f"spec error: {args.algorithm} records no convergence trace",
            file=sys.stderr,
        )
        return EXIT_SPEC_ERROR
    print("iteration,objective")
    for i, value in enumerate(outcome.trace):
        print(f"{i},{value!r}")
    return EXIT_OK


def _cmd_mux_gain(args: argparse.Namespace) -> int:
    points: dict[str, list[tuple[float, float]]] = {}
    try:
        with open(args.infile, newline="") as fh:
            for row in csv.DictReader(fh):
                if int(row["mux_estimate_flag"]) == 0:
                    continue
                points.setdefault(row["algorithm"], []).append(
                    (float(row["p_db"]), float(row["mean_sum_rate_bits"]))
                )
    except OSError as exc:
        print(f"spec error: cannot read {args.infile}: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    except (KeyError, ValueError) as exc:
        print(f"spec error: malformed results file: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    if not points:
        print("spec error: no usable rows in input", file=sys.stderr)
        return EXIT_SPEC_ERROR
    print("algorithm,multiplexing_gain")
    try:
        for name, series in points.items():
            slope = estimate_multiplexing_gain(series, window_db=args.window_db)
            print(f"{name},{slope!r}")
    except ValueError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    return EXIT_OK


def _cmd_list_algorithms() -> int:
    for name, description in list_algorithms():
        print(f"{name}: {description}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "convergence-trace":
        return _cmd_convergence_trace(args)
    if args.command == "mux-gain":
        return _cmd_mux_gain(args)
    return _cmd_list_algorithms()


if __name__ == "__main__":
    sys.exit(main())
