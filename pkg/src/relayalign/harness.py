"""Seeded Monte Carlo experiments: power sweeps, aggregation, serialization.

A sweep fixes a symmetric network shape and draws one channel realization per
trial; the same realization and the same random initialization are reused for
every power level and every algorithm, so curves differ only through the
designs themselves.  All randomness is pre-split per trial, which makes the
output independent of how trials are scheduled across worker processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .baselines import (
    SingleHopProblem,
    af_tdma,
    df_two_hop,
    selfish_bf,
    single_hop_leakage_ia,
    single_hop_wmmse,
)
from .channel import (
    DOMAIN_BASELINE,
    ChannelRealization,
    TrialStream,
    child_rng,
    generate_channels,
    generate_direct_channels,
)
from .config import StoppingRule, SystemConfig, parse_shape, symmetric_config
from .metrics import pair_rate
from .network import effective_channels, random_init
from .qcqp import SolveStats
from .total_leakage import tl_run
from .wmse import (
    NO_POWER_CONTROL,
    POWER_CONTROL,
    POWER_CONTROL_PER_RELAY,
    WmseVariant,
    wmse_run,
)

TWO_HOP = "two-hop"        # raw rate needs the half-duplex factor
SINGLE_HOP = "single-hop"  # direct transmission, no factor
END_TO_END = "end-to-end"  # strategy already returns end-to-end rates

TRACE_POINTS = 200  # stored convergence traces are decimated to this length


def end_to_end_rate(raw_sum_rate: float, scheme: str) -> float:
    """Apply the half-duplex loss to a raw two-hop rate."""
    if scheme == TWO_HOP:
        return 0.5 * raw_sum_rate
    if scheme == SINGLE_HOP:
        return raw_sum_rate
    raise ValueError(f"unknown rate scheme {scheme!r}")


@dataclass
class AlgorithmOutcome:
    """What one algorithm produced on one (trial, power) cell."""

    per_pair_rates: list[float]  # rates as the strategy reports them
    sum_rate_bits: float         # their sum, before any half-duplex factor
    scheme: str                  # how to turn the sum into an end-to-end rate
    iterations: int              # trace records produced, 0 for one-shot designs
    trace: list[float]           # decimated objective trace, possibly empty
    fallbacks: int               # subproblem solves that needed the rank fallback

    def end_to_end_sum(self) -> float:
        if self.scheme == END_TO_END:
            return self.sum_rate_bits
        return end_to_end_rate(self.sum_rate_bits, self.scheme)


@dataclass
class TrialRecord:
    """All algorithm outcomes of one trial at one power level."""

    trial: int
    p_db: float
    outcomes: dict[str, AlgorithmOutcome] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)


def _decimate(values: list[float]) -> list[float]:
    if len(values) <= TRACE_POINTS:
        return list(values)
    step = math.ceil(len(values) / TRACE_POINTS)
    head = list(values[::step])
    if head[-1] != values[-1]:
        head.append(values[-1])
    return head


Runner = Callable[
    [ChannelRealization, "list[list[np.ndarray]] | None", SystemConfig, StoppingRule, TrialStream, int],
    AlgorithmOutcome,
]


@dataclass(frozen=True)
class Algorithm:
    """Registry entry: how to run one design and read its output."""

    name: str
    description: str
    scheme: str
    rng_tag: int  # fixed per-name stream id; never renumber
    run: Runner


def _final_rates(ch: ChannelRealization, state, config: SystemConfig) -> list[float]:
    eff = effective_channels(ch, state)
    return [pair_rate(eff, config, k) for k in range(config.K)]


def _run_leakage(ch, direct, config, stop, stream, init_index):
    init = random_init(ch, stream, config, init_index)
    stats = SolveStats()
    state, trace = tl_run(ch, config, init, stop=stop, stats=stats)
    rates = _final_rates(ch, state, config)
    return AlgorithmOutcome(
        per_pair_rates=rates,
        sum_rate_bits=float(sum(rates)),
        scheme=TWO_HOP,
        iterations=len(trace),
        trace=_decimate([r.total for r in trace]),
        fallbacks=stats.fallbacks,
    )


def _make_wmse_runner(variant: WmseVariant) -> Runner:
    def run(ch, direct, config, stop, stream, init_index):
        init = random_init(ch, stream, config, init_index)
        stats = SolveStats()
        state, trace = wmse_run(ch, config, init, variant, stop=stop, stats=stats)
        rates = _final_rates(ch, state, config)
        return AlgorithmOutcome(
            per_pair_rates=rates,
            sum_rate_bits=float(sum(rates)),
            scheme=TWO_HOP,
            iterations=len(trace),
            trace=_decimate([r.wmse_total for r in trace]),
            fallbacks=stats.fallbacks,
        )

    return run


def _run_af_tdma(ch, direct, config, stop, stream, init_index):
    rates = af_tdma(ch, config, stop)
    return AlgorithmOutcome(
        per_pair_rates=[float(r) for r in rates],
        sum_rate_bits=float(sum(rates)),
        scheme=TWO_HOP,
        iterations=0,
        trace=[],
        fallbacks=0,
    )


def _make_df_runner(strategy: str, rng_tag: int) -> Runner:
    def run(ch, direct, config, stop, stream, init_index):
        rng = child_rng(
            stream.master_seed, DOMAIN_BASELINE, stream.trial, rng_tag, init_index
        )
        rates = df_two_hop(ch, config, strategy, stop, rng)
        return AlgorithmOutcome(
            per_pair_rates=[float(r) for r in rates],
            sum_rate_bits=float(sum(rates)),
            scheme=END_TO_END,
            iterations=0,
            trace=[],
            fallbacks=0,
        )

    return run


def _direct_problem(direct, config: SystemConfig) -> SingleHopProblem:
    return SingleHopProblem(
        channels=direct,
        d=list(config.d),
        p_tx_max=list(config.p_tx_max),
        sigma2=list(config.sigma2_rx),
    )


def _make_direct_runner(strategy: str, rng_tag: int) -> Runner:
    def run(ch, direct, config, stop, stream, init_index):
        prob = _direct_problem(direct, config)
        if strategy == "sf":
            result = selfish_bf(prob)
        else:
            rng = child_rng(
                stream.master_seed, DOMAIN_BASELINE, stream.trial, rng_tag, init_index
            )
            fn = single_hop_leakage_ia if strategy == "tl" else single_hop_wmmse
            result = fn(prob, stop, rng)
        return AlgorithmOutcome(
            per_pair_rates=[float(r) for r in result.rates_bits],
            sum_rate_bits=float(sum(result.rates_bits)),
            scheme=SINGLE_HOP,
            iterations=len(result.trace),
            trace=_decimate(list(result.trace)),
            fallbacks=0,
        )

    return run


REGISTRY: dict[str, Algorithm] = {
    alg.name: alg
    for alg in [
        Algorithm(
            "alg1",
            "total-leakage minimization over relays and transmitters",
            TWO_HOP,
            0,
            _run_leakage,
        ),
        Algorithm(
            "alg2",
            "weighted-MSE minimization with equality power constraints",
            TWO_HOP,
            0,
            _make_wmse_runner(NO_POWER_CONTROL),
        ),
        Algorithm(
            "alg3",
            "weighted-MSE minimization with power control (sum relay budget)",
            TWO_HOP,
            0,
            _make_wmse_runner(POWER_CONTROL),
        ),
        Algorithm(
            "alg3-ind",
            "weighted-MSE minimization with power control, per-relay budgets",
            TWO_HOP,
            0,
            _make_wmse_runner(POWER_CONTROL_PER_RELAY),
        ),
        Algorithm(
            "af-tdma",
            "time-shared distributed beamforming, all relays on one pair",
            TWO_HOP,
            1,
            _run_af_tdma,
        ),
        Algorithm(
            "df-sf",
            "dedicated decode-and-forward, selfish beamforming on both hops",
            END_TO_END,
            2,
            _make_df_runner("sf", 2),
        ),
        Algorithm(
            "df-tl",
            "dedicated decode-and-forward, leakage alignment on both hops",
            END_TO_END,
            3,
            _make_df_runner("tl", 3),
        ),
        Algorithm(
            "df-sr",
            "dedicated decode-and-forward, weighted-MSE design on both hops",
            END_TO_END,
            4,
            _make_df_runner("sr", 4),
        ),
        Algorithm(
            "direct-sf",
            "direct transmission, selfish beamforming",
            SINGLE_HOP,
            5,
            _make_direct_runner("sf", 5),
        ),
        Algorithm(
            "direct-tl",
            "direct transmission, leakage alignment",
            SINGLE_HOP,
            6,
            _make_direct_runner("tl", 6),
        ),
        Algorithm(
            "direct-sr",
            "direct transmission, weighted-MSE design",
            SINGLE_HOP,
            7,
            _make_direct_runner("sr", 7),
        ),
    ]
}


def list_algorithms() -> list[tuple[str, str]]:
    """Registry names and one-line descriptions, in registry order."""
    return [(alg.name, alg.description) for alg in REGISTRY.values()]


@dataclass
class ExperimentSpec:
    """One reproducible sweep: shape, powers, algorithms, trial budget."""

    config: str                       # symmetric shorthand "(N_R x N_T, d)^K + N_X^M"
    power_sweep_db: list[float]       # strictly increasing power grid in dB
    algorithms: list[str]             # registry names, run in this order
    trials: int = 100                 # Monte Carlo trials per power level
    master_seed: int = 0              # root of every random stream
    n_inits: int = 1                  # initializations per trial, best kept
    stop: StoppingRule = field(default_factory=StoppingRule)

    def __post_init__(self) -> None:
        if isinstance(self.stop, dict):
            self.stop = StoppingRule(**self.stop)
        parse_shape(self.config)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_inits < 1:
            raise ValueError("n_inits must be >= 1")
        if len(self.power_sweep_db) == 0:
            raise ValueError("power sweep must be non-empty")
        if any(b <= a for a, b in zip(self.power_sweep_db, self.power_sweep_db[1:])):
            raise ValueError("power sweep must be strictly increasing")
        unknown = [a for a in self.algorithms if a not in REGISTRY]
        if unknown:
            raise ValueError(f"unknown algorithms: {', '.join(unknown)}")
        shape = parse_shape(self.config)
        if shape.K != shape.M and any(a.startswith("df-") for a in self.algorithms):
            raise ValueError("dedicated decode-and-forward baselines need K = M")

    def config_at(self, p_db: float) -> SystemConfig:
        """Budgets at one sweep point: every node gets P, relays share M*P."""
        p = 10.0 ** (p_db / 10.0)
        return symmetric_config(self.config, p_tx=p, p_relay=p)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        allowed = {
            "config",
            "power_sweep_db",
            "algorithms",
            "trials",
            "master_seed",
            "n_inits",
            "stop",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown spec fields: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ValueError(f"cannot read spec file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"spec file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"spec file {path} must hold a JSON object")
        return cls.from_dict(data)


@dataclass
class AggregateRow:
    """Mean curve point for one algorithm at one power level."""

    algorithm: str
    p_db: float
    mean_sum_rate_bits: float
    stderr: float
    trials: int  # error-free trials behind the mean

    @property
    def mux_estimate_flag(self) -> int:
        # slope estimation needs a minimally trustworthy mean
        return 1 if self.trials >= 3 else 0


@dataclass
class SweepResult:
    """Everything a sweep produced, per-trial and aggregated."""

    spec: ExperimentSpec
    records: list[TrialRecord]
    aggregates: list[AggregateRow]


def run_trial(spec: ExperimentSpec, trial: int) -> list[TrialRecord]:
    """All power levels and algorithms for one trial; never raises per-design."""
    stream = TrialStream(master_seed=spec.master_seed, trial=trial)
    needs_direct = any(name.startswith("direct-") for name in spec.algorithms)
    records = []
    for p_db in spec.power_sweep_db:
        config = spec.config_at(p_db)
        ch = generate_channels(stream, config)
        direct = generate_direct_channels(stream, config) if needs_direct else None
        record = TrialRecord(trial=trial, p_db=p_db)
        for name in spec.algorithms:
            alg = REGISTRY[name]
            try:
                best = None
                for init_index in range(spec.n_inits):
                    out = alg.run(ch, direct, config, spec.stop, stream, init_index)
                    if best is None or out.end_to_end_sum() > best.end_to_end_sum():
                        best = out
                record.outcomes[name] = best
            except Exception as exc:
                record.errors[name] = f"{type(exc).__name__}: {exc}"
        records.append(record)
    return records


def aggregate(spec: ExperimentSpec, records: list[TrialRecord]) -> list[AggregateRow]:
    """Mean and standard error per (algorithm, power), spec order."""
    rows = []
    for name in spec.algorithms:
        for p_db in spec.power_sweep_db:
            vals = [
                r.outcomes[name].end_to_end_sum()
                for r in records
                if r.p_db == p_db and name in r.outcomes
            ]
            n = len(vals)
            mean = float(np.mean(vals)) if n else float("nan")
            stderr = float(np.std(vals, ddof=1) / np.sqrt(n)) if n >= 2 else 0.0
            rows.append(AggregateRow(name, p_db, mean, stderr, n))
    return rows


def run_sweep(
    spec: ExperimentSpec,
    threads: int = 1,
    collect: list[TrialRecord] | None = None,
) -> SweepResult:
    """Execute the whole sweep; `collect` receives records as trials finish.

    The per-trial work is a pure function of (spec, trial), so the thread
    count changes wall time only, never a single output number.
    """
    records: list[TrialRecord] = []

    def take(batch: list[TrialRecord]) -> None:
        records.extend(batch)
        if collect is not None:
            collect.extend(batch)

    if threads <= 1:
        for trial in range(spec.trials):
            take(run_trial(spec, trial))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for batch in pool.map(run_trial, [spec] * spec.trials, range(spec.trials)):
                take(batch)
    return SweepResult(spec=spec, records=records, aggregates=aggregate(spec, records))


def opportunistic_run(spec: ExperimentSpec, threads: int = 1) -> SweepResult:
    """Sweep keeping the best of the spec's n_inits initializations per trial."""
    return run_sweep(spec, threads=threads)


def estimate_multiplexing_gain(
    points: list[tuple[float, float]], window_db: float = 20.0
) -> float:
    """High-power slope of mean rate against log2 of linear power.

    Fits a least-squares line over the sweep points within `window_db` of the
    top power; at least three points must fall in the window.
    """
    if not points:
        raise ValueError("need a non-empty sweep")
    top = max(p for p, _ in points)
    sel = sorted((p, r) for p, r in points if p >= top - window_db)
    if len(sel) < 3:
        raise ValueError(
            f"need at least 3 points within {window_db} dB of the top, got {len(sel)}"
        )
    x = np.array([p * np.log2(10.0) / 10.0 for p, _ in sel])
    y = np.array([r for _, r in sel])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_results(result: SweepResult, out_dir: str | Path) -> list[Path]:
    """Write results.csv, results.json, manifest.json, and plot.gp.

    Every byte is a pure function of the result, so reruns of the same spec
    produce identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    csv_lines = ["algorithm,p_db,mean_sum_rate_bits,stderr,trials,mux_estimate_flag"]
    for row in result.aggregates:
        csv_lines.append(
            f"{row.algorithm},{_fmt(row.p_db)},{_fmt(row.mean_sum_rate_bits)},"
            f"{_fmt(row.stderr)},{row.trials},{row.mux_estimate_flag}"
        )

    per_trial: dict[str, dict[str, list[float]]] = {}
    trial_errors: dict[str, dict[str, str]] = {}
    for record in result.records:
        for name, outcome in record.outcomes.items():
            per_trial.setdefault(name, {}).setdefault(_fmt(record.p_db), []).append(
                outcome.end_to_end_sum()
            )
        for name, message in record.errors.items():
            trial_errors.setdefault(name, {})[
                f"trial {record.trial} at {_fmt(record.p_db)} dB"
            ] = message

    results_data = {
        "aggregates": [
            {
                "algorithm": row.algorithm,
                "p_db": row.p_db,
                "mean_sum_rate_bits": row.mean_sum_rate_bits,
                "stderr": row.stderr,
                "trials": row.trials,
                "mux_estimate_flag": row.mux_estimate_flag,
            }
            for row in result.aggregates
        ],
        "per_trial_sum_rates": per_trial,
        "errors": trial_errors,
    }
    manifest_data = {
        "spec": result.spec.to_dict(),
        "master_seed": result.spec.master_seed,
        "version": __version__,
    }

    plot_lines = [
        "set datafile separator ','",
        "set xlabel 'transmit power P (dB)'",
        "set ylabel 'mean end-to-end sum rate (bits per channel use)'",
        "set key top left",
        "set grid",
        "plot \\",
    ]
    clauses = [
        f"  'results.csv' every ::1 using 2:(strcol(1) eq '{name}' ? column(3) : NaN) "
        f"with linespoints title '{name}'"
        for name in result.spec.algorithms
    ]
    plot_lines.append(", \\\n".join(clauses) if clauses else "  NaN notitle")

    written = []
    for name, text in (
        ("results.csv", "\n".join(csv_lines) + "\n"),
        ("results.json", json.dumps(results_data, indent=2, sort_keys=True) + "\n"),
        ("manifest.json", json.dumps(manifest_data, indent=2, sort_keys=True) + "\n"),
        ("plot.gp", "\n".join(plot_lines) + "\n"),
    ):
        path = out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written
