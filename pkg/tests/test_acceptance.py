"""End-to-end acceptance battery.

Each test here is one headline check, sized for a desk-scale run with fixed
seeds: descent properties of the three alternating designs, solver quality
against brute-force oracles, the statistical reproductions of the sum-rate
and multiplexing-gain studies, and harness determinism.  Run with -v to get
one pass/fail line per criterion; each test also prints a short summary.
"""

import filecmp
import time

import numpy as np

from oracles import multistart_oracle
from test_qcqp import random_equality_problem

from relayalign.channel import TrialStream, generate_channels
from relayalign.config import StoppingRule, SystemConfig, symmetric_config
from relayalign.baselines import df_multiplexing_upper_bound
from relayalign.harness import (
    ExperimentSpec,
    estimate_multiplexing_gain,
    run_sweep,
    serialize_results,
)
from relayalign.metrics import mmse_receiver, mse_matrix, sum_rate
from relayalign.network import (
    effective_channels,
    feasible_init,
    random_init,
    relay_sum_power,
    transmitter_power,
)
from relayalign.qcqp import solve_qcqp_equality
from relayalign.total_leakage import (
    tl_build_precoder_subproblem,
    tl_build_relay_subproblem,
    tl_run,
)
from relayalign.wmse import (
    NO_POWER_CONTROL,
    POWER_CONTROL,
    wmse_build_precoder_subproblem,
    wmse_build_relay_subproblem,
    wmse_run,
)


def _logdet2(a):
    sign, ld = np.linalg.slogdet(a)
    return float(np.real(ld)) / np.log(2.0)


def _assert_non_increasing(values, slack, label):
    arr = np.asarray(values)
    worst = float(np.max(arr[1:] - arr[:-1])) if len(arr) > 1 else 0.0
    assert worst <= slack, f"{label}: objective increased by {worst:.3e}"
    return worst


def test_criterion_01_monotone_descent():
    # 50 trials, all three designs, full traces, 1e-8 absolute slack
    t0 = time.monotonic()
    cfg = symmetric_config("(2x4,1)^4+2^4", p_tx=100.0, p_relay=100.0)
    stop = StoppingRule(max_iter=200, tol=1e-7)
    worst = 0.0
    for trial in range(50):
        stream = TrialStream(master_seed=101, trial=trial)
        ch = generate_channels(stream, cfg)
        init = random_init(ch, stream, cfg)
        _, tr = tl_run(ch, cfg, init, stop=stop)
        worst = max(
            worst,
            _assert_non_increasing(
                [r.total for r in tr], 1e-8, f"trial {trial} leakage"
            ),
        )
        for name, variant in [("wmse-eq", NO_POWER_CONTROL), ("wmse-pc", POWER_CONTROL)]:
            _, tr = wmse_run(ch, cfg, init, variant, stop=stop)
            worst = max(
                worst,
                _assert_non_increasing(
                    [r.wmse_total for r in tr], 1e-8, f"trial {trial} {name}"
                ),
            )
    elapsed = time.monotonic() - t0
    assert elapsed < 600.0, f"runtime {elapsed:.0f}s exceeds 10 min"
    print(
        f"criterion 1 (monotone descent): PASS - 150 runs, "
        f"worst increase {worst:.2e}, {elapsed:.0f}s"
    )


def test_criterion_02_leakage_phase_transition():
    # interference falls below forwarded relay noise within 50 iterations
    cfg = symmetric_config("(4x4,2)^3+4^3", p_tx=1000.0, p_relay=1000.0)
    stop = StoppingRule(max_iter=50, tol=0.0)
    crossed = 0
    for trial in range(20):
        stream = TrialStream(master_seed=202, trial=trial)
        ch = generate_channels(stream, cfg)
        init = random_init(ch, stream, cfg)
        _, tr = tl_run(ch, cfg, init, stop=stop)
        if any(r.interference_power < r.relay_noise_power for r in tr):
            crossed += 1
    assert crossed >= 16, f"crossover on only {crossed}/20 trials"
    print(f"criterion 2 (leakage phase transition): PASS - {crossed}/20 trials")


def test_criterion_03_equality_solver_vs_multistart_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(303)
    worst_gap = 0.0
    worst_violation = 0.0
    for i in range(200):
        n = 1 + i % 3
        n_cons = 1 + (i // 3) % 3
        p = random_equality_problem(rng, n, n_cons, with_lin=bool(i % 2))
        res = solve_qcqp_equality(p)
        oracle = multistart_oracle(p, rng, n_samples=10**6)
        gap = abs(res.objective - oracle) / (1.0 + abs(oracle))
        worst_gap = max(worst_gap, gap)
        assert gap <= 1e-4, f"problem {i}: solver {res.objective} oracle {oracle}"
        for c in p.constraints:
            v = float(np.real(res.x.conj() @ c.matrix @ res.x))
            violation = abs(v - c.rhs) / (1.0 + abs(c.rhs))
            worst_violation = max(worst_violation, violation)
            assert violation <= 1e-6, f"problem {i}: constraint off by {violation:.2e}"
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"runtime {elapsed:.0f}s exceeds 5 min"
    print(
        f"criterion 3 (oracle equivalence): PASS - 200 problems, "
        f"worst gap {worst_gap:.2e}, worst violation {worst_violation:.2e}, "
        f"{elapsed:.0f}s"
    )


def test_criterion_04_sdr_exactness_pipeline():
    # subproblems harvested from evolved states of both equality designs
    shapes = ["(2x2,1)^2+2^2", "(3x3,2)^2+3^2", "(2x3,1)^3+2^3", "(2x2,1)^3+3^2"]
    problems = []
    seed = 0
    while len(problems) < 100:
        cfg = symmetric_config(shapes[seed % len(shapes)], p_tx=10.0, p_relay=10.0)
        stream = TrialStream(master_seed=404 + seed, trial=0)
        ch = generate_channels(stream, cfg)
        init = random_init(ch, stream, cfg)
        warm = StoppingRule(max_iter=1 + cfg.M + cfg.K, tol=0.0)
        st, _ = tl_run(ch, cfg, init, stop=warm)
        eff = effective_channels(ch, st)
        for m in range(cfg.M):
            problems.append(tl_build_relay_subproblem(eff, st, cfg, m))
        for k in range(cfg.K):
            problems.append(tl_build_precoder_subproblem(eff, st, cfg, k))
        st, _ = wmse_run(ch, cfg, init, NO_POWER_CONTROL, stop=warm)
        eff = effective_channels(ch, st)
        for m in range(cfg.M):
            problems.append(wmse_build_relay_subproblem(eff, st, cfg, m, NO_POWER_CONTROL))
        for k in range(cfg.K):
            problems.append(
                wmse_build_precoder_subproblem(eff, st, cfg, k, NO_POWER_CONTROL)
            )
        seed += 1
    problems = problems[:100]
    clean = 0
    for i, p in enumerate(problems):
        res = solve_qcqp_equality(p)
        bound_gap = res.objective - res.sdr_bound
        assert bound_gap <= 1e-6 * (1.0 + abs(res.sdr_bound)), (
            f"problem {i}: recovered cost exceeds relaxation bound by {bound_gap:.3e}"
        )
        if res.rank_ratio <= 1e-6 and not res.fallback:
            clean += 1
    assert clean >= 95, f"only {clean}/100 rank-one without fallback"
    print(
        f"criterion 4 (SDR exactness): PASS - 100/100 within bound, "
        f"{clean}/100 rank-one no-fallback"
    )


def test_criterion_05_rate_mse_identity():
    shapes = ["(2x2,1)^2+2^2", "(3x2,2)^2+2^3", "(2x4,1)^3+3^2", "(4x4,2)^2+4^2"]
    worst = 0.0
    for t in range(1000):
        cfg = symmetric_config(shapes[t % len(shapes)], p_tx=10.0, p_relay=10.0)
        stream = TrialStream(master_seed=505, trial=t)
        ch = generate_channels(stream, cfg)
        st = random_init(ch, stream, cfg)
        eff = effective_channels(ch, st)
        for k in range(cfg.K):
            st.w[k] = mmse_receiver(eff, cfg, k)
        mse_logdet = sum(
            _logdet2(mse_matrix(eff, st, cfg, k)) for k in range(cfg.K)
        )
        residual = abs(sum_rate(eff, cfg) + mse_logdet)
        worst = max(worst, residual)
        assert residual <= 1e-9, f"state {t}: identity off by {residual:.3e}"
    print(f"criterion 5 (rate-MSE identity): PASS - 1000 states, worst {worst:.2e}")


def test_criterion_06_feasible_init_budgets():
    rng = np.random.default_rng(606)
    worst = 0.0
    for i in range(100):
        k = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        n_tx = [int(rng.integers(1, 4)) for _ in range(k)]
        n_rx = [int(rng.integers(1, 4)) for _ in range(k)]
        p_relay_max = [float(10.0 ** rng.uniform(-1, 2)) for _ in range(m)]
        cfg = SystemConfig(
            n_tx=n_tx,
            n_rx=n_rx,
            n_relay=[int(rng.integers(1, 4)) for _ in range(m)],
            d=[int(rng.integers(1, 1 + min(n_tx[j], n_rx[j]))) for j in range(k)],
            p_tx_max=[float(10.0 ** rng.uniform(-1, 2)) for _ in range(k)],
            p_relay_max=p_relay_max,
            p_relay_sum_max=float(rng.uniform(0.3, 1.0)) * sum(p_relay_max),
            sigma2_relay=[float(rng.uniform(0.5, 2.0)) for _ in range(m)],
            sigma2_rx=[float(rng.uniform(0.5, 2.0)) for _ in range(k)],
        )
        stream = TrialStream(master_seed=606 + i, trial=0)
        ch = generate_channels(stream, cfg)
        st = feasible_init(ch, cfg)
        for j in range(k):
            err = abs(transmitter_power(st, j) - cfg.p_tx_max[j]) / cfg.p_tx_max[j]
            worst = max(worst, err)
        err = abs(relay_sum_power(ch, st, cfg) - cfg.p_relay_sum_max)
        worst = max(worst, err / cfg.p_relay_sum_max)
        assert worst <= 1e-8, f"config {i}: budget off by {worst:.3e}"
    print(f"criterion 6 (feasible init): PASS - 100 configs, worst {worst:.2e}")


def test_criterion_07_multiplexing_gain_reproduction():
    t0 = time.monotonic()
    spec = ExperimentSpec(
        config="(2x2,1)^4+2^4",
        power_sweep_db=[30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0],
        algorithms=["alg3", "af-tdma", "df-tl"],
        trials=100,
        master_seed=707,
        stop={"max_iter": 250, "tol": 1e-7},
    )
    result = run_sweep(spec)
    slopes = {}
    for name in spec.algorithms:
        points = [
            (row.p_db, row.mean_sum_rate_bits)
            for row in result.aggregates
            if row.algorithm == name
        ]
        slopes[name] = estimate_multiplexing_gain(points)
    elapsed = time.monotonic() - t0
    failures = []
    if not slopes["alg3"] >= 1.5:
        failures.append(f"alg3 slope {slopes['alg3']:.3f} < 1.5")
    if not 0.35 <= slopes["af-tdma"] <= 0.65:
        failures.append(f"af-tdma slope {slopes['af-tdma']:.3f} outside [0.35, 0.65]")
    if not slopes["df-tl"] <= 0.3:
        failures.append(f"df-tl slope {slopes['df-tl']:.3f} > 0.3")
    assert elapsed < 7200.0, f"runtime {elapsed:.0f}s exceeds 2 h"
    detail = ", ".join(f"{k} {v:.3f}" for k, v in slopes.items())
    assert not failures, f"{'; '.join(failures)} (all slopes: {detail}, {elapsed:.0f}s)"
    print(f"criterion 7 (multiplexing gains): PASS - {detail}, {elapsed:.0f}s")


def test_criterion_08_algorithm_ordering_moderate_power():
    spec = ExperimentSpec(
        config="(2x4,1)^4+2^4",
        power_sweep_db=[10.0],
        algorithms=["alg1", "alg2", "alg3"],
        trials=100,
        master_seed=808,
        stop={"max_iter": 150, "tol": 1e-7},
    )
    result = run_sweep(spec)
    per = {name: [] for name in spec.algorithms}
    for rec in result.records:
        for name in spec.algorithms:
            per[name].append(rec.outcomes[name].end_to_end_sum())
    gaps = []
    for hi, lo in [("alg3", "alg2"), ("alg2", "alg1")]:
        d = np.array(per[hi]) - np.array(per[lo])
        se = float(d.std(ddof=1) / np.sqrt(len(d)))
        gaps.append((hi, lo, float(d.mean()), se))
        assert d.mean() >= -se, (
            f"{hi} vs {lo}: mean gap {d.mean():.3f} below -1 SE ({se:.3f})"
        )
    detail = ", ".join(f"{hi}-{lo} {m:.3f}+/-{se:.3f}" for hi, lo, m, se in gaps)
    print(f"criterion 8 (ordering at 10 dB): PASS - {detail}")


def test_criterion_09_sum_vs_individual_relay_budgets():
    spec = ExperimentSpec(
        config="(2x2,1)^4+2^4",
        power_sweep_db=[20.0],
        algorithms=["alg3", "alg3-ind"],
        trials=100,
        master_seed=909,
        stop={"max_iter": 200, "tol": 1e-7},
    )
    result = run_sweep(spec)
    means = {
        row.algorithm: row.mean_sum_rate_bits for row in result.aggregates
    }
    gap = (means["alg3"] - means["alg3-ind"]) / means["alg3"]
    assert means["alg3"] >= means["alg3-ind"], (
        f"sum-budget mean {means['alg3']:.3f} below per-relay {means['alg3-ind']:.3f}"
    )
    assert gap <= 0.10, f"relative gap {gap:.1%} exceeds 10%"
    print(
        f"criterion 9 (sum vs per-relay): PASS - sum {means['alg3']:.3f}, "
        f"per-relay {means['alg3-ind']:.3f}, gap {gap:.1%}"
    )


def test_criterion_10_opportunistic_gain():
    base = dict(
        config="(2x2,1)^4+2^4",
        power_sweep_db=[30.0],
        algorithms=["alg3"],
        trials=100,
        master_seed=1010,
        stop={"max_iter": 200, "tol": 1e-7},
    )
    mean_1 = run_sweep(ExperimentSpec(n_inits=1, **base)).aggregates[0].mean_sum_rate_bits
    mean_5 = run_sweep(ExperimentSpec(n_inits=5, **base)).aggregates[0].mean_sum_rate_bits
    gain = (mean_5 - mean_1) / mean_1
    assert 0.0 < gain <= 0.30, f"gain {gain:.1%} outside (0%, 30%]"
    print(
        f"criterion 10 (opportunistic): PASS - N=1 {mean_1:.3f}, "
        f"N=5 {mean_5:.3f}, gain {gain:.1%}"
    )


def test_criterion_11_df_upper_bound_table():
    # hand-evaluated 0.5*floor(K*(N_X+N_T)/(K+1)) for symmetric shapes
    table = [
        ("(2x2,1)^1+2^1", 1.0),
        ("(2x2,1)^2+2^2", 1.0),
        ("(2x2,1)^3+2^3", 1.5),
        ("(2x2,1)^4+2^4", 1.5),
        ("(2x2,1)^5+2^5", 1.5),
        ("(2x2,1)^2+3^2", 1.5),
        ("(2x2,1)^3+5^3", 2.5),
        ("(4x4,1)^2+2^2", 2.0),
        ("(3x3,1)^3+3^3", 2.0),
        ("(2x2,1)^6+3^6", 2.0),
    ]
    for shape, expected in table:
        cfg = symmetric_config(shape, p_tx=1.0, p_relay=1.0)
        got = df_multiplexing_upper_bound(cfg)
        assert got == expected, f"{shape}: got {got}, expected {expected}"
    print(f"criterion 11 (DF upper bound): PASS - {len(table)}/{len(table)} configs")


def test_criterion_12_thread_count_determinism(tmp_path):
    spec = ExperimentSpec(
        config="(2x2,1)^2+2^2",
        power_sweep_db=[0.0, 10.0],
        algorithms=[
            "alg1", "alg2", "alg3", "alg3-ind", "af-tdma",
            "df-sf", "df-tl", "df-sr", "direct-sf", "direct-tl", "direct-sr",
        ],
        trials=4,
        master_seed=1212,
        stop={"max_iter": 40, "tol": 1e-7},
    )
    dir_serial = tmp_path / "serial"
    dir_pooled = tmp_path / "pooled"
    serialize_results(run_sweep(spec, threads=1), dir_serial)
    serialize_results(run_sweep(spec, threads=8), dir_pooled)
    for name in ["results.csv", "results.json", "manifest.json"]:
        assert filecmp.cmp(dir_serial / name, dir_pooled / name, shallow=False), (
            f"{name} differs between 1 and 8 threads"
        )
    print("criterion 12 (determinism): PASS - byte-identical across thread counts")
