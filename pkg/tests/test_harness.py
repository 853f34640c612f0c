"""Sweep runner: determinism, aggregation, serialization, slope estimation."""

import json

import numpy as np
import pytest

from relayalign.config import StoppingRule
from relayalign.harness import (
    END_TO_END,
    REGISTRY,
    Algorithm,
    AlgorithmOutcome,
    ExperimentSpec,
    end_to_end_rate,
    estimate_multiplexing_gain,
    list_algorithms,
    opportunistic_run,
    run_sweep,
    serialize_results,
)


def small_spec(**overrides):
    base = dict(
        config="(2x2,1)^2+2^2",
        power_sweep_db=[0.0, 10.0],
        algorithms=["alg1", "alg3"],
        trials=2,
        master_seed=11,
        stop=StoppingRule(max_iter=20),
    )
    base.update(overrides)
    return ExperimentSpec(**base)


def test_end_to_end_rate():
    assert end_to_end_rate(4.0, "two-hop") == 2.0
    assert end_to_end_rate(4.0, "single-hop") == 4.0
    with pytest.raises(ValueError):
        end_to_end_rate(4.0, "end-to-end")


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(trials=0)
    with pytest.raises(ValueError):
        small_spec(power_sweep_db=[])
    with pytest.raises(ValueError):
        small_spec(power_sweep_db=[10.0, 10.0])
    with pytest.raises(ValueError):
        small_spec(algorithms=["alg1", "nope"])
    with pytest.raises(ValueError):
        small_spec(config="(2x2,1)^3+2^2", algorithms=["df-sf"])
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({"config": "(2x2,1)^2+2^2", "power_sweep_db": [0.0],
                                  "algorithms": [], "bogus": 1})


def test_spec_json_round_trip(tmp_path):
    spec = small_spec()
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    again = ExperimentSpec.from_json_file(path)
    assert again == spec


def test_empty_algorithm_list():
    spec = small_spec(algorithms=[], trials=1)
    result = run_sweep(spec)
    assert result.aggregates == []
    assert len(result.records) == len(spec.power_sweep_db)
    assert all(r.outcomes == {} for r in result.records)


def test_reaggregation_matches_reported_mean():
    spec = small_spec()
    result = run_sweep(spec)
    for row in result.aggregates:
        vals = [
            r.outcomes[row.algorithm].end_to_end_sum()
            for r in result.records
            if r.p_db == row.p_db and row.algorithm in r.outcomes
        ]
        assert len(vals) == row.trials
        assert abs(np.mean(vals) - row.mean_sum_rate_bits) <= 1e-12
        if row.trials >= 2:
            expected = np.std(vals, ddof=1) / np.sqrt(row.trials)
            assert abs(expected - row.stderr) <= 1e-12


def test_thread_count_does_not_change_numbers():
    spec = small_spec()
    a = run_sweep(spec, threads=1)
    b = run_sweep(spec, threads=2)
    assert [
        (r.algorithm, r.p_db, r.mean_sum_rate_bits, r.stderr, r.trials)
        for r in a.aggregates
    ] == [
        (r.algorithm, r.p_db, r.mean_sum_rate_bits, r.stderr, r.trials)
        for r in b.aggregates
    ]


def test_algorithm_isolation():
    solo = run_sweep(small_spec(algorithms=["alg1"]))
    both = run_sweep(small_spec(algorithms=["alg1", "af-tdma"]))
    for a, b in zip(solo.aggregates, both.aggregates[: len(solo.aggregates)]):
        assert a.algorithm == b.algorithm == "alg1"
        assert a.mean_sum_rate_bits == b.mean_sum_rate_bits


def test_per_algorithm_errors_do_not_stop_the_run():
    def explode(ch, direct, config, stop, stream, init_index):
        raise RuntimeError("boom")

    REGISTRY["broken"] = Algorithm("broken", "always fails", END_TO_END, 99, explode)
    try:
        spec = small_spec(algorithms=["broken", "alg1"], trials=1)
        result = run_sweep(spec)
    finally:
        del REGISTRY["broken"]
    assert all("broken" in r.errors for r in result.records)
    rows = {r.algorithm: r for r in result.aggregates}
    assert rows["broken"].trials == 0
    assert np.isnan(rows["broken"].mean_sum_rate_bits)
    assert rows["alg1"].trials == 1


def test_opportunistic_first_init_shared():
    base = run_sweep(small_spec(algorithms=["alg3"], power_sweep_db=[10.0]))
    multi = opportunistic_run(
        small_spec(algorithms=["alg3"], power_sweep_db=[10.0], n_inits=3)
    )
    for one, many in zip(base.records, multi.records):
        r1 = one.outcomes["alg3"].end_to_end_sum()
        rn = many.outcomes["alg3"].end_to_end_sum()
        assert rn >= r1 - 1e-9


def test_opportunistic_single_init_reduces_to_sweep():
    spec = small_spec(algorithms=["alg3"], power_sweep_db=[10.0])
    a = run_sweep(spec)
    b = opportunistic_run(small_spec(algorithms=["alg3"], power_sweep_db=[10.0]))
    assert [r.mean_sum_rate_bits for r in a.aggregates] == [
        r.mean_sum_rate_bits for r in b.aggregates
    ]


def test_slope_estimation():
    pts = [(p, 2.0 * p * np.log2(10.0) / 10.0) for p in [30.0, 35.0, 40.0, 45.0]]
    assert abs(estimate_multiplexing_gain(pts) - 2.0) <= 1e-9
    flat = [(p, 3.7) for p in [30.0, 40.0, 50.0]]
    assert abs(estimate_multiplexing_gain(flat)) <= 1e-12
    rng = np.random.default_rng(5)
    noisy = [
        (p, 0.5 * p * np.log2(10.0) / 10.0 + rng.normal(0, 0.01))
        for p in np.arange(30.0, 51.0, 2.5)
    ]
    assert abs(estimate_multiplexing_gain(noisy) - 0.5) <= 0.02
    with pytest.raises(ValueError):
        estimate_multiplexing_gain(pts[:2])
    with pytest.raises(ValueError):
        estimate_multiplexing_gain([(30.0, 1.0), (35.0, 2.0), (60.0, 3.0)], window_db=10.0)


def test_serialize_files(tmp_path):
    spec = small_spec(trials=3)
    result = run_sweep(spec)
    serialize_results(result, tmp_path)
    csv_lines = (tmp_path / "results.csv").read_text().splitlines()
    assert csv_lines[0] == "algorithm,p_db,mean_sum_rate_bits,stderr,trials,mux_estimate_flag"
    assert len(csv_lines) == 1 + len(spec.power_sweep_db) * len(spec.algorithms)
    assert all(line.endswith(",3,1") for line in csv_lines[1:])

    data = json.loads((tmp_path / "results.json").read_text())
    for row, loaded in zip(result.aggregates, data["aggregates"]):
        assert loaded["mean_sum_rate_bits"] == row.mean_sum_rate_bits
        assert loaded["stderr"] == row.stderr

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["spec"]["config"] == spec.config
    assert manifest["master_seed"] == spec.master_seed
    assert "version" in manifest

    assert "results.csv" in (tmp_path / "plot.gp").read_text()


def test_serialize_empty_result(tmp_path):
    spec = small_spec(algorithms=[], trials=1)
    serialize_results(run_sweep(spec), tmp_path)
    assert (
        (tmp_path / "results.csv").read_text()
        == "algorithm,p_db,mean_sum_rate_bits,stderr,trials,mux_estimate_flag\n"
    )


def test_identical_specs_identical_bytes(tmp_path):
    spec = small_spec()
    serialize_results(run_sweep(spec), tmp_path / "a")
    serialize_results(run_sweep(small_spec()), tmp_path / "b")
    for name in ("results.csv", "results.json", "manifest.json", "plot.gp"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_registry_listing():
    names = [name for name, _ in list_algorithms()]
    for required in ("alg1", "alg2", "alg3", "alg3-ind", "af-tdma", "df-tl"):
        assert required in names
