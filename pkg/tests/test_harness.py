from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netgrad.errors import ConfigError, InvariantViolation
from netgrad.harness import (
    ExperimentConfig,
    iterations_to_epsilon,
    load_config,
    prepare_run,
    read_trace,
    run_experiment,
    save_config,
    sweep_topology,
    tune_dsgt_step,
    write_trace,
)


def _small_cfg(**overrides) -> ExperimentConfig:
    base = dict(
        topology="ring",
        agents=4,
        mixing="metropolis",
        algo="ssdsgt",
        d=2,
        mu=1.0,
        L=2.0,
        sigma_bar=0.0,
        heterogeneity=0.5,
        problem_seed=7,
        seed=1,
        iters=50,
        stride=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "overrides, field",
    [
        (dict(topology="torus"), "topology"),
        (dict(agents=0), "agents"),
        (dict(mixing="max-degree"), "mixing"),
        (dict(algo="assdsgt"), "mixing"),
        (dict(algo="push-sum"), "algo"),
        (dict(d=0), "d"),
        (dict(mu=-1.0), "mu"),
        (dict(mu=3.0), "L"),
        (dict(sigma_bar=-0.5), "sigma_bar"),
        (dict(heterogeneity=-1.0), "heterogeneity"),
        (dict(schedule="warmup"), "schedule"),
        (dict(step_multiplier=0.0), "step_multiplier"),
        (dict(dsgt_tuning="greedy"), "dsgt_tuning"),
        (dict(iters=0), "iters"),
        (dict(stride=0), "stride"),
        (dict(x0_radius=-1.0), "x0_radius"),
        (dict(eps_stop=0.0), "eps_stop"),
        (dict(avg_checkpoints=(-3,)), "avg_checkpoints"),
    ],
)
def test_validate_names_the_offending_field(overrides, field):
    cfg = _small_cfg(**overrides)
    with pytest.raises(ConfigError) as excinfo:
        cfg.validate()
    assert excinfo.value.field == field


def test_momentum_requires_lazy_mixing():
    cfg = _small_cfg(algo="assdsgt", mixing="lazy-metropolis")
    cfg.validate()
    with pytest.raises(ConfigError):
        _small_cfg(algo="assdsgt", mixing="random-gossip").validate()


def test_config_dict_round_trip():
    cfg = _small_cfg(
        sigma_bar=1.0,
        x0_radius=2.5,
        eps_stop=1e-4,
        avg_checkpoints=(10, 20),
        label="demo",
    )
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_from_dict_rejects_wrong_types_and_unknown_keys():
    payload = _small_cfg().to_dict()
    payload["agents"] = "8"
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(payload)
    payload = _small_cfg().to_dict()
    payload["agents"] = True
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(payload)
    payload = _small_cfg().to_dict()
    payload["workers"] = 4
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(payload)


@settings(max_examples=40, deadline=None)
@given(
    agents=st.integers(2, 12),
    sigma=st.floats(0.0, 3.0),
    stride=st.integers(1, 7),
    radius=st.one_of(st.none(), st.floats(0.0, 10.0)),
    label=st.one_of(st.none(), st.text(min_size=1, max_size=12)),
)
def test_config_round_trip_property(agents, sigma, stride, radius, label):
    cfg = _small_cfg(agents=agents, sigma_bar=sigma, stride=stride, x0_radius=radius, label=label)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_single_step_run_records_init_and_step():
    trace = run_experiment(_small_cfg(iters=1))
    assert [r.t for r in trace.records] == [0, 1]
    assert trace.summary["final_t"] == 1


def test_stride_row_count_includes_the_final_iteration():
    trace = run_experiment(_small_cfg(iters=10, stride=3))
    assert [r.t for r in trace.records] == [0, 3, 6, 9, 10]
    aligned = run_experiment(_small_cfg(iters=9, stride=3))
    assert [r.t for r in aligned.records] == [0, 3, 6, 9]


def test_prepare_run_start_radius():
    setup = prepare_run(_small_cfg())
    assert np.array_equal(setup.x0, np.zeros(2))
    setup = prepare_run(_small_cfg(x0_radius=2.5))
    assert np.linalg.norm(setup.x0 - setup.problem.x_star) == pytest.approx(2.5, rel=1e-12)


def test_trace_round_trip_is_bitwise(tmp_path: Path):
    cfg = _small_cfg(sigma_bar=1.0, iters=40)
    trace = run_experiment(cfg)
    path = tmp_path / "trace.csv"
    write_trace(trace, path)
    loaded = read_trace(path)
    assert len(loaded) == len(trace.records)
    for original, parsed in zip(trace.records, loaded):
        assert parsed.t == original.t
        assert parsed.zeta == original.zeta
        for name in ("eta", "consensus_x", "consensus_s", "snap_grad_dist", "psi", "mean_dist", "subopt"):
            assert getattr(parsed, name) == getattr(original, name)


def test_trace_file_format_details(tmp_path: Path):
    trace = run_experiment(_small_cfg(iters=3))
    path = tmp_path / "trace.csv"
    write_trace(trace, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.endswith(b"\n")
    header = raw.decode("utf-8").splitlines()[0]
    assert header == "t,eta,zeta,consensus_x,consensus_s,snap_grad_dist,psi,mean_dist,subopt"


def test_read_trace_reports_malformed_rows(tmp_path: Path):
    path = tmp_path / "bad.csv"
    good = run_experiment(_small_cfg(iters=2))
    write_trace(good, path)
    lines = path.read_text().splitlines()
    lines[2] = lines[2].rsplit(",", 1)[0]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ConfigError) as excinfo:
        read_trace(path)
    assert "line 3" in str(excinfo.value)

    lines[2] = lines[2] + ",not-a-number"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ConfigError):
        read_trace(path)


def test_read_trace_rejects_wrong_header(tmp_path: Path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ConfigError):
        read_trace(path)


def test_config_file_round_trip(tmp_path: Path):
    cfg = _small_cfg(sigma_bar=1.0, avg_checkpoints=(5, 10), label="roundtrip")
    path = tmp_path / "config.json"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_load_config_reports_json_position(tmp_path: Path):
    path = tmp_path / "broken.json"
    path.write_text('{"topology": "ring",\n  "agents": }\n')
    with pytest.raises(ConfigError) as excinfo:
        load_config(path)
    assert "line 2" in str(excinfo.value)


def test_runs_are_bitwise_reproducible(tmp_path: Path):
    cfg = _small_cfg(sigma_bar=1.0, iters=60)
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    write_trace(run_experiment(cfg), first)
    write_trace(run_experiment(cfg), second)
    assert first.read_bytes() == second.read_bytes()


def test_early_stop_lands_on_first_crossing():
    cfg = _small_cfg(iters=5000, stride=100, eps_stop=1e-3, x0_radius=3.0)
    trace = run_experiment(cfg)
    assert trace.summary["stopped_early"]
    final = trace.records[-1]
    assert final.subopt <= 1e-3
    assert iterations_to_epsilon(trace, 1e-3) == trace.summary["final_t"]
    times = [r.t for r in trace.records]
    assert times == sorted(set(times))


def test_iterations_to_epsilon_none_when_unreached():
    trace = run_experiment(_small_cfg(iters=5, x0_radius=3.0))
    assert iterations_to_epsilon(trace, 1e-30) is None


def test_noisy_stop_metric_uses_weighted_average():
    cfg = _small_cfg(sigma_bar=1.0, iters=300, stride=50, eps_stop=0.5, x0_radius=1.0)
    trace = run_experiment(cfg)
    if trace.summary["stopped_early"]:
        assert trace.records[-1].wavg_subopt <= 0.5


def test_sweep_is_identical_across_worker_counts(tmp_path: Path):
    base = _small_cfg(iters=20000, x0_radius=3.0)
    serial = sweep_topology(base, (4, 8), ("ssdsgt",), eps=1e-3, seeds=2, workers=1)
    threaded = sweep_topology(base, (4, 8), ("ssdsgt",), eps=1e-3, seeds=2, workers=3)
    a, b = tmp_path / "serial.csv", tmp_path / "threaded.csv"
    serial.to_csv(a)
    threaded.to_csv(b)
    assert a.read_bytes() == b.read_bytes()
    assert "ssdsgt" in serial.format_table()
    assert serial.exponents.keys() == {"ssdsgt"}


def test_sweep_single_size_has_no_exponent():
    base = _small_cfg(iters=4000, x0_radius=3.0)
    result = sweep_topology(base, (4,), ("ssdsgt",), eps=1e-3, seeds=1)
    assert result.exponents == {}
    assert len(result.rows) == 1


def test_sweep_rejects_bad_arguments():
    base = _small_cfg()
    with pytest.raises(ConfigError):
        sweep_topology(base, (4,), ("ssdsgt",), eps=0.0)
    with pytest.raises(ConfigError):
        sweep_topology(base, (4,), ("sgd",), eps=1e-3)
    with pytest.raises(ConfigError):
        sweep_topology(base, (4,), ("ssdsgt",), eps=1e-3, seeds=0)
    with pytest.raises(ConfigError):
        sweep_topology(base, (4,), ("ssdsgt",), eps=1e-3, multipliers={"dsgt": -1.0})
    with pytest.raises(ConfigError):
        sweep_topology(base, (4,), ("ssdsgt",), eps=1e-3, multipliers={"sgd": 2.0})


def test_tuned_baseline_step_reaches_target():
    cfg = _small_cfg(algo="dsgt", agents=8, iters=30000, x0_radius=3.0, dsgt_tuning="tuned")
    sched = tune_dsgt_step(cfg, eps=1e-5)
    assert sched.eta0 > 0.0
    trace = run_experiment(
        replace(cfg, eps_stop=1e-5, stride=500), schedule_override=sched
    )
    assert trace.summary["stopped_early"]


def test_tuner_raises_when_budget_is_hopeless():
    cfg = _small_cfg(algo="dsgt", agents=8, iters=30, x0_radius=3.0, dsgt_tuning="tuned")
    with pytest.raises(InvariantViolation):
        tune_dsgt_step(cfg, eps=1e-12)
