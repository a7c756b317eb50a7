"""End-to-end acceptance checks at desk scale.

Each test exercises one shipped guarantee of the simulator on a frozen
instance: tracking identities along long noisy runs, the noiseless geometric
contraction envelopes, the reciprocal-in-horizon noisy rate, the momentum
operator's square-root contraction, iteration-count scaling across network
sizes, oracle calibration, degeneracy collapses, and byte-level determinism
of the artifact formats. Measured values are printed so a failing run shows
the numbers next to the tolerance they missed.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from netgrad.algorithms import Schedule, assdsgt_step, init_state, ssdsgt_step
from netgrad.harness import (
    ExperimentConfig,
    iterations_to_epsilon,
    load_config,
    read_trace,
    run_experiment,
    save_config,
    sweep_topology,
    write_trace,
)
from netgrad.objectives import (
    exact_gradient,
    exact_gradients,
    make_quadratic_suite,
    stochastic_gradient,
    stochastic_gradients,
)
from netgrad.streams import StreamBundle
from netgrad.topology import (
    MOMENTUM_ENVELOPE,
    build_graph,
    chebyshev_augment,
    default_gamma,
    lazify,
    metropolis_mixing,
)

# Shared noiseless ring instance used by the contraction and scaling tests.
_RING_BASE = ExperimentConfig(
    topology="ring",
    mixing="metropolis",
    algo="ssdsgt",
    d=2,
    mu=1.0,
    L=2.0,
    sigma_bar=0.0,
    heterogeneity=0.5,
    problem_seed=7,
    seed=1,
    iters=900000,
    x0_radius=5.0,
    dsgt_tuning="matched",
)


def test_tracking_identities_hold_every_step_of_long_noisy_runs():
    worst_overall = 0.0
    for algo, mixing in (("ssdsgt", "metropolis"), ("assdsgt", "lazy-metropolis")):
        for sigma in (0.0, 1.0):
            cfg = ExperimentConfig(
                topology="ring",
                agents=16,
                mixing=mixing,
                algo=algo,
                d=2,
                mu=1.0,
                L=2.0,
                sigma_bar=sigma,
                heterogeneity=1.0,
                problem_seed=3,
                seed=2,
                iters=10000,
                stride=1000,
                x0_radius=3.0,
            )
            trace = run_experiment(cfg)
            worst = max(trace.summary["audit_max"].values())
            print(f"{algo} sigma_bar={sigma}: worst identity ratio {worst:.3e}")
            worst_overall = max(worst_overall, worst)
            assert worst <= 1e-9
    assert worst_overall <= 1e-9


def test_noiseless_snapshot_run_contracts_inside_the_geometric_envelope():
    cfg = ExperimentConfig(
        topology="ring",
        agents=8,
        mixing="metropolis",
        algo="ssdsgt",
        d=3,
        mu=0.5,
        L=4.0,
        sigma_bar=0.0,
        heterogeneity=0.5,
        problem_seed=7,
        seed=1,
        iters=5000,
        stride=1,
        x0_radius=5.0,
    )
    trace = run_experiment(cfg)
    theta = trace.summary["theta"]
    denom = 8 * cfg.agents
    values = [r.mean_dist + r.psi / denom for r in trace.records]
    rate = theta * cfg.mu / (384.0 * cfg.L)
    worst_ratio = 0.0
    for prev, cur in zip(values, values[1:]):
        assert cur <= prev * (1.0 + 1e-12)
    for record, value in zip(trace.records, values):
        envelope = values[0] * math.exp(-rate * record.t)
        worst_ratio = max(worst_ratio, value / envelope)
        assert value <= envelope * (1.0 + 1e-9)
    print(f"theta={theta:.6f}, tightest envelope ratio {worst_ratio:.4f}")


def test_momentum_run_contracts_monotonically_and_wins_the_head_to_head():
    cfg = replace(
        _RING_BASE,
        agents=8,
        algo="assdsgt",
        mixing="lazy-metropolis",
        iters=60000,
        stride=1,
        eps_stop=1e-6,
    )
    trace = run_experiment(cfg)
    assert trace.summary["stopped_early"] is True
    assert trace.summary["final_subopt"] <= 1e-6
    denom = 16 * cfg.agents
    values = [r.mean_dist + r.psi / denom for r in trace.records]
    for prev, cur in zip(values, values[1:]):
        assert cur <= prev * (1.0 + 1e-12)

    head_to_head = {}
    for algo, mixing in (("assdsgt", "lazy-metropolis"), ("ssdsgt", "metropolis")):
        big = replace(
            _RING_BASE,
            agents=32,
            algo=algo,
            mixing=mixing,
            iters=400000,
            stride=4096,
            eps_stop=1e-6,
        )
        head_to_head[algo] = iterations_to_epsilon(run_experiment(big), 1e-6)
    print(
        f"m=8 momentum stop t={trace.summary['final_t']}; "
        f"m=32 iterations momentum={head_to_head['assdsgt']} "
        f"snapshot={head_to_head['ssdsgt']}"
    )
    assert head_to_head["assdsgt"] is not None
    assert head_to_head["ssdsgt"] is not None
    assert head_to_head["assdsgt"] <= head_to_head["ssdsgt"]


def test_noisy_weighted_averages_decay_at_the_reciprocal_rate():
    base = ExperimentConfig(
        topology="ring",
        agents=16,
        mixing="metropolis",
        algo="ssdsgt",
        d=2,
        mu=1.0,
        L=1.0,
        sigma_bar=1.0,
        heterogeneity=0.5,
        problem_seed=7,
        schedule="decaying",
        iters=40000,
        stride=4000,
        x0_radius=0.013,
        avg_checkpoints=(10000, 40000),
    )
    ratios = []
    for seed in range(1, 11):
        trace = run_experiment(replace(base, seed=seed))
        w = trace.summary["wavg_at"]
        ratios.append(w["10000"] / w["40000"])
    mean_ratio = float(np.mean(ratios))
    print(
        f"checkpoint ratio mean {mean_ratio:.3f} over 10 seeds "
        f"(min {min(ratios):.3f}, max {max(ratios):.3f})"
    )
    assert 2.5 <= mean_ratio <= 6.0


def test_momentum_operator_contracts_below_the_square_root_envelope():
    lazy = lazify(metropolis_mixing(build_graph("ring", 32)))
    gamma = default_gamma(lazy.lambda2)
    aug = chebyshev_augment(lazy, gamma)
    floor = 0.8 * math.sqrt(1.0 - lazy.lambda2)
    print(f"fitted contraction exponent {aug.theta_tilde:.6f}, floor {floor:.6f}")
    assert aug.theta_tilde >= floor

    decay = 1.0 - aug.theta_tilde
    rng = np.random.default_rng(41)
    for _ in range(20):
        x = rng.standard_normal((32, 2))
        start = np.linalg.norm(x - x.mean(axis=0))
        z = np.vstack([x, x])
        for t in range(1, 201):
            z = aug.apply(z)
            centered = z - np.tile(z.reshape(2, 32, 2).mean(axis=(0, 1)), (64, 1))
            bound = math.sqrt(MOMENTUM_ENVELOPE) * decay**t * start
            assert np.linalg.norm(centered) <= bound * (1.0 + 1e-9)


def test_iteration_counts_scale_with_the_network_gap_in_the_right_order():
    result = sweep_topology(
        _RING_BASE,
        (8, 16, 32),
        ("ssdsgt", "assdsgt", "dsgt"),
        eps=1e-6,
        seeds=2,
        multipliers={"dsgt": 64.0},
    )
    e = result.exponents
    print(
        f"fitted exponents: snapshot {e['ssdsgt']:.3f}, "
        f"momentum {e['assdsgt']:.3f}, plain tracking {e['dsgt']:.3f}"
    )
    assert e["ssdsgt"] <= 1.3
    assert e["assdsgt"] <= 0.8
    assert e["ssdsgt"] < e["dsgt"]


def test_gradient_oracles_are_calibrated():
    rng = np.random.default_rng(7)
    problem = make_quadratic_suite(6, 4, 0.5, 4.0, 1.0, rng, sigma_bar=1.0)

    residual = float(np.linalg.norm(problem.qbar @ problem.x_star + problem.cbar))
    print(f"minimizer residual {residual:.3e}")
    assert residual <= 1e-10

    probe = np.random.default_rng(19)
    h = 1e-4
    for _ in range(5):
        x = probe.standard_normal(problem.d)
        agent = int(probe.integers(problem.m))
        grad = exact_gradient(problem, agent, x)
        q, c = problem.quads[agent], problem.linears[agent]
        numeric = np.empty_like(grad)
        for j in range(problem.d):
            step = np.zeros(problem.d)
            step[j] = h
            plus = 0.5 * (x + step) @ q @ (x + step) + c @ (x + step)
            minus = 0.5 * (x - step) @ q @ (x - step) + c @ (x - step)
            numeric[j] = (plus - minus) / (2.0 * h)
        assert np.linalg.norm(numeric - grad) <= 1e-5 * max(1.0, np.linalg.norm(grad))

    noise_rng = np.random.default_rng(31)
    x = np.zeros(problem.d)
    exact = exact_gradient(problem, 0, x)
    draws = 100000
    noise = np.empty((draws, problem.d))
    for i in range(draws):
        noise[i] = stochastic_gradient(problem, 0, x, noise_rng) - exact
    energy = float((noise**2).sum(axis=1).mean())
    print(f"noise energy {energy:.4f} vs nominal {problem.sigma_bar**2:.4f}")
    assert 0.97 * problem.sigma_bar**2 <= energy <= 1.03 * problem.sigma_bar**2


def test_degenerate_settings_collapse_to_their_references():
    # One agent with refresh every step walks exactly like plain SGD.
    rng = np.random.default_rng(7)
    single = make_quadratic_suite(1, 3, 1.0, 2.0, 0.0, rng, sigma_bar=1.0)
    w = metropolis_mixing(build_graph("complete", 1))
    sched = Schedule(algo="ssdsgt", mode="constant", p=1.0, L=2.0, mu=1.0, theta=1.0, eta0=0.05)
    streams = StreamBundle.from_seed(42, 1)
    x0 = np.zeros(3)
    state = init_state(single, x0, "ssdsgt", streams)
    twin_streams = StreamBundle.from_seed(42, 1)
    stochastic_gradients(single, x0[None, :], twin_streams.agents)
    twin = x0.copy()
    for _ in range(50):
        state = ssdsgt_step(state, single, w, sched, streams)
        twin = twin - sched.eta0 * stochastic_gradients(single, twin[None, :], twin_streams.agents)[0]
        assert np.linalg.norm(state.x[0] - twin) <= 1e-12 * max(1.0, np.linalg.norm(twin))

    # Zero momentum weight reproduces the snapshot iteration bit for bit.
    rng = np.random.default_rng(7)
    shared = make_quadratic_suite(6, 2, 0.5, 4.0, 1.0, rng, sigma_bar=1.0)
    lazy = lazify(metropolis_mixing(build_graph("ring", 6)))
    aug = chebyshev_augment(lazy, 0.0)
    pair_sched = Schedule(
        algo="ssdsgt", mode="constant", p=0.3, L=4.0, mu=0.5, theta=0.4, eta0=0.003
    )
    ss_streams = StreamBundle.from_seed(29, 6)
    aug_streams = StreamBundle.from_seed(29, 6)
    start = np.array([1.5, -0.5])
    ss_state = init_state(shared, start, "ssdsgt", ss_streams)
    aug_state = init_state(shared, start, "assdsgt", aug_streams)
    for _ in range(60):
        ss_state = ssdsgt_step(ss_state, shared, lazy, pair_sched, ss_streams)
        aug_state = assdsgt_step(aug_state, shared, aug, pair_sched, aug_streams)
        assert np.array_equal(aug_state.x_aug[:6], ss_state.x)
        assert np.array_equal(aug_state.s_aug[:6], ss_state.s)
        assert np.array_equal(aug_state.g_snap, ss_state.g_snap)

    # A silent noise model returns the exact gradients without touching RNG.
    rng = np.random.default_rng(7)
    clean = make_quadratic_suite(4, 3, 0.5, 4.0, 1.0, rng, sigma_bar=0.0)
    points = np.random.default_rng(5).standard_normal((4, 3))
    oracle_streams = [np.random.default_rng(100 + k) for k in range(4)]
    before = [g.bit_generator.state for g in oracle_streams]
    noisy = stochastic_gradients(clean, points, oracle_streams)
    assert np.array_equal(noisy, exact_gradients(clean, points))
    assert [g.bit_generator.state for g in oracle_streams] == before
    print("single-agent SGD twin, zero-momentum pairing, and silent oracle all matched")


def test_runs_reproduce_byte_identically_and_formats_round_trip(tmp_path):
    cfg = ExperimentConfig(
        topology="ring",
        agents=6,
        algo="ssdsgt",
        sigma_bar=1.0,
        iters=200,
        stride=7,
        seed=12,
        x0_radius=2.0,
        avg_checkpoints=(100,),
        label="repro",
    )
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    write_trace(run_experiment(cfg), first)
    write_trace(run_experiment(cfg), second)
    assert first.read_bytes() == second.read_bytes()

    serial = tmp_path / "cfg.json"
    save_config(cfg, serial)
    assert load_config(serial) == cfg

    records = read_trace(first)
    reparsed = read_trace(first)
    originals = run_experiment(cfg).records
    assert len(records) == len(originals) == len(reparsed)
    for a, b in zip(records, originals):
        for field in ("eta", "consensus_x", "consensus_s", "snap_grad_dist", "psi", "mean_dist", "subopt"):
            x, y = getattr(a, field), getattr(b, field)
            assert x == y or abs(x - y) <= 1e-15 * abs(y)

    base = replace(_RING_BASE, iters=20000)
    serial_tables = []
    for workers in (1, 3):
        result = sweep_topology(base, (4, 8), ("ssdsgt",), eps=1e-3, seeds=2, workers=workers)
        table = tmp_path / f"sweep_{workers}.csv"
        result.to_csv(table)
        serial_tables.append(table.read_bytes())
    assert serial_tables[0] == serial_tables[1]
    print("byte-identical traces, lossless config and CSV round-trips, worker-count invariance")
