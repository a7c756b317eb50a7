"""Experiment configuration, deterministic runs, sweeps, and trace files.

A run is fully described by an :class:`ExperimentConfig`: topology, mixing
variant, algorithm, problem parameters, schedule selection, horizon, seeds,
and recording cadence. :func:`run_experiment` executes it deterministically,
audits the tracking identities as it goes, and returns a :class:`Trace` that
can be written to a CSV file and reloaded without precision loss.

Randomness is split into four independent purposes: problem generation uses
``problem_seed``; the run seed fans out into the snapshot coin stream, the
gossip edge stream, and one gradient-noise stream per agent. Thread counts
never touch draw order, so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .algorithms import (
    ALGORITHMS,
    AnyState,
    AssState,
    DsgtState,
    Schedule,
    SsState,
    assdsgt_step,
    audit_identities,
    dsgt_step,
    init_state,
    ssdsgt_step,
    step_size,
    theory_schedule,
)
from .diagnostics import CSV_COLUMNS, IterRecord, WeightedAverager, record_iteration
from .errors import ConfigError, InvariantViolation
from .objectives import QuadraticProblem, global_suboptimality, make_quadratic_suite
from .streams import StreamBundle
from .topology import (
    AugmentedMixing,
    Graph,
    MixingMatrix,
    build_graph,
    chebyshev_augment,
    default_gamma,
    gossip_contraction,
    lazify,
    metropolis_mixing,
    random_edge_gossip,
)

__all__ = [
    "TOPOLOGIES",
    "MIXINGS",
    "AUDIT_ABORT_TOL",
    "ExperimentConfig",
    "Trace",
    "RunSetup",
    "prepare_run",
    "run_experiment",
    "iterations_to_epsilon",
    "tune_dsgt_step",
    "tune_dsgt_beta",
    "SweepRow",
    "SweepResult",
    "sweep_topology",
    "write_trace",
    "read_trace",
    "save_config",
    "load_config",
]

TOPOLOGIES: tuple[str, ...] = ("ring", "grid", "star", "complete")
MIXINGS: tuple[str, ...] = ("metropolis", "lazy-metropolis", "random-gossip")

#: Runs abort when any audited identity ratio exceeds this threshold.
AUDIT_ABORT_TOL = 1e-7

_SCHEDULE_MODES = ("auto", "constant", "decaying")
_DSGT_TUNINGS = ("matched", "tuned")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one simulator run.

    Attributes:
        topology: Graph family, one of :data:`TOPOLOGIES`.
        agents: Number of agents (perfect square for ``grid``).
        mixing: Mixing variant, one of :data:`MIXINGS`. The momentum
            algorithm requires ``lazy-metropolis`` (a static positive
            semidefinite matrix).
        algo: Algorithm tag, one of
            :data:`~netgrad.algorithms.ALGORITHMS`.
        d: Decision dimension.
        mu: Strong convexity modulus.
        L: Smoothness constant.
        sigma_bar: Gradient noise level.
        heterogeneity: Spread of the per-agent linear terms.
        problem_seed: Seed for problem generation (and the start direction).
        schedule: ``auto`` picks ``constant`` for noiseless runs and
            ``decaying`` for noisy ones; the other values force a mode.
        step_multiplier: Scale on the template step size.
        dsgt_tuning: For the plain tracking baseline only: ``matched`` uses
            the squared-gap template, ``tuned`` searches for a good step.
        iters: Iteration horizon ``T``.
        seed: Run seed feeding the coin, gossip, and noise streams.
        stride: Recording cadence; iteration 0 and the final iteration are
            always recorded.
        x0_radius: When set, start all agents at ``x* + radius * u`` for a
            deterministic unit direction ``u`` drawn from the problem
            stream; when ``None``, start at the origin.
        eps_stop: Optional suboptimality target that ends the run early
            (the weighted-average suboptimality for noisy runs).
        avg_checkpoints: Iterations at which the running weighted-average
            suboptimality is stored into the summary.
        label: Optional display label for plots.
        out: Optional default trace output path used by the command line.
    """

    topology: str = "ring"
    agents: int = 8
    mixing: str = "metropolis"
    algo: str = "ssdsgt"
    d: int = 2
    mu: float = 1.0
    L: float = 2.0
    sigma_bar: float = 0.0
    heterogeneity: float = 1.0
    problem_seed: int = 0
    schedule: str = "auto"
    step_multiplier: float = 1.0
    dsgt_tuning: str = "matched"
    iters: int = 1000
    seed: int = 0
    stride: int = 1
    x0_radius: float | None = None
    eps_stop: float | None = None
    avg_checkpoints: tuple[int, ...] = ()
    label: str | None = None
    out: str | None = None

    def validate(self) -> None:
        """Raise :class:`ConfigError` naming the first offending field."""
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"must be one of {TOPOLOGIES}, got '{self.topology}'", "topology")
        if not isinstance(self.agents, int) or self.agents < 1:
            raise ConfigError(f"needs a positive integer, got {self.agents!r}", "agents")
        if self.topology == "grid":
            side = math.isqrt(self.agents)
            if side * side != self.agents:
                raise ConfigError(
                    f"grid topology needs a perfect square, got {self.agents}", "agents"
                )
        if self.mixing not in MIXINGS:
            raise ConfigError(f"must be one of {MIXINGS}, got '{self.mixing}'", "mixing")
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"must be one of {ALGORITHMS}, got '{self.algo}'", "algo")
        if self.algo == "assdsgt" and self.mixing != "lazy-metropolis":
            raise ConfigError(
                "the momentum algorithm needs the static positive semidefinite "
                f"'lazy-metropolis' mixing, got '{self.mixing}'",
                "mixing",
            )
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"needs a positive integer, got {self.d!r}", "d")
        if not (self.mu > 0.0):
            raise ConfigError(f"must be positive, got {self.mu}", "mu")
        if not (self.L >= self.mu):
            raise ConfigError(f"must be at least mu={self.mu}, got {self.L}", "L")
        if self.sigma_bar < 0.0:
            raise ConfigError(f"must be nonnegative, got {self.sigma_bar}", "sigma_bar")
        if self.heterogeneity < 0.0:
            raise ConfigError(f"must be nonnegative, got {self.heterogeneity}", "heterogeneity")
        if self.schedule not in _SCHEDULE_MODES:
            raise ConfigError(
                f"must be one of {_SCHEDULE_MODES}, got '{self.schedule}'", "schedule"
            )
        if not (self.step_multiplier > 0.0):
            raise ConfigError(f"must be positive, got {self.step_multiplier}", "step_multiplier")
        if self.dsgt_tuning not in _DSGT_TUNINGS:
            raise ConfigError(
                f"must be one of {_DSGT_TUNINGS}, got '{self.dsgt_tuning}'", "dsgt_tuning"
            )
        if not isinstance(self.iters, int) or self.iters < 1:
            raise ConfigError(f"needs a positive integer, got {self.iters!r}", "iters")
        if not isinstance(self.stride, int) or self.stride < 1:
            raise ConfigError(f"needs a positive integer, got {self.stride!r}", "stride")
        if self.x0_radius is not None and not (self.x0_radius >= 0.0):
            raise ConfigError(f"must be nonnegative, got {self.x0_radius}", "x0_radius")
        if self.eps_stop is not None and not (self.eps_stop > 0.0):
            raise ConfigError(f"must be positive, got {self.eps_stop}", "eps_stop")
        for value in self.avg_checkpoints:
            if not isinstance(value, int) or value < 0:
                raise ConfigError(
                    f"entries need to be nonnegative integers, got {value!r}",
                    "avg_checkpoints",
                )

    def effective_schedule_mode(self) -> str:
        if self.schedule != "auto":
            return self.schedule
        return "constant" if self.sigma_bar == 0.0 else "decaying"

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"configuration must be a JSON object, got {type(data).__name__}")
        known = {f.name: f for f in fields(cls)}
        kwargs: dict = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError("unknown configuration field", key)
            kwargs[key] = value
        cfg = _coerce_config(cls, kwargs)
        cfg.validate()
        return cfg


_INT_FIELDS = {"agents", "d", "problem_seed", "iters", "seed", "stride"}
_FLOAT_FIELDS = {"mu", "L", "sigma_bar", "heterogeneity", "step_multiplier"}
_OPT_FLOAT_FIELDS = {"x0_radius", "eps_stop"}
_STR_FIELDS = {"topology", "mixing", "algo", "schedule", "dsgt_tuning"}
_OPT_STR_FIELDS = {"label", "out"}


def _coerce_config(cls: type, kwargs: dict) -> "ExperimentConfig":
    coerced: dict = {}
    for key, value in kwargs.items():
        try:
            if key in _INT_FIELDS:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError(f"expected an integer, got {value!r}")
                coerced[key] = value
            elif key in _FLOAT_FIELDS:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError(f"expected a number, got {value!r}")
                coerced[key] = float(value)
            elif key in _OPT_FLOAT_FIELDS:
                if value is None:
                    coerced[key] = None
                elif isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError(f"expected a number or null, got {value!r}")
                else:
                    coerced[key] = float(value)
            elif key in _STR_FIELDS:
                if not isinstance(value, str):
                    raise TypeError(f"expected a string, got {value!r}")
                coerced[key] = value
            elif key in _OPT_STR_FIELDS:
                if value is not None and not isinstance(value, str):
                    raise TypeError(f"expected a string or null, got {value!r}")
                coerced[key] = value
            elif key == "avg_checkpoints":
                if not isinstance(value, (list, tuple)):
                    raise TypeError(f"expected a list of integers, got {value!r}")
                items = []
                for item in value:
                    if isinstance(item, bool) or not isinstance(item, int):
                        raise TypeError(f"expected integers, got {item!r}")
                    items.append(item)
                coerced[key] = tuple(items)
            else:
                coerced[key] = value
        except TypeError as exc:
            raise ConfigError(str(exc), key) from None
    return cls(**coerced)


@dataclass
class Trace:
    """Result of one run: the config echo, records, and summary statistics."""

    config: dict
    records: list[IterRecord]
    summary: dict


@dataclass
class RunSetup:
    """Resolved ingredients of a run: problem, mixing, schedule, start point."""

    cfg: ExperimentConfig
    graph: Graph
    problem: QuadraticProblem
    w: MixingMatrix | None
    aug: AugmentedMixing | None
    theta: float
    sched: Schedule
    x0: np.ndarray


def _resolve_x0(cfg: ExperimentConfig, problem: QuadraticProblem, rng: np.random.Generator) -> np.ndarray:
    if cfg.x0_radius is None:
        return np.zeros(problem.d)
    direction = rng.standard_normal(problem.d)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        direction = np.zeros(problem.d)
        direction[0] = 1.0
        norm = 1.0
    return problem.x_star + (cfg.x0_radius / norm) * direction


def prepare_run(cfg: ExperimentConfig, schedule_override: Schedule | None = None) -> RunSetup:
    """Validate the config and build every run ingredient deterministically."""
    cfg.validate()
    graph = build_graph(cfg.topology, cfg.agents)
    problem_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.problem_seed)))
    problem = make_quadratic_suite(
        cfg.agents,
        cfg.d,
        cfg.mu,
        cfg.L,
        cfg.heterogeneity,
        problem_rng,
        sigma_bar=cfg.sigma_bar,
    )
    x0 = _resolve_x0(cfg, problem, problem_rng)

    base = metropolis_mixing(graph)
    aug: AugmentedMixing | None = None
    if cfg.mixing == "metropolis":
        w: MixingMatrix | None = base
        theta = base.theta
    elif cfg.mixing == "lazy-metropolis":
        w = lazify(base)
        theta = w.theta
    else:
        w = None
        _, theta = gossip_contraction(graph)

    sched_theta = theta
    if cfg.algo == "assdsgt":
        assert w is not None
        aug = chebyshev_augment(w, default_gamma(w.lambda2))
        sched_theta = aug.theta_tilde

    if schedule_override is not None:
        sched = schedule_override
    else:
        sched = theory_schedule(
            cfg.algo,
            cfg.effective_schedule_mode(),
            sched_theta,
            cfg.L,
            cfg.mu,
            multiplier=cfg.step_multiplier,
        )
    return RunSetup(
        cfg=cfg,
        graph=graph,
        problem=problem,
        w=w,
        aug=aug,
        theta=sched_theta,
        sched=sched,
        x0=x0,
    )


class _AuditTracker:
    """Normalizes identity residuals against running scale maxima."""

    def __init__(self) -> None:
        self.scales: dict[str, float] = {}
        self.max_ratio: dict[str, float] = {}

    def check(self, name: str, err: float, scale: float, t: int) -> None:
        running = max(self.scales.get(name, 0.0), scale)
        self.scales[name] = running
        ratio = 0.0 if err == 0.0 else err / max(running, 1e-300)
        if ratio > self.max_ratio.get(name, 0.0):
            self.max_ratio[name] = ratio
        if ratio > AUDIT_ABORT_TOL:
            raise InvariantViolation(
                f"identity '{name}' off by a relative {ratio:.3e} "
                f"(threshold {AUDIT_ABORT_TOL:g})",
                iteration=t,
            )


def _state_mean(state: AnyState) -> np.ndarray:
    if isinstance(state, AssState):
        return state.x_aug.mean(axis=0)
    return state.x.mean(axis=0)


def _working_mean(state: AnyState, m: int) -> np.ndarray:
    if isinstance(state, AssState):
        return state.x_aug[:m].mean(axis=0)
    return state.x.mean(axis=0)


def run_experiment(
    cfg: ExperimentConfig,
    schedule_override: Schedule | None = None,
) -> Trace:
    """Run one experiment deterministically and return its trace.

    The run audits its tracking identities at every step, normalizing each
    residual by the running maximum of the magnitudes involved, and aborts
    with :class:`InvariantViolation` if any ratio exceeds
    :data:`AUDIT_ABORT_TOL`. Iteration 0 and the final iteration are always
    recorded; intermediate iterations are recorded every ``stride`` steps.

    Args:
        cfg: The experiment description.
        schedule_override: Advanced hook replacing the template schedule
            (used by the step-size tuners). When the plain tracking baseline
            is configured with ``dsgt_tuning='tuned'`` and no override is
            given, a tuning search runs first and its winner is used.

    Returns:
        The completed :class:`Trace`.
    """
    setup = prepare_run(cfg, schedule_override)
    if (
        schedule_override is None
        and cfg.algo == "dsgt"
        and cfg.dsgt_tuning == "tuned"
    ):
        if cfg.sigma_bar == 0.0:
            tuned = tune_dsgt_step(cfg)
        else:
            tuned = tune_dsgt_beta(cfg)
        setup = prepare_run(cfg, tuned)
    return _execute(setup)


def _execute(setup: RunSetup) -> Trace:
    cfg = setup.cfg
    problem = setup.problem
    sched = setup.sched
    m = problem.m
    streams = StreamBundle.from_seed(cfg.seed, m)
    state = init_state(problem, setup.x0, cfg.algo, streams)

    audits = _AuditTracker()
    averager = WeightedAverager(mu=cfg.mu)
    records: list[IterRecord] = []
    wavg_at: dict[str, float] = {}
    checkpoints = set(cfg.avg_checkpoints)
    noisy = cfg.sigma_bar > 0.0

    def observe(current: AnyState) -> float:
        """Push diagnostics for the current iteration; returns the stop metric."""
        t = current.t
        eta_t = step_size(sched, t)
        xbar = _working_mean(current, m)
        subopt = global_suboptimality(problem, xbar)
        averager.push(eta_t, subopt)
        wavg = averager.average
        if t in checkpoints:
            wavg_at[str(t)] = wavg
        for name, err, scale in audit_identities(current):
            audits.check(name, err, scale, t)
        if t % cfg.stride == 0 or t == cfg.iters:
            records.append(
                record_iteration(
                    current,
                    problem,
                    eta_t,
                    setup.theta,
                    wavg_subopt=wavg,
                )
            )
        return wavg if noisy else subopt

    metric = observe(state)
    stopped_early = False
    eps = cfg.eps_stop
    if eps is not None and metric <= eps:
        stopped_early = True

    while not stopped_early and state.t < cfg.iters:
        mean_before = _state_mean(state)
        if cfg.algo == "ssdsgt":
            assert isinstance(state, SsState)
            w_step = setup.w if setup.w is not None else random_edge_gossip(setup.graph, streams.gossip)
            state = ssdsgt_step(state, problem, w_step, sched, streams)
        elif cfg.algo == "dsgt":
            assert isinstance(state, DsgtState)
            w_step = setup.w if setup.w is not None else random_edge_gossip(setup.graph, streams.gossip)
            state = dsgt_step(state, problem, w_step, sched, streams)
        else:
            assert isinstance(state, AssState)
            assert setup.aug is not None
            state = assdsgt_step(state, problem, setup.aug, sched, streams)

        assert state.last_grad_mean is not None
        mean_after = _state_mean(state)
        predicted = mean_before - state.last_eta * state.last_grad_mean
        err = float(np.linalg.norm(mean_after - predicted))
        scale = max(
            float(np.linalg.norm(mean_after)),
            float(np.linalg.norm(mean_before)),
            state.last_eta * float(np.linalg.norm(state.last_grad_mean)),
        )
        audits.check("mean_dynamics", err, scale, state.t)

        metric = observe(state)
        if eps is not None and metric <= eps:
            stopped_early = True

    if records[-1].t != state.t:
        records.append(
            record_iteration(
                state,
                problem,
                step_size(sched, state.t),
                setup.theta,
                wavg_subopt=averager.average,
            )
        )

    final = records[-1]
    summary = {
        "final_t": state.t,
        "final_subopt": final.subopt,
        "final_wavg_subopt": averager.average,
        "stopped_early": stopped_early,
        "theta": setup.theta,
        "schedule_mode": sched.mode,
        "eta0": sched.eta0,
        "beta": sched.beta,
        "p": sched.p,
        "audit_max": dict(sorted(audits.max_ratio.items())),
        "wavg_at": wavg_at,
    }
    if setup.aug is not None:
        summary["gamma"] = setup.aug.gamma
        summary["theta_tilde"] = setup.aug.theta_tilde
        summary["base_theta"] = setup.aug.base.theta
    return Trace(config=cfg.to_dict(), records=records, summary=summary)


def iterations_to_epsilon(trace: Trace, eps: float) -> int | None:
    """First recorded iteration whose accuracy metric is at or below ``eps``.

    Noiseless runs use the recorded suboptimality of the average iterate;
    noisy runs use the running weighted-average suboptimality. Returns
    ``None`` when the trace never reaches the target.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    noisy = float(trace.config.get("sigma_bar", 0.0)) > 0.0
    for record in trace.records:
        value = record.wavg_subopt if noisy else record.subopt
        if value is None:
            value = record.subopt
        if value <= eps:
            return record.t
    return None


def _dsgt_system_radius(setup: RunSetup, eta: float) -> float:
    """Spectral radius of the linear map driving the noiseless baseline.

    The stacked (iterate, tracker) error evolves linearly for quadratic
    objectives; this assembles the dense system matrix and returns its
    spectral radius restricted to the algorithm's invariant subspace. The
    restriction matters: the map conserves the per-coordinate difference
    between the tracker total and the gradient total, which contributes unit
    eigenvalues the iteration never excites (it starts with the conserved
    quantity at zero). The tuner uses the restricted radius to skip divergent
    candidates and to budget probe runs.
    """
    problem = setup.problem
    assert setup.w is not None
    m, d = problem.m, problem.d
    eye = np.eye(m * d)
    wk = np.kron(setup.w.entries, np.eye(d))
    blocks = np.zeros((m * d, m * d))
    for i in range(m):
        blocks[i * d : (i + 1) * d, i * d : (i + 1) * d] = problem.quads[i]
    top = np.concatenate([wk, -eta * wk], axis=1)
    bottom = np.concatenate([blocks @ (wk - eye), wk - eta * (blocks @ wk)], axis=1)
    system = np.concatenate([top, bottom], axis=0)
    conserved = np.concatenate(
        [-np.concatenate(list(problem.quads), axis=1), np.tile(np.eye(d), (1, m))],
        axis=1,
    )
    kernel = np.linalg.svd(conserved)[2][d:].T
    restricted = kernel.T @ system @ kernel
    return float(np.max(np.abs(np.linalg.eigvals(restricted))))


def tune_dsgt_step(cfg: ExperimentConfig, eps: float | None = None) -> Schedule:
    """Halving search for a good constant step for the noiseless baseline.

    Starting from ``1 / L`` the candidate step is halved repeatedly; each
    stable candidate (checked through the exact linear system radius) is
    probed with an early-stopping run, and the candidate reaching the target
    in the fewest iterations wins. The search ends after the counts worsen
    twice in a row.

    Args:
        cfg: Baseline configuration (``algo='dsgt'``, ``sigma_bar == 0``).
        eps: Suboptimality target; defaults to ``cfg.eps_stop`` or ``1e-6``.

    Returns:
        A constant :class:`Schedule` with the winning step size.
    """
    if cfg.algo != "dsgt":
        raise ConfigError(f"step tuning applies to 'dsgt', got '{cfg.algo}'", "algo")
    if cfg.sigma_bar != 0.0:
        raise ConfigError("the halving search needs a noiseless run", "sigma_bar")
    target = eps if eps is not None else (cfg.eps_stop if cfg.eps_stop is not None else 1e-6)
    setup = prepare_run(cfg, _constant_dsgt_schedule(cfg, 1.0))

    best_eta: float | None = None
    best_count: int | None = None
    worsened = 0
    eta = 1.0 / cfg.L
    for _ in range(40):
        radius = _dsgt_system_radius(setup, eta)
        if radius < 1.0 - 1e-12:
            margin = -math.log(radius)
            budget = min(cfg.iters, max(1000, int(80.0 / margin)))
            probe_cfg = replace(
                cfg,
                iters=budget,
                stride=max(1, budget // 50),
                eps_stop=target,
                avg_checkpoints=(),
            )
            trace = run_experiment(probe_cfg, schedule_override=_constant_dsgt_schedule(cfg, eta))
            count = iterations_to_epsilon(trace, target)
            if count is not None:
                if best_count is None or count < best_count:
                    best_eta, best_count = eta, count
                    worsened = 0
                else:
                    worsened += 1
                    if worsened >= 2:
                        break
        eta *= 0.5
    if best_eta is None:
        raise InvariantViolation(
            f"baseline step tuning found no stable step reaching {target:g} "
            f"within {cfg.iters} iterations"
        )
    return _constant_dsgt_schedule(cfg, best_eta)


def _constant_dsgt_schedule(cfg: ExperimentConfig, eta: float) -> Schedule:
    return Schedule(
        algo="dsgt",
        mode="constant",
        p=0.0,
        L=cfg.L,
        mu=cfg.mu,
        theta=1.0,
        eta0=eta,
    )


def tune_dsgt_beta(cfg: ExperimentConfig, multipliers: tuple[float, ...] | None = None) -> Schedule:
    """Grid search over decay scales for the noisy baseline.

    Each candidate multiplies the matched template ``beta`` and runs the full
    horizon; the candidate with the smallest final weighted-average
    suboptimality wins.
    """
    if cfg.algo != "dsgt":
        raise ConfigError(f"decay tuning applies to 'dsgt', got '{cfg.algo}'", "algo")
    if cfg.sigma_bar <= 0.0:
        raise ConfigError("the decay grid needs a noisy run", "sigma_bar")
    grid = multipliers if multipliers is not None else (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    setup = prepare_run(cfg, _constant_dsgt_schedule(cfg, 1.0))
    theta = setup.w.theta if setup.w is not None else setup.theta

    best: tuple[float, Schedule] | None = None
    for multiplier in grid:
        candidate = theory_schedule("dsgt", "decaying", theta, cfg.L, cfg.mu, multiplier=multiplier)
        probe_cfg = replace(cfg, stride=max(1, cfg.iters // 50), avg_checkpoints=())
        trace = run_experiment(probe_cfg, schedule_override=candidate)
        score = trace.summary["final_wavg_subopt"]
        if best is None or score < best[0]:
            best = (score, candidate)
    assert best is not None
    return best[1]


@dataclass(frozen=True)
class SweepRow:
    """One (algorithm, size) cell of a topology sweep.

    ``theta`` is the contraction parameter of the cell's own mixing matrix
    (the momentum variant reports its base matrix, not the accelerated
    operator), so exponent fits compare algorithms on a common axis.
    """

    algo: str
    m: int
    theta: float
    counts: tuple[int | None, ...]

    @property
    def mean_iters(self) -> float | None:
        reached = [c for c in self.counts if c is not None]
        if not reached or len(reached) != len(self.counts):
            return None
        return float(np.mean(reached))

    @property
    def std_iters(self) -> float:
        reached = [c for c in self.counts if c is not None]
        if len(reached) <= 1:
            return 0.0
        return float(np.std(reached))


@dataclass
class SweepResult:
    """All rows of a sweep plus per-algorithm scaling exponents.

    ``exponents[algo]`` is the least-squares slope of
    ``log(mean iterations)`` against ``log(1 / theta)`` across the swept
    sizes: how fast the iteration count grows as the network gets worse
    connected.
    """

    eps: float
    rows: list[SweepRow]
    exponents: dict[str, float]

    def format_table(self) -> str:
        lines = [f"iterations to suboptimality {self.eps:g}"]
        header = f"{'algo':>8} {'m':>4} {'theta':>12} {'mean':>12} {'std':>10}  counts"
        lines.append(header)
        for row in self.rows:
            mean = f"{row.mean_iters:.1f}" if row.mean_iters is not None else "n/a"
            counts = ",".join("-" if c is None else str(c) for c in row.counts)
            lines.append(
                f"{row.algo:>8} {row.m:>4} {row.theta:>12.6g} {mean:>12} "
                f"{row.std_iters:>10.1f}  {counts}"
            )
        for algo in sorted(self.exponents):
            lines.append(f"exponent[{algo}] = {self.exponents[algo]:.3f}")
        return "\n".join(lines)

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["algo", "m", "theta", "mean_iters", "std_iters", "counts"])
            for row in self.rows:
                mean = "" if row.mean_iters is None else f"{row.mean_iters:.17g}"
                counts = ";".join("-" if c is None else str(c) for c in row.counts)
                writer.writerow([row.algo, row.m, f"{row.theta:.17g}", mean, f"{row.std_iters:.17g}", counts])
            for algo in sorted(self.exponents):
                writer.writerow(["exponent", algo, f"{self.exponents[algo]:.17g}", "", "", ""])


def sweep_topology(
    base: ExperimentConfig,
    sizes: tuple[int, ...] | list[int],
    algos: tuple[str, ...] | list[str],
    eps: float,
    seeds: int = 5,
    workers: int = 1,
    multipliers: dict[str, float] | None = None,
) -> SweepResult:
    """Measure iterations-to-target across network sizes for several algorithms.

    For each algorithm and size, ``seeds`` runs (run seeds ``base.seed``
    upward) execute with early stopping at ``eps`` and the first recorded
    iteration at or below the target is collected. The momentum algorithm is
    switched to its required lazy mixing automatically, and the plain
    tracking baseline is step-tuned once per size for fairness when
    ``base.dsgt_tuning`` is ``"tuned"``. Worker threads only parallelize
    independent runs, so results do not depend on ``workers``.

    ``multipliers`` maps an algorithm name to a constant factor applied to
    its template step size in every cell (others keep ``base``'s
    multiplier). A constant factor rescales iteration counts uniformly
    across sizes, so fitted exponents are unaffected; it exists to keep
    slow template schedules inside the iteration budget.
    """
    if eps <= 0.0:
        raise ConfigError(f"must be positive, got {eps}", "eps")
    if seeds < 1:
        raise ConfigError(f"needs at least one seed, got {seeds}", "seeds")
    sizes = tuple(int(v) for v in sizes)
    algos = tuple(algos)
    for algo in algos:
        if algo not in ALGORITHMS:
            raise ConfigError(f"must be one of {ALGORITHMS}, got '{algo}'", "algo")
    scale = {k: float(v) for k, v in (multipliers or {}).items()}
    for algo, value in scale.items():
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm '{algo}'", "multipliers")
        if not value > 0.0:
            raise ConfigError(f"must be positive, got {value}", "multipliers")

    def cell_config(algo: str, m: int, seed_index: int) -> ExperimentConfig:
        mixing = "lazy-metropolis" if algo == "assdsgt" else base.mixing
        # The early-stopping record lands exactly on the first iteration at or
        # below the target, so a coarse stride keeps memory flat without
        # costing count resolution.
        return replace(
            base,
            algo=algo,
            agents=m,
            mixing=mixing,
            seed=base.seed + seed_index,
            eps_stop=eps,
            stride=max(1, base.iters // 512),
            avg_checkpoints=(),
            step_multiplier=scale.get(algo, base.step_multiplier),
            label=None,
        )

    overrides: dict[tuple[str, int], Schedule | None] = {}
    for algo in algos:
        for m in sizes:
            if algo == "dsgt" and base.dsgt_tuning == "tuned":
                tuning_cfg = cell_config(algo, m, 0)
                if base.sigma_bar == 0.0:
                    overrides[(algo, m)] = tune_dsgt_step(tuning_cfg, eps=eps)
                else:
                    overrides[(algo, m)] = tune_dsgt_beta(tuning_cfg)
            else:
                overrides[(algo, m)] = None

    jobs = [(algo, m, k) for algo in algos for m in sizes for k in range(seeds)]

    def run_job(job: tuple[str, int, int]) -> tuple[tuple[str, int, int], int | None, float]:
        algo, m, k = job
        cfg = cell_config(algo, m, k)
        trace = run_experiment(cfg, schedule_override=overrides[(algo, m)])
        # Exponents compare algorithms on the network's own contraction
        # parameter, so the momentum cells report their base (pre-momentum)
        # gap rather than the accelerated schedule parameter.
        gap = trace.summary.get("base_theta", trace.summary["theta"])
        return job, iterations_to_epsilon(trace, eps), gap

    results: dict[tuple[str, int, int], tuple[int | None, float]] = {}
    if workers <= 1:
        for job in jobs:
            key, count, theta = run_job(job)
            results[key] = (count, theta)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, count, theta in pool.map(run_job, jobs):
                results[key] = (count, theta)

    rows: list[SweepRow] = []
    for algo in algos:
        for m in sizes:
            counts = tuple(results[(algo, m, k)][0] for k in range(seeds))
            theta = results[(algo, m, 0)][1]
            rows.append(SweepRow(algo=algo, m=m, theta=theta, counts=counts))

    exponents: dict[str, float] = {}
    for algo in algos:
        points = [
            (row.theta, row.mean_iters)
            for row in rows
            if row.algo == algo and row.mean_iters is not None and row.mean_iters > 0
        ]
        if len(points) >= 2:
            log_inv_theta = np.log([1.0 / theta for theta, _ in points])
            log_iters = np.log([mean for _, mean in points])
            slope = float(np.polyfit(log_inv_theta, log_iters, 1)[0])
            exponents[algo] = slope
    return SweepResult(eps=eps, rows=rows, exponents=exponents)


def write_trace(trace: Trace, path: str | os.PathLike) -> None:
    """Write the trace records as a CSV file with LF endings.

    Floats carry 17 significant digits, enough to reload every value
    bit-for-bit.
    """
    with open(path, "w", newline="\n", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in trace.records:
            row = []
            for name in CSV_COLUMNS:
                value = getattr(record, name)
                if name in ("t", "zeta"):
                    row.append(str(int(value)))
                else:
                    row.append(f"{float(value):.17g}")
            writer.writerow(row)


def read_trace(path: str | os.PathLike) -> list[IterRecord]:
    """Load trace records from a CSV file written by :func:`write_trace`.

    Raises:
        ConfigError: On a missing file, wrong header, or malformed cell; the
            message names the line and column involved.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"trace file '{path}' does not exist")
    records: list[IterRecord] = []
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"trace file '{path}' is empty") from None
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(
                f"trace file '{path}' line 1: header {header} does not match {list(CSV_COLUMNS)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise ConfigError(
                    f"trace file '{path}' line {line_no}: expected "
                    f"{len(CSV_COLUMNS)} cells, got {len(row)}"
                )
            values: dict = {}
            for name, cell in zip(CSV_COLUMNS, row):
                try:
                    values[name] = int(cell) if name in ("t", "zeta") else float(cell)
                except ValueError:
                    raise ConfigError(
                        f"trace file '{path}' line {line_no}, column '{name}': "
                        f"cannot parse {cell!r}"
                    ) from None
            records.append(IterRecord(**values))
    return records


def save_config(cfg: ExperimentConfig, path: str | os.PathLike) -> None:
    """Write the configuration as UTF-8 JSON."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(cfg.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Load and validate a configuration from a UTF-8 JSON file.

    Raises:
        ConfigError: On a missing file, JSON syntax errors (with line and
            column), unknown fields, or invalid values.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file '{path}' does not exist")
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config file '{path}' line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from None
    return ExperimentConfig.from_dict(data)
