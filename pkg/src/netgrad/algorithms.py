"""Decentralized gradient-tracking iterations and their step-size schedules.

Three iteration families share this module:

* ``dsgt``: plain stochastic gradient tracking. Every agent refreshes its
  gradient every iteration and a tracker variable follows the network-average
  gradient through mixing.
* ``ssdsgt``: snapshot gradient tracking. Fresh gradients are paired with a
  cached snapshot gradient as a control variate every iteration, while the
  tracker itself is refreshed only when a shared Bernoulli coin fires. The
  cached snapshot realization is authoritative: it is stored once when the
  coin fires and never re-sampled.
* ``assdsgt``: snapshot tracking driven through the momentum-augmented mixing
  operator on duplicated state blocks, which accelerates consensus on poorly
  connected graphs.

All iterations act on row-stacked states of shape ``(m, d)`` (``(2m, d)`` for
the augmented family). Randomness comes exclusively from a
:class:`~netgrad.streams.StreamBundle`; noiseless runs draw nothing from the
gradient streams and are bit-identical to exact-gradient runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import QuadraticProblem, stochastic_gradients
from .streams import StreamBundle
from .topology import AugmentedMixing, MixingMatrix

__all__ = [
    "ALGORITHMS",
    "SNAPSHOT_CONSTANT_DIVISOR",
    "MOMENTUM_CONSTANT_DIVISOR",
    "SNAPSHOT_DECAY_DIVISOR",
    "MOMENTUM_DECAY_DIVISOR",
    "Schedule",
    "theory_schedule",
    "step_size",
    "SsState",
    "AssState",
    "DsgtState",
    "init_state",
    "ssdsgt_step",
    "assdsgt_step",
    "dsgt_step",
    "audit_identities",
]

#: Valid algorithm tags, in the order the command line tool lists them.
ALGORITHMS: tuple[str, ...] = ("dsgt", "ssdsgt", "assdsgt")

#: Constant-step divisor for the snapshot family: ``eta = theta / (192 L)``.
SNAPSHOT_CONSTANT_DIVISOR = 192.0
#: Constant-step divisor for the momentum family: ``eta = theta_tilde / (768 L)``.
MOMENTUM_CONSTANT_DIVISOR = 768.0
#: Decaying-step divisor for the snapshot family: ``beta = theta / 1152``.
SNAPSHOT_DECAY_DIVISOR = 1152.0
#: Decaying-step divisor for the momentum family: ``beta = theta_tilde / 4608``.
MOMENTUM_DECAY_DIVISOR = 4608.0


@dataclass(frozen=True)
class Schedule:
    """Step-size and snapshot-probability schedule for one run.

    Attributes:
        algo: Iteration family the schedule drives (one of :data:`ALGORITHMS`).
        mode: ``constant`` holds ``eta0`` forever; ``decaying`` uses
            ``eta_t = 6 beta / (L + beta * mu * t)``.
        p: Per-iteration probability of refreshing the snapshot (unused by
            ``dsgt``, which keeps no snapshot).
        L: Smoothness constant of the objective.
        mu: Strong convexity modulus.
        theta: Contraction parameter the schedule was derived from; kept for
            diagnostics.
        eta0: Constant step size (``constant`` mode only).
        beta: Decay scale (``decaying`` mode only).
    """

    algo: str
    mode: str
    p: float
    L: float
    mu: float
    theta: float
    eta0: float | None = None
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm tag '{self.algo}'")
        if self.mode == "constant":
            if self.eta0 is None or self.eta0 <= 0.0:
                raise ValueError("constant schedule needs a positive eta0")
        elif self.mode == "decaying":
            if self.beta is None or self.beta <= 0.0:
                raise ValueError("decaying schedule needs a positive beta")
            if self.mu <= 0.0:
                raise ValueError("decaying schedule needs mu > 0")
        else:
            raise ValueError(f"unknown schedule mode '{self.mode}'")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"snapshot probability must lie in [0, 1], got {self.p}")


def theory_schedule(
    algo: str,
    mode: str,
    theta: float,
    L: float,
    mu: float,
    multiplier: float = 1.0,
) -> Schedule:
    """Build the conservative theory-style schedule for an algorithm.

    The snapshot family uses ``theta / 192 L`` (constant) or
    ``beta = theta / 1152`` (decaying) with snapshot probability ``theta``.
    The momentum family uses the same template with divisors 768 and 4608 and
    the fitted augmented contraction in place of ``theta``. The plain
    tracking baseline has no snapshot mechanism and pays for consensus error
    in both its descent and tracking recursions, so its matched template
    substitutes ``theta**2``; pass a ``multiplier`` to scale any template.

    Args:
        algo: One of :data:`ALGORITHMS`.
        mode: ``constant`` or ``decaying``.
        theta: Contraction parameter of the mixing operator the run will use
            (the fitted augmented value for ``assdsgt``).
        L: Smoothness constant.
        mu: Strong convexity modulus.
        multiplier: Optional scale on the template step size.

    Returns:
        The assembled :class:`Schedule`.
    """
    if multiplier <= 0.0:
        raise ValueError(f"step multiplier must be positive, got {multiplier}")
    if not (0.0 < theta <= 1.0):
        raise ValueError(f"contraction parameter must lie in (0, 1], got {theta}")
    if algo == "ssdsgt":
        scale, p = theta, theta
        divisors = (SNAPSHOT_CONSTANT_DIVISOR, SNAPSHOT_DECAY_DIVISOR)
    elif algo == "assdsgt":
        scale, p = theta, theta
        divisors = (MOMENTUM_CONSTANT_DIVISOR, MOMENTUM_DECAY_DIVISOR)
    elif algo == "dsgt":
        scale, p = theta * theta, 0.0
        divisors = (SNAPSHOT_CONSTANT_DIVISOR, SNAPSHOT_DECAY_DIVISOR)
    else:
        raise ValueError(f"unknown algorithm tag '{algo}'")
    if mode == "constant":
        return Schedule(
            algo=algo,
            mode=mode,
            p=p,
            L=L,
            mu=mu,
            theta=theta,
            eta0=multiplier * scale / (divisors[0] * L),
        )
    return Schedule(
        algo=algo,
        mode=mode,
        p=p,
        L=L,
        mu=mu,
        theta=theta,
        beta=multiplier * scale / divisors[1],
    )


def step_size(sched: Schedule, t: int) -> float:
    """Step size at iteration ``t``.

    Constant mode returns ``eta0``. Decaying mode returns
    ``6 beta / (L + beta * mu * t)``, which starts at ``6 beta / L`` and
    decays like ``6 / (mu t)``.
    """
    if t < 0:
        raise ValueError(f"iteration index must be nonnegative, got {t}")
    if sched.mode == "constant":
        assert sched.eta0 is not None
        return sched.eta0
    assert sched.beta is not None
    return 6.0 * sched.beta / (sched.L + sched.beta * sched.mu * t)


@dataclass
class SsState:
    """Snapshot tracking state.

    ``x`` and ``s`` are the row-stacked iterates and trackers; ``q`` is the
    snapshot point and ``g_snap`` the stored gradient realization taken at
    ``q`` when the coin last fired (iteration ``tau``). The ``last_*`` fields
    describe the most recent transition for diagnostics.
    """

    x: np.ndarray
    s: np.ndarray
    q: np.ndarray
    g_snap: np.ndarray
    tau: int
    t: int
    last_eta: float = 0.0
    last_zeta: int = 0
    last_grad_mean: np.ndarray | None = None


@dataclass
class AssState:
    """Momentum-augmented snapshot tracking state.

    ``x_aug`` and ``s_aug`` stack the working block on top of the trailing
    block (``2m`` rows). The working iterate is ``x_aug[:m]``. Snapshot
    fields mirror :class:`SsState`.
    """

    x_aug: np.ndarray
    s_aug: np.ndarray
    q: np.ndarray
    g_snap: np.ndarray
    tau: int
    t: int
    last_eta: float = 0.0
    last_zeta: int = 0
    last_grad_mean: np.ndarray | None = None


@dataclass
class DsgtState:
    """Plain gradient-tracking state with the last sampled gradients."""

    x: np.ndarray
    s: np.ndarray
    g_prev: np.ndarray
    t: int
    last_eta: float = 0.0
    last_zeta: int = 0
    last_grad_mean: np.ndarray | None = None


AnyState = SsState | AssState | DsgtState


def _start_rows(problem: QuadraticProblem, x0: np.ndarray) -> np.ndarray:
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (problem.d,):
        raise ValueError(f"start point must have shape ({problem.d},), got {x0.shape}")
    return np.tile(x0, (problem.m, 1))


def init_state(
    problem: QuadraticProblem,
    x0: np.ndarray,
    algo: str,
    streams: StreamBundle | None = None,
) -> AnyState:
    """Build the iteration state at a shared start point.

    Every agent starts at ``x0``. Trackers and snapshot caches start from one
    stochastic gradient draw per agent at the start point (no draws happen
    when the problem is noiseless).

    Args:
        problem: Objective suite.
        x0: Shared start point of shape ``(d,)``.
        algo: One of :data:`ALGORITHMS`.
        streams: Random streams; required when the problem has gradient noise.

    Returns:
        The matching state object with ``t = 0``.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm tag '{algo}'")
    if problem.sigma_bar > 0.0 and streams is None:
        raise ValueError("noisy problems need a stream bundle")
    x = _start_rows(problem, x0)
    agent_rngs = streams.agents if streams is not None else ()
    g0 = stochastic_gradients(problem, x, agent_rngs)
    if algo == "ssdsgt":
        return SsState(x=x, s=g0.copy(), q=x.copy(), g_snap=g0.copy(), tau=0, t=0)
    if algo == "assdsgt":
        return AssState(
            x_aug=np.concatenate([x, x.copy()], axis=0),
            s_aug=np.concatenate([g0, g0.copy()], axis=0),
            q=x.copy(),
            g_snap=g0.copy(),
            tau=0,
            t=0,
        )
    return DsgtState(x=x, s=g0.copy(), g_prev=g0.copy(), t=0)


def _descent_arg(x: np.ndarray, s: np.ndarray, correction: np.ndarray, eta: float) -> np.ndarray:
    """Pre-mixing descent argument ``x - eta * (s + correction)``.

    Shared by the snapshot and momentum engines so that the momentum engine
    with zero momentum reproduces the snapshot engine bit for bit on its
    working block.
    """
    return x - eta * (s + correction)


def ssdsgt_step(
    state: SsState,
    problem: QuadraticProblem,
    w: MixingMatrix,
    sched: Schedule,
    streams: StreamBundle,
) -> SsState:
    """Advance the snapshot tracking iteration by one step.

    Order of operations: draw the shared coin, sample fresh gradients at the
    current iterate, take the corrected tracked descent step through the
    mixing matrix, then refresh the tracker (and, when the coin fired, move
    the snapshot to the pre-step iterate and store its gradient realization).
    """
    eta = step_size(sched, state.t)
    zeta = 1 if float(streams.coin.random()) < sched.p else 0
    g_x = stochastic_gradients(problem, state.x, streams.agents)
    correction = g_x - state.g_snap
    x_new = w.entries @ _descent_arg(state.x, state.s, correction, eta)
    mixed_s = w.entries @ state.s
    if zeta:
        s_new = mixed_s + correction
        q_new = state.x.copy()
        g_snap_new = g_x
        tau_new = state.t
    else:
        s_new = mixed_s
        q_new = state.q
        g_snap_new = state.g_snap
        tau_new = state.tau
    return SsState(
        x=x_new,
        s=s_new,
        q=q_new,
        g_snap=g_snap_new,
        tau=tau_new,
        t=state.t + 1,
        last_eta=eta,
        last_zeta=zeta,
        last_grad_mean=g_x.mean(axis=0),
    )


def assdsgt_step(
    state: AssState,
    problem: QuadraticProblem,
    aug: AugmentedMixing,
    sched: Schedule,
    streams: StreamBundle,
) -> AssState:
    """Advance the momentum-augmented snapshot iteration by one step.

    Identical to the snapshot iteration except that mixing happens through
    the augmented operator on the stacked blocks, with gradient corrections
    duplicated across both blocks. Fresh gradients are sampled at the working
    block ``x_aug[:m]``.
    """
    m = problem.m
    eta = step_size(sched, state.t)
    zeta = 1 if float(streams.coin.random()) < sched.p else 0
    g_x = stochastic_gradients(problem, state.x_aug[:m], streams.agents)
    correction = g_x - state.g_snap
    correction_aug = np.concatenate([correction, correction], axis=0)
    x_aug_new = aug.apply(_descent_arg(state.x_aug, state.s_aug, correction_aug, eta))
    mixed_s = aug.apply(state.s_aug)
    if zeta:
        s_aug_new = mixed_s + correction_aug
        q_new = state.x_aug[:m].copy()
        g_snap_new = g_x
        tau_new = state.t
    else:
        s_aug_new = mixed_s
        q_new = state.q
        g_snap_new = state.g_snap
        tau_new = state.tau
    return AssState(
        x_aug=x_aug_new,
        s_aug=s_aug_new,
        q=q_new,
        g_snap=g_snap_new,
        tau=tau_new,
        t=state.t + 1,
        last_eta=eta,
        last_zeta=zeta,
        last_grad_mean=g_x.mean(axis=0),
    )


def dsgt_step(
    state: DsgtState,
    problem: QuadraticProblem,
    w: MixingMatrix,
    sched: Schedule,
    streams: StreamBundle,
) -> DsgtState:
    """Advance the plain tracking iteration by one step.

    The iterate descends along the tracker through the mixing matrix, fresh
    gradients are sampled at the new iterate, and the tracker absorbs the
    gradient increment. With one agent and the identity matrix this is plain
    stochastic gradient descent.
    """
    eta = step_size(sched, state.t)
    grad_mean_before = state.g_prev.mean(axis=0)
    x_new = w.entries @ (state.x - eta * state.s)
    g_new = stochastic_gradients(problem, x_new, streams.agents)
    s_new = w.entries @ state.s + (g_new - state.g_prev)
    return DsgtState(
        x=x_new,
        s=s_new,
        g_prev=g_new,
        t=state.t + 1,
        last_eta=eta,
        last_zeta=0,
        last_grad_mean=grad_mean_before,
    )


def audit_identities(state: AnyState) -> list[tuple[str, float, float]]:
    """Raw self-check residuals for the tracking identities.

    Returns ``(name, error, scale)`` triples where ``error`` is the Euclidean
    size of the violated identity and ``scale`` the magnitude it should be
    compared against. Callers normalize against a running maximum of the
    scale so that late-run ratios stay meaningful after the quantities have
    converged toward zero.

    Checked identities:
        * snapshot tracking: column mean of the tracker equals the column
          mean of the stored snapshot gradients;
        * plain tracking: column mean of the tracker equals the column mean
          of the last sampled gradients;
        * momentum tracking: additionally, the two blocks of the stacked
          iterate and tracker keep equal column sums, and the mean of the
          full stacked tracker equals the snapshot gradient mean.
    """
    checks: list[tuple[str, float, float]] = []
    if isinstance(state, SsState):
        s_mean = state.s.mean(axis=0)
        g_mean = state.g_snap.mean(axis=0)
        checks.append(
            (
                "tracker_mean",
                float(np.linalg.norm(s_mean - g_mean)),
                max(float(np.linalg.norm(s_mean)), float(np.linalg.norm(g_mean))),
            )
        )
    elif isinstance(state, DsgtState):
        s_mean = state.s.mean(axis=0)
        g_mean = state.g_prev.mean(axis=0)
        checks.append(
            (
                "tracker_mean",
                float(np.linalg.norm(s_mean - g_mean)),
                max(float(np.linalg.norm(s_mean)), float(np.linalg.norm(g_mean))),
            )
        )
    elif isinstance(state, AssState):
        m = state.q.shape[0]
        for name, stack in (("block_sum_x", state.x_aug), ("block_sum_s", state.s_aug)):
            top = stack[:m].mean(axis=0)
            bottom = stack[m:].mean(axis=0)
            checks.append(
                (
                    name,
                    float(np.linalg.norm(top - bottom)),
                    max(float(np.linalg.norm(top)), float(np.linalg.norm(bottom))),
                )
            )
        s_mean = state.s_aug.mean(axis=0)
        g_mean = state.g_snap.mean(axis=0)
        checks.append(
            (
                "tracker_mean",
                float(np.linalg.norm(s_mean - g_mean)),
                max(float(np.linalg.norm(s_mean)), float(np.linalg.norm(g_mean))),
            )
        )
    else:
        raise TypeError(f"unknown state type {type(state)!r}")
    return checks
