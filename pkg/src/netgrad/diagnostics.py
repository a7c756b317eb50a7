"""Per-iteration diagnostics: consensus errors, Lyapunov values, averages.

The quantities recorded here are the ones the convergence analysis of the
iterations is written in: squared consensus errors of the iterate and the
tracker, the squared distance between snapshot gradients and the gradients at
the minimizer, a weighted Lyapunov combination of the three, and the
suboptimality of the network-average iterate. Records carry everything needed
to audit a run offline from its trace file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algorithms import AnyState, AssState, DsgtState, SsState
from .objectives import QuadraticProblem, global_suboptimality
from .topology import MOMENTUM_ENVELOPE

__all__ = [
    "CSV_COLUMNS",
    "IterRecord",
    "WeightedAverager",
    "consensus_error",
    "snapshot_gradient_distance",
    "lyapunov_psi",
    "lyapunov_psi_tilde",
    "record_iteration",
]

#: Fixed column order of trace files.
CSV_COLUMNS: tuple[str, ...] = (
    "t",
    "eta",
    "zeta",
    "consensus_x",
    "consensus_s",
    "snap_grad_dist",
    "psi",
    "mean_dist",
    "subopt",
)


@dataclass(frozen=True)
class IterRecord:
    """Snapshot of one recorded iteration.

    All ``*_x``/``*_s``/``*_dist``/``psi`` fields are squared quantities and
    therefore nonnegative; ``subopt`` may carry a tiny negative floating
    point residue bounded by ``1e-12``. ``wavg_subopt`` is the running
    weighted-average suboptimality for noisy runs (not part of the trace CSV
    columns).
    """

    t: int
    eta: float
    zeta: int
    consensus_x: float
    consensus_s: float
    snap_grad_dist: float
    psi: float
    mean_dist: float
    subopt: float
    wavg_subopt: float | None = None

    def __post_init__(self) -> None:
        for name in ("consensus_x", "consensus_s", "snap_grad_dist", "psi", "mean_dist"):
            value = getattr(self, name)
            if value < 0.0:
                raise ValueError(f"{name} is a squared quantity but is {value}")
        if self.subopt < -1e-12:
            raise ValueError(f"suboptimality {self.subopt} below the -1e-12 floor")
        if self.zeta not in (0, 1):
            raise ValueError(f"zeta must be 0 or 1, got {self.zeta}")


def consensus_error(x: np.ndarray, blocks: int = 1) -> float:
    """Squared Frobenius distance of row-stacked states from their row mean.

    With ``blocks=2`` the input stacks two equally sized blocks and the
    deviation is measured blockwise: each block is centered on its own mean
    and the squared distances are summed.
    """
    x = np.asarray(x, dtype=np.float64)
    if blocks == 1:
        centered = x - x.mean(axis=0, keepdims=True)
        return float(np.sum(centered * centered))
    if blocks == 2:
        if x.shape[0] % 2 != 0:
            raise ValueError(f"two-block input needs an even row count, got {x.shape[0]}")
        half = x.shape[0] // 2
        return consensus_error(x[:half]) + consensus_error(x[half:])
    raise ValueError(f"blocks must be 1 or 2, got {blocks}")


def snapshot_gradient_distance(problem: QuadraticProblem, q: np.ndarray) -> float:
    """Squared distance between exact gradients at ``q`` and at the minimizer.

    Row ``i`` compares agent ``i`` at ``q[i]`` against agent ``i`` at the
    network minimizer; the linear terms cancel, leaving
    ``sum_i |Q_i (q_i - x*)|^2``.
    """
    q = np.asarray(q, dtype=np.float64)
    delta = q - problem.x_star
    rows = np.einsum("ijk,ik->ij", problem.quads, delta)
    return float(np.sum(rows * rows))


def lyapunov_psi(
    state: SsState,
    eta: float,
    theta: float,
    L: float,
    problem: QuadraticProblem,
) -> float:
    """Lyapunov combination for the snapshot iteration.

    ``|Px|^2 + (4 eta^2 / theta^2) |Ps|^2 +
    (2 eta / (L theta)) |grad at snapshot - grad at minimizer|^2``
    with exact gradients in the last term.
    """
    cx = consensus_error(state.x)
    cs = consensus_error(state.s)
    dist = snapshot_gradient_distance(problem, state.q)
    return cx + (4.0 * eta * eta / (theta * theta)) * cs + (2.0 * eta / (L * theta)) * dist


def lyapunov_psi_tilde(
    state: AssState,
    eta: float,
    theta_tilde: float,
    L: float,
    alpha: float,
    problem: QuadraticProblem,
) -> float:
    """Lyapunov combination for the momentum-augmented iteration.

    ``|P x_aug|^2 + (12 alpha eta^2 / theta_tilde^2) |P s_aug|^2 +
    (16 (1 + 8 alpha) eta^2 / theta_tilde^2) |grad at snapshot - grad at
    minimizer|^2`` where the projections act blockwise on the stacked state
    and ``alpha`` is the envelope constant of the augmented mixing chain.
    """
    cx = consensus_error(state.x_aug, blocks=2)
    cs = consensus_error(state.s_aug, blocks=2)
    dist = snapshot_gradient_distance(problem, state.q)
    tt2 = theta_tilde * theta_tilde
    return (
        cx
        + (12.0 * alpha * eta * eta / tt2) * cs
        + (16.0 * (1.0 + 8.0 * alpha) * eta * eta / tt2) * dist
    )


class WeightedAverager:
    """Streaming weighted average with exponentially growing weights.

    Iteration ``t`` with step size ``eta_t`` receives the weight
    ``w_t = (eta_t / eta_0) * exp((mu / 2) * sum_{i <= t} eta_i)``, pushed in
    iteration order. Both the weight total and the weighted value total are
    accumulated in log space relative to their running maximum term, so the
    average stays finite even after the raw weights overflow any float.

    Args:
        mu: Strong convexity modulus entering the weight growth.
        log_offset: Uniform shift applied to every log weight. The average is
            invariant to it.
    """

    def __init__(self, mu: float, log_offset: float = 0.0) -> None:
        if mu < 0.0:
            raise ValueError(f"mu must be nonnegative, got {mu}")
        self._mu = mu
        self._log_w = log_offset
        self._eta_prev: float | None = None
        self._count = 0
        self._wmax = -math.inf
        self._wsum = 0.0
        self._vmax = -math.inf
        self._vsum = 0.0

    @staticmethod
    def _accumulate(maximum: float, total: float, term: float) -> tuple[float, float]:
        if term <= maximum:
            return maximum, total + math.exp(term - maximum)
        if math.isinf(maximum):
            return term, 1.0
        return term, total * math.exp(maximum - term) + 1.0

    def push(self, eta: float, value: float) -> None:
        """Fold in one iteration's step size and suboptimality value.

        Values at or below zero (tiny negative floating point residues
        included) contribute zero mass to the weighted value total.
        """
        if eta <= 0.0:
            raise ValueError(f"step size must be positive, got {eta}")
        if self._eta_prev is None:
            self._log_w += 0.5 * self._mu * eta
        else:
            self._log_w += math.log(eta / self._eta_prev) + 0.5 * self._mu * eta
        self._eta_prev = eta
        self._count += 1
        self._wmax, self._wsum = self._accumulate(self._wmax, self._wsum, self._log_w)
        if value > 0.0:
            term = self._log_w + math.log(value)
            self._vmax, self._vsum = self._accumulate(self._vmax, self._vsum, term)

    @property
    def count(self) -> int:
        return self._count

    @property
    def average(self) -> float:
        """Current weighted average; zero when every pushed value was zero."""
        if self._count == 0:
            raise ValueError("no values pushed yet")
        if self._vsum == 0.0:
            return 0.0
        log_num = self._vmax + math.log(self._vsum)
        log_den = self._wmax + math.log(self._wsum)
        return math.exp(log_num - log_den)


def record_iteration(
    state: AnyState,
    problem: QuadraticProblem,
    eta: float,
    theta: float,
    alpha: float = MOMENTUM_ENVELOPE,
    wavg_subopt: float | None = None,
) -> IterRecord:
    """Assemble the diagnostic record for the current state.

    The suboptimality field is recomputed here from the problem and the
    network-average iterate, independent of whatever the driving loop tracks.
    For the plain tracking iteration, which keeps no snapshot, the snapshot
    slot of the gradient-distance and Lyapunov fields is filled with the
    current iterate and the snapshot-family weights.
    """
    if isinstance(state, SsState):
        xbar = state.x.mean(axis=0)
        cx = consensus_error(state.x)
        cs = consensus_error(state.s)
        dist = snapshot_gradient_distance(problem, state.q)
        psi = lyapunov_psi(state, eta, theta, problem.L, problem)
    elif isinstance(state, AssState):
        m = problem.m
        xbar = state.x_aug[:m].mean(axis=0)
        cx = consensus_error(state.x_aug, blocks=2)
        cs = consensus_error(state.s_aug, blocks=2)
        dist = snapshot_gradient_distance(problem, state.q)
        psi = lyapunov_psi_tilde(state, eta, theta, problem.L, alpha, problem)
    elif isinstance(state, DsgtState):
        xbar = state.x.mean(axis=0)
        cx = consensus_error(state.x)
        cs = consensus_error(state.s)
        dist = snapshot_gradient_distance(problem, state.x)
        psi = cx + (4.0 * eta * eta / (theta * theta)) * cs + (
            2.0 * eta / (problem.L * theta)
        ) * dist
    else:
        raise TypeError(f"unknown state type {type(state)!r}")
    delta = xbar - problem.x_star
    return IterRecord(
        t=state.t,
        eta=eta,
        zeta=state.last_zeta,
        consensus_x=cx,
        consensus_s=cs,
        snap_grad_dist=dist,
        psi=psi,
        mean_dist=float(delta @ delta),
        subopt=global_suboptimality(problem, xbar),
        wavg_subopt=wavg_subopt,
    )
