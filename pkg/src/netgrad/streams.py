"""Deterministic random stream plumbing for simulator runs.

One run seed fans out into independent counter-based streams: a coin stream
for the global snapshot draws, a gossip stream for random edge selection, and
one gradient-noise stream per agent. Keeping the purposes separated means a
feature that stops drawing (for example a noiseless run) never shifts the
draws of an unrelated feature, and single- versus multi-threaded drivers see
identical sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["StreamBundle"]


def _generator(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class StreamBundle:
    """Independent random streams for one simulator run.

    Attributes:
        coin: Stream for the shared snapshot coin, one uniform per iteration.
        gossip: Stream for random edge selection.
        agents: One gradient-noise stream per agent, in agent order.
    """

    coin: np.random.Generator
    gossip: np.random.Generator
    agents: tuple[np.random.Generator, ...]

    @classmethod
    def from_seed(cls, seed: int, m: int) -> "StreamBundle":
        """Fan a single integer seed out into the per-purpose streams."""
        root = np.random.SeedSequence(seed)
        coin_seq, gossip_seq, agents_parent = root.spawn(3)
        agent_seqs = agents_parent.spawn(m)
        return cls(
            coin=_generator(coin_seq),
            gossip=_generator(gossip_seq),
            agents=tuple(_generator(s) for s in agent_seqs),
        )
