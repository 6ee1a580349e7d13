"""Shared turn-based multi-agent abstractions.

The two games in this package (the two-step signaling game and Hanabi) expose
the same contract: a fully cooperative, turn-based environment in which
exactly one agent holds the turn at every step, every agent receives the same
team reward, and each agent's observation is a deterministic function of the
Markov state that includes the last executed action.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .rng import RngStream

NOOP_ACTION = -1


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping or querying an environment whose episode is over."""


class RuleViolationError(ValueError):
    """Raised for an illegal move; the message names the violated rule."""


@dataclass(frozen=True)
class Action:
    """An environment action id, or the distinguished no-op taken off-turn."""

    id: int

    @property
    def is_noop(self) -> bool:
        return self.id == NOOP_ACTION


@dataclass
class AgentObservation:
    """Per-agent view of one step: features, legal actions, greedy-input slot.

    ``greedy_slot`` is the index of the previous acting agent's broadcast
    greedy action, or ``None`` at the start of an episode before anyone has
    acted.
    """

    features: np.ndarray
    legal_mask: np.ndarray
    greedy_slot: int | None = None


@dataclass
class Trajectory:
    """One episode as (observation snapshot refs, joint action, reward) steps."""

    steps: list[tuple[object, tuple[int, ...], float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def rewards(self) -> list[float]:
        return [r for _, _, r in self.steps]


class TurnBasedEnv(Protocol):
    """Contract satisfied by both games.

    Instances are single-threaded; distinct instances share no mutable state
    and may be driven from distinct threads.
    """

    num_players: int
    num_actions: int

    def reset(self, rng: RngStream) -> None: ...

    def current_player(self) -> int: ...

    def legal_mask(self) -> np.ndarray: ...

    def step(self, action: int) -> tuple[float, bool]: ...

    def observe(self, agent: int) -> AgentObservation: ...

    def is_terminal(self) -> bool: ...


def discounted_return(rewards: Sequence[float], gamma: float, t: int = 0) -> float:
    """Sum of rewards from step ``t`` on, discounted by ``gamma`` per step."""
    if len(rewards) == 0:
        raise ValueError("reward list is empty")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if not 0 <= t < len(rewards):
        raise ValueError(f"start index {t} out of range for {len(rewards)} rewards")
    total = 0.0
    # Summed in reverse (Horner form) so the result is exact for gamma == 1.
    for r in reversed(rewards[t:]):
        total = r + gamma * total
    return total
