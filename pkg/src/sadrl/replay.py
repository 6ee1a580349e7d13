"""Prioritized episodic replay.

Whole episodes are the storage unit.  Each episode carries a scalar priority
distilled from its per-step TD errors; sampling is proportional to priority
raised to a configurable exponent, with importance weights correcting the
induced bias.  A binary sum tree gives O(log n) updates and draws.

Thread contract: many actor threads append concurrently while one trainer
samples and updates priorities.  A single lock guards every mutation; episode
records are never mutated after being handed to :meth:`add`, so a sampled
reference is always a complete episode.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

DEFAULT_CAPACITY = 2 ** 17
DEFAULT_WARMUP = 10_000
PRIORITY_ETA = 0.9


class BufferWarmupError(RuntimeError):
    """Raised when sampling is attempted before the warm-up threshold."""


@dataclass
class EpisodeRecord:
    """One stored episode.

    Arrays are step-major.  ``obs`` and ``legal_mask`` carry one trailing row
    beyond the last transition: the observation after the final move, used to
    bootstrap n-step targets through truncation.  ``agent`` is ``None`` for a
    joint record (one per game) and an agent index for per-agent copies of
    the same game (independent learners store one copy each).
    """

    obs: np.ndarray          # (T+1, A, obs_dim) float32
    legal_mask: np.ndarray   # (T+1, A, num_actions) bool
    actor: np.ndarray        # (T+1,) acting agent at each step
    env_action: np.ndarray   # (T,) executed environment action
    broadcast: np.ndarray    # (T,) acting agent's greedy action (the extra input)
    greedy: np.ndarray       # (T, A) every agent's greedy action
    rewards: np.ndarray      # (T,) shared team reward
    aux: np.ndarray          # (T, A, hand_size) per-card status labels
    truncated: bool = False
    agent: int | None = None

    def __post_init__(self):
        steps = len(self.env_action)
        if steps == 0:
            raise ValueError("empty episode")
        if steps > 80:
            raise ValueError(f"episode length {steps} exceeds the 80-step cap")
        if self.obs.shape[0] != steps + 1 or self.legal_mask.shape[0] != steps + 1:
            raise ValueError("obs and legal_mask need one trailing bootstrap row")
        if len(self.actor) != steps + 1:
            raise ValueError("actor array needs one trailing bootstrap row")
        for name in ("broadcast", "rewards"):
            if len(getattr(self, name)) != steps:
                raise ValueError(f"{name} length differs from step count")
        if self.greedy.shape[0] != steps or self.aux.shape[0] != steps:
            raise ValueError("greedy/aux length differs from step count")

    def __len__(self) -> int:
        return len(self.env_action)

    @property
    def num_agents(self) -> int:
        return self.obs.shape[1]


def episode_priority(td_errors, eta: float = PRIORITY_ETA) -> float:
    """Distill per-step TD errors into one episode priority.

    delta_e = eta * max_t |delta_t| + (1 - eta) * mean_t |delta_t|.
    """
    deltas = np.abs(np.asarray(td_errors, dtype=np.float64))
    if deltas.size == 0:
        raise ValueError("episode priority needs at least one TD error")
    return float(eta * deltas.max() + (1.0 - eta) * deltas.mean())


class SumTree:
    """Fixed-size binary indexed sum tree over leaf priorities."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._nodes = np.zeros(2 * capacity, dtype=np.float64)

    def set(self, index: int, value: float) -> None:
        i = index + self.capacity
        self._nodes[i] = value
        i >>= 1
        while i >= 1:
            self._nodes[i] = self._nodes[2 * i] + self._nodes[2 * i + 1]
            i >>= 1

    def get(self, index: int) -> float:
        return float(self._nodes[index + self.capacity])

    def total(self) -> float:
        return float(self._nodes[1])

    def find_prefix(self, mass: float) -> int:
        """Smallest leaf index whose cumulative sum exceeds ``mass``."""
        i = 1
        while i < self.capacity:
            left = self._nodes[2 * i]
            if mass < left:
                i = 2 * i
            else:
                mass -= left
                i = 2 * i + 1
        return i - self.capacity


@dataclass
class ReplayMetrics:
    episodes_added: int = 0
    episodes_evicted: int = 0
    batches_sampled: int = 0
    priority_updates: int = 0


class PrioritizedEpisodeReplay:
    """FIFO ring of episodes with priority-proportional sampling."""

    def __init__(
        self,
        capacity: int = DEFAULT_CAPACITY,
        warmup: int = DEFAULT_WARMUP,
        priority_exponent: float = 0.9,
        is_exponent: float = 0.6,
        eta: float = PRIORITY_ETA,
        rng: RngStream | None = None,
    ):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if warmup < 1:
            raise ValueError("warmup must be positive")
        self.capacity = capacity
        self.warmup = min(warmup, capacity)
        self.priority_exponent = priority_exponent
        self.is_exponent = is_exponent
        self.eta = eta
        self.metrics = ReplayMetrics()
        self._gen = (rng or RngStream(0, 900)).generator()
        self._tree = SumTree(capacity)
        self._episodes: list[EpisodeRecord | None] = [None] * capacity
        self._raw_priority = np.zeros(capacity, dtype=np.float64)
        self._slot_ids = np.full(capacity, -1, dtype=np.int64)
        self._slot_of_id: dict[int, int] = {}
        self._next_id = 0
        self._write = 0
        self._size = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        with self._lock:
            return self._size

    @property
    def size(self) -> int:
        return len(self)

    def can_sample(self) -> bool:
        with self._lock:
            return self._size >= self.warmup

    def add(self, episode: EpisodeRecord, priority: float) -> int:
        """Store one episode; evicts the oldest at capacity. Returns its id."""
        if priority < 0 or not np.isfinite(priority):
            raise ValueError(f"priority must be finite and >= 0, got {priority}")
        with self._lock:
            slot = self._write
            old_id = self._slot_ids[slot]
            if old_id >= 0:
                del self._slot_of_id[old_id]
                self.metrics.episodes_evicted += 1
            episode_id = self._next_id
            self._next_id += 1
            self._episodes[slot] = episode
            self._raw_priority[slot] = priority
            self._slot_ids[slot] = episode_id
            self._slot_of_id[episode_id] = slot
            self._tree.set(slot, priority ** self.priority_exponent)
            self._write = (self._write + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)
            self.metrics.episodes_added += 1
            return episode_id

    def _retransform(self, exponent: float) -> None:
        # Exponent changed mid-run: rebuild every leaf (rare, O(n)).
        self.priority_exponent = exponent
        for slot in range(self._size):
            self._tree.set(slot, self._raw_priority[slot] ** exponent)

    def sample(
        self,
        batch: int,
        priority_exponent: float | None = None,
        is_exponent: float | None = None,
    ):
        """Draw ``batch`` episodes iid proportionally to transformed priority.

        Returns (episodes, importance weights normalized by the batch max,
        episode ids).
        """
        if batch < 1:
            raise ValueError("batch must be positive")
        beta = self.is_exponent if is_exponent is None else is_exponent
        with self._lock:
            if self._size < self.warmup:
                raise BufferWarmupError(
                    f"buffer holds {self._size} episodes; warm-up needs {self.warmup}"
                )
            if priority_exponent is not None and priority_exponent != self.priority_exponent:
                self._retransform(priority_exponent)
            total = self._tree.total()
            if total <= 0.0:
                raise ValueError("total priority is zero; nothing can be sampled")
            episodes, ids, probs = [], [], []
            for _ in range(batch):
                slot = self._tree.find_prefix(self._gen.random() * total)
                episodes.append(self._episodes[slot])
                ids.append(self._slot_ids[slot])
                probs.append(self._tree.get(slot) / total)
            size = self._size
            self.metrics.batches_sampled += 1
        weights = (1.0 / (size * np.asarray(probs))) ** beta
        weights /= weights.max()
        return episodes, weights, np.asarray(ids, dtype=np.int64)

    def update_priorities(self, ids, td_error_lists) -> None:
        """Recompute priorities for sampled episodes; stale ids are skipped."""
        if len(ids) != len(td_error_lists):
            raise ValueError("ids and TD error lists differ in length")
        with self._lock:
            for episode_id, deltas in zip(ids, td_error_lists):
                slot = self._slot_of_id.get(int(episode_id))
                if slot is None:
                    continue  # evicted between sample and update
                priority = episode_priority(deltas, self.eta)
                self._raw_priority[slot] = priority
                self._tree.set(slot, priority ** self.priority_exponent)
                self.metrics.priority_updates += 1

    def total_priority(self) -> float:
        with self._lock:
            return self._tree.total()

    def stored_priorities(self) -> np.ndarray:
        with self._lock:
            return self._raw_priority[: self._size].copy()
