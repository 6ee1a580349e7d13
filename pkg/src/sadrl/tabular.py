"""Tabular Q-learning on the signaling game, with and without the greedy-action channel.

Both players learn independent Q-tables.  Player 2's table is keyed by her
card and player 1's executed action; when the greedy channel is enabled the
key additionally carries player 1's greedy action, which stays clean while
the executed action is polluted by exploration.  At evaluation time epsilon
is zero, so the executed action itself fills the greedy slot and no extra
information flows between the players.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matrix_game import NUM_ACTIONS, NUM_CARDS, PayoffTensor, default_payoff
from .rng import RngStream

CURVE_HEADER = ("seed", "episode", "eval_return")


def greedy_action(q_row: list[float]) -> int:
    """Argmax with ties broken toward the lowest action id."""
    best, best_a = q_row[0], 0
    for a in range(1, len(q_row)):
        if q_row[a] > best:
            best, best_a = q_row[a], a
    return best_a


class QTable:
    """Action-value table over hashable information-state keys, zero-initialized."""

    def __init__(self, num_actions: int = NUM_ACTIONS):
        self.num_actions = num_actions
        self.values: dict[object, list[float]] = {}

    def row(self, key) -> list[float]:
        row = self.values.get(key)
        if row is None:
            row = [0.0] * self.num_actions
            self.values[key] = row
        return row

    def greedy(self, key) -> int:
        return greedy_action(self.row(key))

    def update(self, key, action: int, target: float, lr: float) -> None:
        row = self.row(key)
        row[action] += lr * (target - row[action])


@dataclass
class TabularConfig:
    learning_rate: float = 0.05
    epsilon: float = 0.1
    episodes: int = 50_000
    seeds: int = 100
    sad_enabled: bool = True
    # Exploration decays linearly to zero over this final fraction of episodes.
    decay_fraction: float = 0.1
    eval_every: int = 1000
    base_seed: int = 0
    payoff: PayoffTensor = field(default_factory=default_payoff)

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")

    def epsilon_at(self, episode: int) -> float:
        decay_start = int(self.episodes * (1.0 - self.decay_fraction))
        if self.episodes == 0 or episode < decay_start:
            return self.epsilon
        span = self.episodes - decay_start
        return self.epsilon * (self.episodes - episode) / span if span else 0.0


def _p2_key(card: int, executed: int, greedy_slot: int | None, sad: bool):
    # Without the channel the key deliberately has a different arity, so the
    # two ablations can never share table entries by accident.
    return (card, executed, greedy_slot) if sad else (card, executed)


def _play_episode(
    tables: tuple[QTable, QTable],
    cfg: TabularConfig,
    cards: tuple[int, int],
    coins: tuple[float, float],
    random_actions: tuple[int, int],
    epsilon: float,
) -> float:
    """One training episode with the randomness passed in explicitly."""
    q1, q2 = tables
    c1, c2 = cards

    g1 = q1.greedy(c1)
    u1 = random_actions[0] if coins[0] < epsilon else g1

    key2 = _p2_key(c2, u1, g1 if cfg.sad_enabled else None, cfg.sad_enabled)
    g2 = q2.greedy(key2)
    u2 = random_actions[1] if coins[1] < epsilon else g2

    reward = cfg.payoff.values[c1, c2, u1, u2]
    q1.update(c1, u1, reward, cfg.learning_rate)
    q2.update(key2, u2, reward, cfg.learning_rate)
    return float(reward)


def run_episode(
    tables: tuple[QTable, QTable], cfg: TabularConfig, rng: RngStream
) -> tuple[float, tuple[QTable, QTable]]:
    """Play and learn from one episode, drawing randomness from ``rng``."""
    gen = rng.generator()
    cards = tuple(int(c) for c in gen.integers(0, NUM_CARDS, size=2))
    coins = tuple(float(x) for x in gen.random(2))
    randoms = tuple(int(a) for a in gen.integers(0, NUM_ACTIONS, size=2))
    reward = _play_episode(tables, cfg, cards, coins, randoms, cfg.epsilon)
    return reward, tables


def evaluate(
    tables: tuple[QTable, QTable],
    sad_enabled: bool,
    payoff: PayoffTensor | None = None,
    slot_from_executed: bool = True,
) -> float:
    """Exact expected greedy return, enumerating all card pairs.

    ``slot_from_executed`` selects whether player 2's greedy slot is filled
    from the executed environment action (the decentralized deployment path)
    or from the side channel; with greedy play the two are identical, and
    tests assert that equality.
    """
    payoff = payoff if payoff is not None else default_payoff()
    q1, q2 = tables
    total = 0.0
    for c1 in range(NUM_CARDS):
        for c2 in range(NUM_CARDS):
            g1 = q1.greedy(c1)
            u1 = g1  # epsilon is zero at evaluation time
            slot = u1 if slot_from_executed else g1
            key2 = _p2_key(c2, u1, slot if sad_enabled else None, sad_enabled)
            u2 = q2.greedy(key2)
            total += payoff.values[c1, c2, u1, u2]
    return total / (NUM_CARDS * NUM_CARDS)


def train_seed(
    cfg: TabularConfig, rng: RngStream
) -> tuple[float, tuple[QTable, QTable], list[tuple[int, float]]]:
    """Train one seed; returns final evaluation, tables, and curve points."""
    tables = (QTable(), QTable())
    gen = rng.generator()
    # Randomness is drawn in one block per seed; the sequence is identical to
    # drawing per episode but far cheaper.
    cards = gen.integers(0, NUM_CARDS, size=(cfg.episodes, 2))
    coins = gen.random((cfg.episodes, 2))
    randoms = gen.integers(0, NUM_ACTIONS, size=(cfg.episodes, 2))

    curve: list[tuple[int, float]] = []
    for episode in range(cfg.episodes):
        _play_episode(
            tables,
            cfg,
            (int(cards[episode, 0]), int(cards[episode, 1])),
            (coins[episode, 0], coins[episode, 1]),
            (int(randoms[episode, 0]), int(randoms[episode, 1])),
            cfg.epsilon_at(episode),
        )
        if cfg.eval_every and (episode + 1) % cfg.eval_every == 0:
            curve.append(
                (episode + 1, evaluate(tables, cfg.sad_enabled, cfg.payoff))
            )
    final = evaluate(tables, cfg.sad_enabled, cfg.payoff)
    if not curve or curve[-1][0] != cfg.episodes:
        curve.append((cfg.episodes, final))
    return final, tables, curve


@dataclass
class ExperimentResult:
    mean: float
    sem: float
    per_seed: list[float]
    curve_rows: list[tuple[int, int, float]]  # (seed, episode, eval_return)

    def write_curve_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CURVE_HEADER)
            writer.writerows(self.curve_rows)


def experiment(cfg: TabularConfig) -> ExperimentResult:
    """Independent trainings across seeds, run on parallel threads.

    Each seed gets its own random stream; results do not depend on thread
    scheduling.
    """
    if cfg.seeds < 2:
        raise ValueError("need at least 2 seeds for a standard error")
    base = RngStream(cfg.base_seed)

    def one(seed_index: int):
        final, _, curve = train_seed(cfg, base.substream(seed_index))
        return seed_index, final, curve

    with ThreadPoolExecutor(max_workers=min(cfg.seeds, 8)) as pool:
        results = list(pool.map(one, range(cfg.seeds)))

    per_seed = [final for _, final, _ in results]
    curve_rows = [
        (seed, episode, value)
        for seed, _, curve in results
        for episode, value in curve
    ]
    values = np.array(per_seed)
    sem = float(values.std(ddof=1) / np.sqrt(len(values)))
    return ExperimentResult(float(values.mean()), sem, per_seed, curve_rows)
