"""Observation encoding, V0 belief, and auxiliary-task labels.

The feature vector is a fixed-length float32 layout per player count,
documented by :func:`layout` and frozen under :data:`ENCODER_VERSION` so
checkpoints can refuse observations they were not trained on.  The greedy
action travels in a separate one-hot slot appended to the base features by
``network_input``; the action space seen by networks is the flat move-id
space plus one trailing no-op id.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .engine import (
    DECK_COUNTS,
    HAND_SIZES,
    NUM_COLORS,
    NUM_RANKS,
    RANK_COUNTS,
    MAX_INFO_TOKENS,
    MAX_LIFE_TOKENS,
    Card,
    HanabiState,
    apply_move,
    legal_moves,
    new_game,
    num_moves,
)

ENCODER_VERSION = "hanabi-obs-v1"

NUM_CARD_TYPES = NUM_COLORS * NUM_RANKS


class AuxClass(IntEnum):
    PLAYABLE = 0
    DISCARDABLE = 1
    UNKNOWN = 2


AUX_CLASSES = 3


def num_actions(players: int) -> int:
    """Flat move ids plus the trailing no-op id."""
    return num_moves(players) + 1


def noop_id(players: int) -> int:
    return num_moves(players)


def greedy_slot_size(players: int) -> int:
    # One entry per action (noop included) plus a NONE marker, used before
    # any greedy action has been broadcast.
    return num_actions(players) + 1


def layout(players: int) -> dict[str, tuple[int, int]]:
    """Block name -> (start, end) offsets into the base feature vector."""
    hand = HAND_SIZES[players]
    blocks = [
        ("visible_hands", (players - 1) * hand * NUM_CARD_TYPES),
        ("fireworks", NUM_COLORS * NUM_RANKS),
        ("info_tokens", MAX_INFO_TOKENS),
        ("life_tokens", MAX_LIFE_TOKENS),
        ("discards", NUM_CARD_TYPES),
        ("last_action", num_actions(players) + 1),
        ("actor", players),
        ("hinted", hand),
        ("v0_belief", hand * NUM_CARD_TYPES),
    ]
    offsets = {}
    cursor = 0
    for name, size in blocks:
        offsets[name] = (cursor, cursor + size)
        cursor += size
    return offsets


def obs_dim(players: int) -> int:
    """Base feature length; the greedy slot is appended on top of this."""
    return max(end for _, end in layout(players).values())


def network_input_dim(players: int) -> int:
    return obs_dim(players) + greedy_slot_size(players)


def _card_type(card: Card) -> int:
    return card.color * NUM_RANKS + (card.rank - 1)


def v0_belief(state: HanabiState, agent: int) -> np.ndarray:
    """Per-slot distribution over card types from public counts and hints.

    Remaining public count of a type = full deck count minus copies visible
    to ``agent`` elsewhere (teammate hands, discards, fireworks); the
    agent's own hand is hidden and deliberately not subtracted.  Each slot's
    counts are masked by hint consistency and normalized.  Rows for empty
    slots are all-zero.
    """
    hand = HAND_SIZES[state.num_players]
    remaining = np.zeros(NUM_CARD_TYPES)
    for (color, rank), count in DECK_COUNTS.items():
        remaining[color * NUM_RANKS + rank - 1] = count
    for player, player_hand in enumerate(state.hands):
        if player == agent:
            continue
        for card in player_hand:
            remaining[_card_type(card)] -= 1
    for card in state.discards:
        remaining[_card_type(card)] -= 1
    for color in range(NUM_COLORS):
        for rank in range(1, state.fireworks[color] + 1):
            remaining[color * NUM_RANKS + rank - 1] -= 1

    belief = np.zeros((hand, NUM_CARD_TYPES))
    for slot, knowledge in enumerate(state.knowledge[agent]):
        weights = remaining.copy()
        for color in range(NUM_COLORS):
            for rank in range(1, NUM_RANKS + 1):
                if not knowledge.admits(Card(color, rank)):
                    weights[color * NUM_RANKS + rank - 1] = 0.0
        total = weights.sum()
        if total > 0:
            belief[slot] = weights / total
    return belief


def aux_targets(state: HanabiState, agent: int) -> list[AuxClass]:
    """Ground-truth per-slot card status, padded with UNKNOWN for empty slots.

    A card is discardable when it can never be played: its rank is already
    on the firework, or some lower rank it still needs has every copy in
    the discard pile.
    """
    hand_size = HAND_SIZES[state.num_players]
    discarded: dict[tuple[int, int], int] = {}
    for card in state.discards:
        key = (card.color, card.rank)
        discarded[key] = discarded.get(key, 0) + 1

    targets = []
    for card in state.hands[agent]:
        top = state.fireworks[card.color]
        if card.rank == top + 1:
            targets.append(AuxClass.PLAYABLE)
            continue
        dead = card.rank <= top
        for need in range(top + 1, card.rank):
            if discarded.get((card.color, need), 0) == RANK_COUNTS[need - 1]:
                dead = True
                break
        targets.append(AuxClass.DISCARDABLE if dead else AuxClass.UNKNOWN)
    targets.extend([AuxClass.UNKNOWN] * (hand_size - len(targets)))
    return targets


def greedy_slot_onehot(players: int, greedy_action: int | None) -> np.ndarray:
    """One-hot over actions plus a trailing NONE position."""
    size = greedy_slot_size(players)
    onehot = np.zeros(size, dtype=np.float32)
    onehot[size - 1 if greedy_action is None else greedy_action] = 1.0
    return onehot


@dataclass
class EncodedObservation:
    """Fixed-layout features plus mask and the greedy-input slot."""

    features: np.ndarray  # base layout, float32
    legal_mask: np.ndarray  # bool over move ids + noop
    greedy_slot: np.ndarray  # one-hot, float32

    def network_input(self) -> np.ndarray:
        return np.concatenate([self.features, self.greedy_slot])


def encode(
    state: HanabiState, agent: int, greedy_action: int | None = None
) -> EncodedObservation:
    """Decentralized observation of ``state`` for ``agent``.

    Own cards never appear; the acting player gets the true legal-move mask
    while everyone else may only take the no-op.
    """
    players = state.num_players
    if not 0 <= agent < players:
        raise ValueError(f"agent {agent} out of range")
    hand_size = HAND_SIZES[players]
    blocks = layout(players)
    features = np.zeros(obs_dim(players), dtype=np.float32)

    start, _ = blocks["visible_hands"]
    for offset in range(1, players):
        other = (agent + offset) % players
        for slot, card in enumerate(state.hands[other]):
            index = start + ((offset - 1) * hand_size + slot) * NUM_CARD_TYPES
            features[index + _card_type(card)] = 1.0

    start, _ = blocks["fireworks"]
    for color in range(NUM_COLORS):
        top = state.fireworks[color]
        features[start + color * NUM_RANKS : start + color * NUM_RANKS + top] = 1.0

    start, _ = blocks["info_tokens"]
    features[start : start + state.info_tokens] = 1.0
    start, _ = blocks["life_tokens"]
    features[start : start + state.life_tokens] = 1.0

    start, _ = blocks["discards"]
    for card in state.discards:
        features[start + _card_type(card)] += 1.0
    for color in range(NUM_COLORS):
        for rank in range(1, NUM_RANKS + 1):
            index = start + color * NUM_RANKS + rank - 1
            features[index] /= RANK_COUNTS[rank - 1]

    start, _ = blocks["last_action"]
    if state.last_action is None:
        features[start + num_actions(players)] = 1.0
    else:
        features[start + state.last_action] = 1.0

    start, _ = blocks["actor"]
    if not state.terminal:
        features[start + (state.current_player - agent) % players] = 1.0

    start, _ = blocks["hinted"]
    for slot, knowledge in enumerate(state.knowledge[agent]):
        if knowledge.touched():
            features[start + slot] = 1.0

    start, _ = blocks["v0_belief"]
    features[start : start + hand_size * NUM_CARD_TYPES] = v0_belief(
        state, agent
    ).reshape(-1)

    mask = np.zeros(num_actions(players), dtype=bool)
    if not state.terminal and state.current_player == agent:
        mask[: num_moves(players)] = legal_moves(state)
    else:
        mask[noop_id(players)] = True

    return EncodedObservation(
        features=features,
        legal_mask=mask,
        greedy_slot=greedy_slot_onehot(players, greedy_action),
    )


class HanabiEnv:
    """Turn-based environment adapter over the rules engine."""

    def __init__(self, players: int = 2):
        self.num_players = players
        self.num_actions = num_actions(players)
        self.state: HanabiState | None = None

    def reset(self, rng) -> None:
        self.state = new_game(self.num_players, rng)

    def current_player(self) -> int:
        return self.state.current_player

    def is_terminal(self) -> bool:
        return self.state.terminal

    def legal_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[: num_moves(self.num_players)] = legal_moves(self.state)
        return mask

    def step(self, action: int) -> tuple[float, bool]:
        _, reward, done = apply_move(self.state, action)
        return reward, done

    def observe(self, agent: int, greedy_action: int | None = None) -> EncodedObservation:
        return encode(self.state, agent, greedy_action)
