"""Hanabi rules engine for 2 to 5 players.

The state is fully mutable and cheap to step; everything observation-related
lives in :mod:`sadrl.hanabi.encoding`.  Moves use a flat integer id space
fixed per player count: discards, plays, color hints, rank hints, in that
order.  Scoring follows the challenge convention: a successful play is +1,
losing the last life ends the episode with an extra penalty of minus the
accumulated score, so the undiscounted episode return always equals the
final reported score.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from ..core import RuleViolationError
from ..rng import RngStream

COLORS = "GBWYR"
NUM_COLORS = 5
NUM_RANKS = 5
# Copies of each rank per color: three 1s, one 5, two of everything else.
RANK_COUNTS = (3, 2, 2, 2, 1)
DECK_COUNTS = {
    (color, rank): RANK_COUNTS[rank - 1]
    for color in range(NUM_COLORS)
    for rank in range(1, NUM_RANKS + 1)
}
DECK_SIZE = 50
HAND_SIZES = {2: 5, 3: 5, 4: 4, 5: 4}
MAX_INFO_TOKENS = 8
MAX_LIFE_TOKENS = 3
MAX_SCORE = 25
MAX_STEPS = 80


@dataclass(frozen=True, slots=True)
class Card:
    color: int  # 0..4, indexes COLORS
    rank: int  # 1..5

    def __repr__(self) -> str:
        return f"{COLORS[self.color]}{self.rank}"


def full_deck() -> list[Card]:
    return [
        Card(color, rank)
        for color in range(NUM_COLORS)
        for rank in range(1, NUM_RANKS + 1)
        for _ in range(RANK_COUNTS[rank - 1])
    ]


class MoveKind:
    DISCARD = "DISCARD"
    PLAY = "PLAY"
    HINT_COLOR = "HINT_COLOR"
    HINT_RANK = "HINT_RANK"


@dataclass(frozen=True, slots=True)
class HanabiMove:
    """A decoded move; ``target_offset`` is relative to the acting player."""

    kind: str
    card_index: int | None = None
    target_offset: int | None = None
    color: int | None = None
    rank: int | None = None


def num_moves(players: int) -> int:
    """Size of the flat move-id space: 2·H slot moves plus 10 hints per teammate."""
    hand = HAND_SIZES[players]
    return 2 * hand + 10 * (players - 1)


def move_to_id(move: HanabiMove, players: int) -> int:
    hand = HAND_SIZES[players]
    if move.kind == MoveKind.DISCARD:
        return move.card_index
    if move.kind == MoveKind.PLAY:
        return hand + move.card_index
    if move.kind == MoveKind.HINT_COLOR:
        return 2 * hand + (move.target_offset - 1) * NUM_COLORS + move.color
    if move.kind == MoveKind.HINT_RANK:
        base = 2 * hand + (players - 1) * NUM_COLORS
        return base + (move.target_offset - 1) * NUM_RANKS + (move.rank - 1)
    raise ValueError(f"unknown move kind {move.kind!r}")


def id_to_move(move_id: int, players: int) -> HanabiMove:
    hand = HAND_SIZES[players]
    if not 0 <= move_id < num_moves(players):
        raise ValueError(f"move id {move_id} out of range for {players} players")
    if move_id < hand:
        return HanabiMove(MoveKind.DISCARD, card_index=move_id)
    if move_id < 2 * hand:
        return HanabiMove(MoveKind.PLAY, card_index=move_id - hand)
    offset = move_id - 2 * hand
    if offset < (players - 1) * NUM_COLORS:
        return HanabiMove(
            MoveKind.HINT_COLOR,
            target_offset=offset // NUM_COLORS + 1,
            color=offset % NUM_COLORS,
        )
    offset -= (players - 1) * NUM_COLORS
    return HanabiMove(
        MoveKind.HINT_RANK,
        target_offset=offset // NUM_RANKS + 1,
        rank=offset % NUM_RANKS + 1,
    )


@dataclass(slots=True)
class CardKnowledge:
    """What the owner has been told about one held card."""

    revealed_color: int | None = None
    revealed_rank: int | None = None
    negative_colors: set[int] = field(default_factory=set)
    negative_ranks: set[int] = field(default_factory=set)

    def touched(self) -> bool:
        return self.revealed_color is not None or self.revealed_rank is not None

    def admits(self, card: Card) -> bool:
        if self.revealed_color is not None and card.color != self.revealed_color:
            return False
        if self.revealed_rank is not None and card.rank != self.revealed_rank:
            return False
        return card.color not in self.negative_colors and (
            card.rank not in self.negative_ranks
        )


@dataclass
class HanabiState:
    num_players: int
    deck: list[Card]
    hands: list[list[Card]]
    knowledge: list[list[CardKnowledge]]
    fireworks: list[int] = field(default_factory=lambda: [0] * NUM_COLORS)
    info_tokens: int = MAX_INFO_TOKENS
    life_tokens: int = MAX_LIFE_TOKENS
    discards: list[Card] = field(default_factory=list)
    current_player: int = 0
    last_action: int | None = None
    turns_after_deck_empty: int = 0
    step_count: int = 0
    terminal: bool = False
    truncated: bool = False
    bombed: bool = False

    @property
    def score(self) -> int:
        return sum(self.fireworks)


def new_game(players: int, seed: int | RngStream) -> HanabiState:
    """Shuffle and deal; hand size is 5 for 2-3 players, 4 for 4-5."""
    if players not in HAND_SIZES:
        raise ValueError(f"players must be in [2, 5], got {players}")
    rng = seed if isinstance(seed, RngStream) else RngStream(seed)
    gen = rng.generator()
    deck = full_deck()
    order = gen.permutation(DECK_SIZE)
    deck = [deck[i] for i in order]
    hand_size = HAND_SIZES[players]
    hands = []
    for _ in range(players):
        hands.append([deck.pop() for _ in range(hand_size)])
    knowledge = [
        [CardKnowledge() for _ in hand] for hand in hands
    ]
    return HanabiState(
        num_players=players, deck=deck, hands=hands, knowledge=knowledge
    )


def legal_moves(state: HanabiState) -> list[bool]:
    """Boolean mask over the flat move-id space for the player to act."""
    if state.terminal:
        raise RuleViolationError("episode finished")
    players = state.num_players
    hand_size = HAND_SIZES[players]
    mask = [False] * num_moves(players)
    actor = state.current_player
    hand = state.hands[actor]
    for i in range(len(hand)):
        if state.info_tokens < MAX_INFO_TOKENS:
            mask[i] = True  # discard
        mask[hand_size + i] = True  # play
    if state.info_tokens > 0:
        for offset in range(1, players):
            target_hand = state.hands[(actor + offset) % players]
            colors = {card.color for card in target_hand}
            ranks = {card.rank for card in target_hand}
            for color in colors:
                mask[2 * hand_size + (offset - 1) * NUM_COLORS + color] = True
            base = 2 * hand_size + (players - 1) * NUM_COLORS
            for rank in ranks:
                mask[base + (offset - 1) * NUM_RANKS + (rank - 1)] = True
    return mask


def _draw(state: HanabiState, player: int) -> None:
    if state.deck:
        state.hands[player].append(state.deck.pop())
        state.knowledge[player].append(CardKnowledge())


def _apply_hint(state: HanabiState, actor: int, move: HanabiMove) -> None:
    target = (actor + move.target_offset) % state.num_players
    if target == actor:
        raise RuleViolationError("cannot hint yourself")
    hand = state.hands[target]
    knowledge = state.knowledge[target]
    if move.kind == MoveKind.HINT_COLOR:
        matches = [card.color == move.color for card in hand]
        if not any(matches):
            raise RuleViolationError("hint must match at least one card")
        for know, match in zip(knowledge, matches):
            if match:
                know.revealed_color = move.color
            else:
                know.negative_colors.add(move.color)
    else:
        matches = [card.rank == move.rank for card in hand]
        if not any(matches):
            raise RuleViolationError("hint must match at least one card")
        for know, match in zip(knowledge, matches):
            if match:
                know.revealed_rank = move.rank
            else:
                know.negative_ranks.add(move.rank)


def apply_move(
    state: HanabiState, move: HanabiMove | int
) -> tuple[HanabiState, float, bool]:
    """Apply a legal move in place; returns (state, reward, done).

    On bomb-out the final reward carries an extra penalty of minus the
    accumulated score, making the episode return equal the reported score
    (zero).  Hitting the step cap sets ``truncated`` with no penalty.
    """
    if state.terminal:
        raise RuleViolationError("episode finished")
    players = state.num_players
    if isinstance(move, int):
        move = id_to_move(move, players)
    actor = state.current_player
    mask = legal_moves(state)
    move_id = move_to_id(move, players)
    if not mask[move_id]:
        raise RuleViolationError(f"illegal move {move} (id {move_id})")

    deck_empty_at_start = not state.deck
    reward = 0.0

    if move.kind == MoveKind.PLAY:
        card = state.hands[actor].pop(move.card_index)
        state.knowledge[actor].pop(move.card_index)
        if card.rank == state.fireworks[card.color] + 1:
            state.fireworks[card.color] = card.rank
            reward = 1.0
            if card.rank == NUM_RANKS and state.info_tokens < MAX_INFO_TOKENS:
                state.info_tokens += 1
        else:
            state.life_tokens -= 1
            state.discards.append(card)
        _draw(state, actor)
    elif move.kind == MoveKind.DISCARD:
        card = state.hands[actor].pop(move.card_index)
        state.knowledge[actor].pop(move.card_index)
        state.discards.append(card)
        state.info_tokens += 1
        _draw(state, actor)
    else:
        _apply_hint(state, actor, move)
        state.info_tokens -= 1

    state.last_action = move_id
    state.step_count += 1
    if deck_empty_at_start:
        state.turns_after_deck_empty += 1

    done = False
    if state.life_tokens == 0:
        state.bombed = True
        reward -= state.score
        done = True
    elif state.score == MAX_SCORE:
        done = True
    elif state.turns_after_deck_empty >= players:
        done = True
    elif state.step_count >= MAX_STEPS:
        state.truncated = True
        done = True
    state.terminal = done
    if not done:
        state.current_player = (actor + 1) % players
    return state, reward, done


def final_score(state: HanabiState) -> int:
    """Reported score: zero after a bomb-out, else the firework total."""
    return 0 if state.bombed else state.score


def check_conservation(state: HanabiState) -> None:
    """Assert the 50-card multiset is intact across all zones."""
    counts: dict[tuple[int, int], int] = {key: 0 for key in DECK_COUNTS}
    for card in state.deck:
        counts[(card.color, card.rank)] += 1
    for hand in state.hands:
        for card in hand:
            counts[(card.color, card.rank)] += 1
    for card in state.discards:
        counts[(card.color, card.rank)] += 1
    for color in range(NUM_COLORS):
        for rank in range(1, state.fireworks[color] + 1):
            counts[(color, rank)] += 1
    if counts != DECK_COUNTS:
        missing = {k: (DECK_COUNTS[k] - v) for k, v in counts.items() if v != DECK_COUNTS[k]}
        raise AssertionError(f"card conservation violated: {missing}")


def state_fingerprint(state: HanabiState) -> str:
    """Stable digest of the complete state, for golden replay tests."""
    parts = [
        str(state.num_players),
        ",".join(repr(c) for c in state.deck),
        "|".join(",".join(repr(c) for c in hand) for hand in state.hands),
        "|".join(
            ",".join(
                f"{k.revealed_color}/{k.revealed_rank}/"
                f"{sorted(k.negative_colors)}/{sorted(k.negative_ranks)}"
                for k in hand
            )
            for hand in state.knowledge
        ),
        ",".join(map(str, state.fireworks)),
        str(state.info_tokens),
        str(state.life_tokens),
        ",".join(repr(c) for c in state.discards),
        str(state.current_player),
        str(state.last_action),
        str(state.turns_after_deck_empty),
        str(state.step_count),
        str(int(state.terminal)),
        str(int(state.truncated)),
        str(int(state.bombed)),
    ]
    return hashlib.sha256(";".join(parts).encode()).hexdigest()


def replay_game(
    seed: int, players: int, move_ids: list[int]
) -> tuple[HanabiState, list[float]]:
    """Rebuild a game from its seed and move list."""
    state = new_game(players, seed)
    rewards = []
    for move_id in move_ids:
        _, reward, _ = apply_move(state, move_id)
        rewards.append(reward)
    return state, rewards


def save_replay(path: str | Path, seed: int, players: int, move_ids: list[int]) -> None:
    lines = [f"seed {seed}", f"players {players}", "moves " + " ".join(map(str, move_ids))]
    Path(path).write_text("\n".join(lines) + "\n")


def load_replay(path: str | Path) -> tuple[int, int, list[int]]:
    fields = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition(" ")
        fields[key] = value
    seed = int(fields["seed"])
    players = int(fields["players"])
    moves = [int(tok) for tok in fields["moves"].split()] if fields["moves"].strip() else []
    return seed, players, moves
