from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from sadrl.core import RuleViolationError
from sadrl.hanabi import (
    DECK_COUNTS,
    HAND_SIZES,
    Card,
    HanabiMove,
    MoveKind,
    apply_move,
    check_conservation,
    final_score,
    full_deck,
    id_to_move,
    legal_moves,
    load_replay,
    move_to_id,
    new_game,
    num_moves,
    replay_game,
    save_replay,
    state_fingerprint,
)
from sadrl.rng import RngStream


def _random_playthrough(players, seed, check_every_move=False):
    state = new_game(players, RngStream(seed))
    gen = RngStream(seed, 1).generator()
    moves, rewards = [], []
    while not state.terminal:
        mask = legal_moves(state)
        legal = [i for i, ok in enumerate(mask) if ok]
        move = legal[int(gen.integers(len(legal)))]
        _, reward, _ = apply_move(state, move)
        moves.append(move)
        rewards.append(reward)
        if check_every_move:
            check_conservation(state)
    return state, moves, rewards


def test_full_deck_composition():
    deck = full_deck()
    assert len(deck) == 50
    counts = Counter((c.color, c.rank) for c in deck)
    assert dict(counts) == DECK_COUNTS
    per_color = Counter(c.color for c in deck)
    assert all(per_color[color] == 10 for color in range(5))


@pytest.mark.parametrize("players,expected_deck", [(2, 40), (3, 35), (4, 34), (5, 30)])
def test_deal_sizes(players, expected_deck):
    state = new_game(players, 7)
    assert len(state.deck) == expected_deck
    assert [len(h) for h in state.hands] == [HAND_SIZES[players]] * players
    assert state.info_tokens == 8
    assert state.life_tokens == 3
    assert state.fireworks == [0] * 5
    check_conservation(state)


def test_new_game_rejects_bad_player_count():
    with pytest.raises(ValueError):
        new_game(1, 0)
    with pytest.raises(ValueError):
        new_game(6, 0)


def test_same_seed_same_deal():
    a, b = new_game(3, 123), new_game(3, 123)
    assert a.hands == b.hands
    assert a.deck == b.deck
    assert state_fingerprint(a) == state_fingerprint(b)


@pytest.mark.parametrize("players", [2, 3, 4, 5])
def test_move_id_bijection(players):
    seen = set()
    for move_id in range(num_moves(players)):
        move = id_to_move(move_id, players)
        assert move_to_id(move, players) == move_id
        assert move not in seen
        seen.add(move)
    with pytest.raises(ValueError):
        id_to_move(num_moves(players), players)
    with pytest.raises(ValueError):
        id_to_move(-1, players)


def test_discard_illegal_at_full_tokens():
    state = new_game(2, 0)
    mask = legal_moves(state)
    hand = HAND_SIZES[2]
    assert not any(mask[:hand])  # discards
    assert all(mask[hand : 2 * hand])  # plays


def test_hints_illegal_without_tokens():
    state = new_game(2, 0)
    state.info_tokens = 0
    mask = legal_moves(state)
    hand = HAND_SIZES[2]
    assert not any(mask[2 * hand :])
    assert all(mask[:hand])  # discards legal again below 8 tokens


def test_hint_mask_requires_matching_card():
    state = new_game(2, 5)
    teammate = state.hands[1]
    mask = legal_moves(state)
    hand = HAND_SIZES[2]
    colors = {c.color for c in teammate}
    ranks = {c.rank for c in teammate}
    for color in range(5):
        assert mask[2 * hand + color] == (color in colors)
    for rank in range(1, 6):
        assert mask[2 * hand + 5 + rank - 1] == (rank in ranks)


def test_successful_play_scores_and_draws():
    state = new_game(2, 0)
    state.hands[0][0] = Card(0, 1)
    deck_before = len(state.deck)
    _, reward, done = apply_move(state, HanabiMove(MoveKind.PLAY, card_index=0))
    assert reward == 1.0
    assert not done
    assert state.fireworks[0] == 1
    assert state.score == 1
    assert len(state.hands[0]) == HAND_SIZES[2]
    assert len(state.deck) == deck_before - 1
    assert state.discards == []
    assert state.current_player == 1


def test_failed_play_costs_a_life():
    state = new_game(2, 0)
    state.hands[0][2] = Card(0, 3)
    _, reward, done = apply_move(state, HanabiMove(MoveKind.PLAY, card_index=2))
    assert reward == 0.0
    assert not done
    assert state.life_tokens == 2
    assert Card(0, 3) in state.discards


def test_completing_firework_regains_token():
    state = new_game(2, 0)
    state.fireworks[2] = 4
    state.info_tokens = 5
    state.hands[0][0] = Card(2, 5)
    apply_move(state, HanabiMove(MoveKind.PLAY, card_index=0))
    assert state.fireworks[2] == 5
    assert state.info_tokens == 6


def test_completing_firework_at_full_tokens_does_not_overflow():
    state = new_game(2, 0)
    state.fireworks[2] = 4
    state.hands[0][0] = Card(2, 5)
    apply_move(state, HanabiMove(MoveKind.PLAY, card_index=0))
    assert state.info_tokens == 8


def test_discard_returns_token():
    state = new_game(2, 0)
    state.info_tokens = 3
    discarded = state.hands[0][1]
    _, reward, _ = apply_move(state, HanabiMove(MoveKind.DISCARD, card_index=1))
    assert reward == 0.0
    assert state.info_tokens == 4
    assert discarded in state.discards


def test_hint_color_records_positive_and_negative_info():
    state = new_game(2, 0)
    state.hands[1] = [Card(0, 1), Card(1, 2), Card(0, 3), Card(2, 4), Card(3, 5)]
    state.knowledge[1] = [type(k)() for k in state.knowledge[1]]
    apply_move(state, HanabiMove(MoveKind.HINT_COLOR, target_offset=1, color=0))
    assert state.info_tokens == 7
    know = state.knowledge[1]
    assert know[0].revealed_color == 0
    assert know[2].revealed_color == 0
    for i in (1, 3, 4):
        assert know[i].revealed_color is None
        assert 0 in know[i].negative_colors


def test_hint_rank_records_positive_and_negative_info():
    state = new_game(2, 0)
    state.hands[1] = [Card(0, 1), Card(1, 2), Card(2, 1), Card(3, 4), Card(4, 5)]
    state.knowledge[1] = [type(k)() for k in state.knowledge[1]]
    apply_move(state, HanabiMove(MoveKind.HINT_RANK, target_offset=1, rank=1))
    know = state.knowledge[1]
    assert know[0].revealed_rank == 1
    assert know[2].revealed_rank == 1
    assert 1 in know[1].negative_ranks


def test_illegal_moves_raise():
    state = new_game(2, 0)
    with pytest.raises(RuleViolationError):
        apply_move(state, HanabiMove(MoveKind.DISCARD, card_index=0))  # 8 tokens
    state.info_tokens = 0
    with pytest.raises(RuleViolationError):
        apply_move(state, HanabiMove(MoveKind.HINT_COLOR, target_offset=1, color=0))


def test_terminal_state_rejects_everything():
    state = new_game(2, 0)
    state.terminal = True
    with pytest.raises(RuleViolationError):
        legal_moves(state)
    with pytest.raises(RuleViolationError):
        apply_move(state, 0)


def test_bomb_out_return_is_zero():
    state = new_game(2, 0)
    state.fireworks = [3, 2, 0, 0, 0]  # accumulated score 5
    state.life_tokens = 1
    state.hands[0][0] = Card(4, 5)  # unplayable
    _, reward, done = apply_move(state, HanabiMove(MoveKind.PLAY, card_index=0))
    assert done
    assert state.bombed
    assert reward == -5.0
    assert final_score(state) == 0
    assert state.score == 5  # firework piles themselves are untouched


def test_perfect_game_terminates_at_25():
    state = new_game(2, 0)
    state.fireworks = [5, 5, 5, 5, 4]
    state.hands[0][0] = Card(4, 5)
    _, reward, done = apply_move(state, HanabiMove(MoveKind.PLAY, card_index=0))
    assert done
    assert reward == 1.0
    assert state.score == 25
    assert final_score(state) == 25
    assert not state.bombed


def test_deck_exhaustion_gives_each_player_one_more_turn():
    state = new_game(2, 0)
    state.deck = [state.deck[0]]
    state.info_tokens = 4
    # Discard draws the last card; the drawer and the teammate each act once more.
    apply_move(state, HanabiMove(MoveKind.DISCARD, card_index=0))
    assert not state.terminal
    assert state.turns_after_deck_empty == 0
    _, _, done = apply_move(state, HanabiMove(MoveKind.DISCARD, card_index=0))
    assert not done
    assert state.turns_after_deck_empty == 1
    _, _, done = apply_move(state, HanabiMove(MoveKind.DISCARD, card_index=0))
    assert done
    assert state.turns_after_deck_empty == 2
    assert not state.truncated


def test_hand_shrinks_when_deck_is_empty():
    state = new_game(2, 0)
    state.deck = []
    state.info_tokens = 4
    apply_move(state, HanabiMove(MoveKind.DISCARD, card_index=0))
    assert len(state.hands[0]) == HAND_SIZES[2] - 1


def test_step_cap_truncates():
    state = new_game(2, 0)
    state.step_count = 79
    state.hands[0][0] = Card(0, 5)  # failed play, lives 3->2
    _, _, done = apply_move(state, HanabiMove(MoveKind.PLAY, card_index=0))
    assert done
    assert state.truncated
    assert not state.bombed


def test_replay_reproduces_fingerprint():
    final, moves, rewards = _random_playthrough(3, seed=42)
    replayed, replay_rewards = replay_game(42, 3, moves)
    assert state_fingerprint(replayed) == state_fingerprint(final)
    assert replay_rewards == rewards


def test_replay_file_roundtrip(tmp_path):
    _, moves, _ = _random_playthrough(2, seed=9)
    path = tmp_path / "game.replay"
    save_replay(path, 9, 2, moves)
    assert load_replay(path) == (9, 2, moves)


@pytest.mark.parametrize("players", [2, 3, 4, 5])
def test_fuzzed_games_preserve_invariants(players):
    """Compressed version of the acceptance fuzz: 150 games per count."""
    for seed in range(150):
        state, _, rewards = _random_playthrough(players, seed, check_every_move=True)
        assert sum(rewards) == final_score(state)
        assert 0 <= state.score <= 25
        assert 0 <= state.info_tokens <= 8
        assert 0 <= state.life_tokens <= 3


def test_fuzzed_tokens_never_out_of_bounds_mid_game():
    state = new_game(2, 77)
    gen = RngStream(77, 1).generator()
    while not state.terminal:
        legal = [i for i, ok in enumerate(legal_moves(state)) if ok]
        apply_move(state, legal[int(gen.integers(len(legal)))])
        assert 0 <= state.info_tokens <= 8
        assert 0 <= state.life_tokens <= 3
        assert all(0 <= f <= 5 for f in state.fireworks)
