"""Greedy evaluation and baselines.

Evaluation plays batches of games in lockstep with exploration off.  The
extra-input slot is normally filled from executed actions, which every agent
can see; passing ``side_channel=True`` fills it from broadcast greedy
actions instead.  With exploration off the executed action is the greedy
action, so both fillings must produce identical games.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hanabi.encoding import ENCODER_VERSION, network_input_dim
from ..hanabi.engine import MAX_SCORE, apply_move, final_score, legal_moves, new_game, num_moves
from ..nn import NetworkSpec, load_checkpoint
from ..rng import RngStream
from ..train import TrainConfig
from .actors import BatchedCollector


class EvaluationError(ValueError):
    """Bad evaluation request (no games, mismatched checkpoint)."""


@dataclass
class EvalResult:
    scores: np.ndarray
    mean: float
    sem: float
    win_rate: float
    histogram: np.ndarray  # counts for scores 0..25

    @staticmethod
    def from_scores(scores) -> "EvalResult":
        scores = np.asarray(scores, dtype=np.float64)
        if scores.size == 0:
            raise EvaluationError("evaluation needs at least one game")
        sem = 0.0
        if scores.size > 1:
            sem = float(scores.std(ddof=1) / np.sqrt(scores.size))
        histogram = np.bincount(scores.astype(np.int64), minlength=MAX_SCORE + 1)
        return EvalResult(
            scores=scores,
            mean=float(scores.mean()),
            sem=sem,
            win_rate=float((scores == MAX_SCORE).mean()),
            histogram=histogram,
        )


def evaluate(
    params,
    players: int,
    train_cfg: TrainConfig,
    games: int,
    rng: RngStream,
    batch_games: int = 32,
    side_channel: bool = False,
) -> EvalResult:
    """Play ``games`` greedy games and summarize the scores."""
    if games < 1:
        raise EvaluationError(f"games must be >= 1, got {games}")
    if params.spec.input_dim != network_input_dim(players):
        raise EvaluationError(
            f"network expects input width {params.spec.input_dim}, "
            f"a {players}-player game produces {network_input_dim(players)}"
        )
    collector = BatchedCollector(
        players=players,
        hidden=params.spec.hidden,
        train_cfg=train_cfg,
        num_envs=min(batch_games, games),
        epsilon=0.0,
        rng=rng,
        evaluation=not side_channel,
    )
    scores = []
    while len(scores) < games:
        for episode in collector.step(params):
            if len(scores) < games:
                scores.append(episode.score)
    return EvalResult.from_scores(scores)


def evaluate_checkpoint(stem, games: int, rng: RngStream, batch_games: int = 32) -> EvalResult:
    """Load a checkpoint and evaluate it with its own recorded settings."""
    if games < 1:
        raise EvaluationError(f"games must be >= 1, got {games}")
    params, manifest = load_checkpoint(stem, expected_encoder_version=ENCODER_VERSION)
    hp = manifest.get("hyperparameters", {})
    players = int(hp.get("players", 2))
    train_cfg = TrainConfig(
        mode=hp.get("mode", "vdn"),
        sad=bool(hp.get("sad", True)),
        aux=bool(hp.get("aux", True)),
    )
    return evaluate(params, players, train_cfg, games, rng, batch_games=batch_games)


def random_baseline(players: int, games: int, rng: RngStream) -> EvalResult:
    """Uniform-over-legal-moves policy, the floor any agent must beat."""
    if games < 1:
        raise EvaluationError(f"games must be >= 1, got {games}")
    scores = np.empty(games, dtype=np.int64)
    moves = num_moves(players)
    for g in range(games):
        state = new_game(players, rng.substream(0, g))
        gen = rng.substream(1, g).generator()
        done = False
        while not done:
            legal = np.flatnonzero(np.asarray(legal_moves(state), dtype=bool)[:moves])
            move = int(legal[gen.integers(len(legal))])
            _, _, done = apply_move(state, move)
        scores[g] = final_score(state)
    return EvalResult.from_scores(scores)
