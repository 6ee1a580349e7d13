"""Episode collection: blocks of environments stepped in lockstep.

One collector owns K games and advances all of them with a single batched
forward per step.  The network sees one row per (game, agent); the acting
agent's row carries the real legal-move mask while bystanders may only
no-op, so the same forward advances every recurrent state together.

Every agent's extra-input slot at step t is filled from the agent who acted
at t - 1: the broadcast greedy action while collecting training data, the
executed action during evaluation, NONE at the first step of a game.  With
the extra channel disabled the slot stays pinned to NONE.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..hanabi.encoding import (
    HanabiEnv,
    aux_targets,
    network_input_dim,
    num_actions as env_num_actions,
    obs_dim as env_obs_dim,
)
from ..hanabi.engine import HAND_SIZES, final_score
from ..nn import RecurrentState
from ..replay import EpisodeRecord
from ..rng import RngStream
from ..train import TrainConfig, act_batch

MAX_EPISODE_STEPS = 80


def actor_epsilons(num_threads: int, base: float = 0.1, alpha: float = 7.0) -> np.ndarray:
    """Per-thread exploration rates spread on a log scale.

    Thread i of N uses base ** (1 + alpha * i / (N - 1)); a single thread
    just uses the base rate.
    """
    if num_threads < 1:
        raise ValueError("num_threads must be >= 1")
    if num_threads == 1:
        return np.array([base], dtype=np.float64)
    i = np.arange(num_threads, dtype=np.float64)
    return base ** (1.0 + alpha * i / (num_threads - 1))


@dataclass
class CompletedEpisode:
    """One finished game plus the collector's own priority estimate."""

    records: list
    td_errors: np.ndarray
    score: int
    length: int
    truncated: bool


class EpisodeBuilder:
    """Accumulates one game's per-step arrays until it can emit records."""

    def __init__(self, players: int):
        self.players = players
        self.hand_size = HAND_SIZES[players]
        self._features = []
        self._legal = []
        self._actor = []
        self._env_action = []
        self._broadcast = []
        self._greedy = []
        self._rewards = []
        self._aux = []
        self._q_taken = []
        self._q_greedy = []

    def __len__(self) -> int:
        return len(self._env_action)

    def append(
        self,
        features: np.ndarray,
        legal: np.ndarray,
        actor: int,
        env_action: int,
        broadcast: int,
        greedy_row: np.ndarray,
        reward: float,
        aux_row: np.ndarray,
        q_taken: float,
        q_greedy: float,
    ) -> None:
        self._features.append(features)
        self._legal.append(legal)
        self._actor.append(actor)
        self._env_action.append(env_action)
        self._broadcast.append(broadcast)
        self._greedy.append(greedy_row)
        self._rewards.append(reward)
        self._aux.append(aux_row)
        self._q_taken.append(q_taken)
        self._q_greedy.append(q_greedy)

    def finalize(
        self,
        final_features: np.ndarray,
        final_legal: np.ndarray,
        final_actor: int,
        truncated: bool,
        score: int,
        gamma: float,
        per_agent: bool,
    ) -> CompletedEpisode:
        steps = len(self)
        obs = np.asarray(self._features + [final_features], dtype=np.float32)
        legal = np.asarray(self._legal + [final_legal], dtype=bool)
        actor = np.asarray(self._actor + [final_actor], dtype=np.int64)
        shared = dict(
            obs=obs,
            legal_mask=legal,
            actor=actor,
            env_action=np.asarray(self._env_action, dtype=np.int64),
            broadcast=np.asarray(self._broadcast, dtype=np.int64),
            greedy=np.asarray(self._greedy, dtype=np.int64),
            rewards=np.asarray(self._rewards, dtype=np.float32),
            aux=np.asarray(self._aux, dtype=np.int64),
            truncated=truncated,
        )
        if per_agent:
            # Per-agent copies share the underlying arrays; records are
            # immutable once stored, so aliasing is safe.
            records = [EpisodeRecord(agent=a, **shared) for a in range(self.players)]
        else:
            records = [EpisodeRecord(agent=None, **shared)]

        # One-step TD errors from the collector's own value estimates seed
        # the episode priority; the trainer replaces them after the first
        # sample, so the bootstrap for a truncated tail is simply dropped.
        taken = np.asarray(self._q_taken, dtype=np.float64)
        boot = np.zeros(steps, dtype=np.float64)
        if steps > 1:
            boot[:-1] = np.asarray(self._q_greedy[1:], dtype=np.float64)
        deltas = np.asarray(self._rewards, dtype=np.float64) + gamma * boot - taken
        return CompletedEpisode(
            records=records,
            td_errors=deltas,
            score=score,
            length=steps,
            truncated=truncated,
        )


class BatchedCollector:
    """K lockstep games sharing one recurrent batch and one epsilon.

    ``rng`` namespaces every stochastic choice: substream (0, k, episode)
    deals game ``episode`` of slot ``k`` and substream (1,) drives
    exploration, so a collector is reproducible given (params, seed).
    """

    def __init__(
        self,
        players: int,
        hidden: int,
        train_cfg: TrainConfig,
        num_envs: int,
        epsilon: float,
        rng: RngStream,
        evaluation: bool = False,
    ):
        self.players = players
        self.cfg = train_cfg
        self.num_envs = num_envs
        self.epsilon = float(epsilon)
        self.evaluation = evaluation
        self.num_actions = env_num_actions(players)
        self.obs_dim = env_obs_dim(players)
        self.input_dim = network_input_dim(players)
        self.hidden = hidden
        self._rng = rng
        self._gen = rng.substream(1).generator()
        self._rows = num_envs * players
        self._eps_rows = np.full(self._rows, self.epsilon, dtype=np.float64)
        self._state = RecurrentState.zeros(self._rows, hidden)
        self._none_slot = np.zeros(self.num_actions + 1, dtype=np.float32)
        self._none_slot[self.num_actions] = 1.0
        self.envs = [HanabiEnv(players) for _ in range(num_envs)]
        self._episode_index = [0] * num_envs
        self._builders = [EpisodeBuilder(players) for _ in range(num_envs)]
        self._slot = np.tile(self._none_slot, (num_envs, 1))
        self.env_steps = 0
        self.episodes = 0
        for k in range(num_envs):
            self._reset_env(k)

    def _reset_env(self, k: int) -> None:
        self.envs[k].reset(self._rng.substream(0, k, self._episode_index[k]))
        self._episode_index[k] += 1
        self._builders[k] = EpisodeBuilder(self.players)
        self._slot[k] = self._none_slot
        rows = slice(k * self.players, (k + 1) * self.players)
        for arr in (self._state.h1, self._state.c1, self._state.h2, self._state.c2):
            arr[rows] = 0.0

    def _slot_after(self, broadcast: int, executed: int, greedy_row: np.ndarray) -> np.ndarray:
        if not self.cfg.sad:
            return self._none_slot
        vec = np.zeros(self.num_actions + 1, dtype=np.float32)
        if self.evaluation:
            vec[executed] = 1.0
        else:
            vec[broadcast] = 1.0
            if self.cfg.broadcast_all:
                vec[greedy_row] = 1.0
        return vec

    def step(self, params) -> list[CompletedEpisode]:
        """Advance every game one step; returns games finished this step."""
        P = self.players
        inputs = np.empty((self._rows, self.input_dim), dtype=np.float32)
        legal = np.zeros((self._rows, self.num_actions), dtype=bool)
        feats = np.empty((self.num_envs, P, self.obs_dim), dtype=np.float32)
        aux = np.empty((self.num_envs, P, HAND_SIZES[P]), dtype=np.int64)
        actors = []
        for k, env in enumerate(self.envs):
            actors.append(env.current_player())
            for a in range(P):
                enc = env.observe(a)
                row = k * P + a
                feats[k, a] = enc.features
                legal[row] = enc.legal_mask
                inputs[row, : self.obs_dim] = enc.features
                inputs[row, self.obs_dim :] = self._slot[k]
                aux[k, a] = aux_targets(env.state, a)

        env_actions, greedy, q, self._state = act_batch(
            params, inputs, legal, self._state, self._eps_rows, self._gen
        )

        finished = []
        for k, env in enumerate(self.envs):
            actor = actors[k]
            row = k * P + actor
            action = int(env_actions[row])
            greedy_row = greedy[k * P : (k + 1) * P].astype(np.int64)
            reward, done = env.step(action)
            self.env_steps += 1
            self._builders[k].append(
                features=feats[k],
                legal=legal[k * P : (k + 1) * P],
                actor=actor,
                env_action=action,
                broadcast=int(greedy_row[actor]),
                greedy_row=greedy_row,
                reward=float(reward),
                aux_row=aux[k],
                q_taken=float(q[row, action]),
                q_greedy=float(q[row, greedy_row[actor]]),
            )
            self._slot[k] = self._slot_after(int(greedy_row[actor]), action, greedy_row)
            if done or len(self._builders[k]) >= MAX_EPISODE_STEPS:
                final_feats = np.empty((P, self.obs_dim), dtype=np.float32)
                final_legal = np.zeros((P, self.num_actions), dtype=bool)
                for a in range(P):
                    enc = env.observe(a)
                    final_feats[a] = enc.features
                    final_legal[a] = enc.legal_mask
                finished.append(
                    self._builders[k].finalize(
                        final_features=final_feats,
                        final_legal=final_legal,
                        final_actor=env.current_player(),
                        # A cap hit on a live game still needs a bootstrap.
                        truncated=env.state.truncated or not done,
                        score=final_score(env.state),
                        gamma=self.cfg.gamma,
                        per_agent=self.cfg.mode == "iql",
                    )
                )
                self.episodes += 1
                self._reset_env(k)
        return finished
