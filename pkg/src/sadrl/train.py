"""Recurrent Q-learning on stored episodes.

Action selection (masked epsilon-greedy with the greedy action reported
separately), the extra-input wiring that feeds the previous actor's greedy
action to every agent at the next step, n-step double-Q targets in both
independent and joint value-decomposition modes, and the combined TD plus
auxiliary classification loss.

Conventions shared with the observation encoder: action ids are
``0..num_actions-1`` with the no-op as the last id, and the extra-input slot
is a ``num_actions + 1`` one-hot whose final position means "no previous
action".  During training the slot carries the side-channel greedy action;
during evaluation it is filled from the executed action every agent can
observe, which coincides with the greedy action once epsilon is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import autodiff as ad
from .nn.adam import Adam
from .nn.autodiff import Tensor, backward, zero_grad
from .nn.network import NetworkParams, RecurrentState, forward_sequence, forward_step, init_params
from .replay import EpisodeRecord, PrioritizedEpisodeReplay, episode_priority
from .rng import RngStream

MODES = ("iql", "vdn")

# Per-player-count batch sizes for the joint mode; the independent-learner
# mode uses one flat batch of per-agent episodes.
VDN_BATCH_SIZES = {2: 64, 3: 43, 4: 32, 5: 26}
IQL_BATCH_SIZE = 128


@dataclass
class TrainConfig:
    mode: str = "vdn"
    sad: bool = True
    aux: bool = True
    gamma: float = 0.999
    n_step: int = 3
    target_sync_every: int = 2500
    actor_sync_every: int = 10
    aux_weight: float = 1.0
    # Off by default: only the acting agent's greedy action is broadcast.
    # When on, the slot becomes a multi-hot over every agent's greedy action.
    broadcast_all: bool = False
    batch_size: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.n_step < 1:
            raise ValueError(f"n_step must be >= 1, got {self.n_step}")
        if self.aux_weight < 0:
            raise ValueError("aux_weight must be >= 0")
        if self.target_sync_every < 1 or self.actor_sync_every < 1:
            raise ValueError("sync cadences must be >= 1")

    def resolved_batch_size(self, players: int) -> int:
        if self.batch_size is not None:
            return self.batch_size
        if self.mode == "iql":
            return IQL_BATCH_SIZE
        return VDN_BATCH_SIZES[players]


@dataclass
class LossReport:
    """One update's losses plus per-episode TD errors for priority refresh."""

    td_loss: float
    aux_loss: float
    td_error_lists: list[np.ndarray]
    total: Tensor | None = None

    @property
    def total_value(self) -> float:
        return float(self.total.data) if self.total is not None else self.td_loss


def greedy_actions(q: np.ndarray, legal_mask: np.ndarray) -> np.ndarray:
    """Masked argmax along the last axis; ties resolve to the lowest id."""
    if not legal_mask.any(axis=-1).all():
        raise ValueError("an all-illegal mask has no greedy action")
    masked = np.where(legal_mask, q, -np.inf)
    return np.argmax(masked, axis=-1)


def act(params, network_input, legal_mask, state, epsilon, gen):
    """One agent, one step: returns (env_action, greedy_action, new state).

    A non-acting agent's mask contains only the no-op, so the same code path
    advances its recurrent state and returns the no-op for both actions.
    """
    q, new_state = forward_step(params, np.asarray(network_input)[None, :], state)
    mask = np.asarray(legal_mask, dtype=bool)
    greedy = int(greedy_actions(q[0][None, :], mask[None, :])[0])
    if epsilon > 0.0 and gen.random() < epsilon:
        legal_ids = np.flatnonzero(mask)
        env_action = int(legal_ids[gen.integers(len(legal_ids))])
    else:
        env_action = greedy
    return env_action, greedy, new_state


def act_batch(params, inputs, legal_mask, state, epsilons, gen):
    """Vectorized action selection over a batch of agent rows.

    ``epsilons`` is per row; rows belonging to one game should share one
    value.  Exploration draws happen in fixed row order so a seeded generator
    reproduces the run exactly.  Also returns the raw Q rows so collectors
    can estimate initial priorities without a second forward pass.
    """
    q, new_state = forward_step(params, inputs, state)
    mask = np.asarray(legal_mask, dtype=bool)
    greedy = greedy_actions(q, mask)
    env_actions = greedy.copy()
    explore = gen.random(len(greedy)) < np.asarray(epsilons)
    for row in np.flatnonzero(explore):
        legal_ids = np.flatnonzero(mask[row])
        env_actions[row] = legal_ids[gen.integers(len(legal_ids))]
    return env_actions, greedy, q, new_state


NO_PREVIOUS_ACTION = -1


def sad_slot_indices(record: EpisodeRecord, evaluation: bool = False) -> np.ndarray:
    """Extra-input slot index per step: the previous actor's action.

    Training fills the slot from the side channel (the recorded greedy
    action); evaluation fills it from the executed environment action.  Step
    zero has no previous action.
    """
    steps = len(record)
    source = record.env_action if evaluation else record.broadcast
    indices = np.empty(steps + 1, dtype=np.int64)
    indices[0] = NO_PREVIOUS_ACTION
    indices[1:] = source
    return indices


def slot_block(
    indices: np.ndarray,
    num_actions: int,
    greedy_all: np.ndarray | None = None,
) -> np.ndarray:
    """One-hot (or multi-hot) extra-input rows, NONE in the last position."""
    rows = np.zeros((len(indices), num_actions + 1), dtype=np.float32)
    for t, idx in enumerate(indices):
        if idx == NO_PREVIOUS_ACTION:
            rows[t, num_actions] = 1.0
        else:
            rows[t, idx] = 1.0
    if greedy_all is not None:
        for t in range(1, len(indices)):
            if indices[t] != NO_PREVIOUS_ACTION:
                rows[t, greedy_all[t - 1]] = 1.0
    return rows


def network_inputs(record: EpisodeRecord, cfg: TrainConfig, evaluation: bool = False) -> np.ndarray:
    """Concatenate base observations with the extra-input block per agent.

    With the extra channel disabled the slot is pinned to NONE, keeping the
    input width identical across ablations.
    """
    steps, agents = record.obs.shape[0], record.obs.shape[1]
    num_actions = record.legal_mask.shape[2]
    if cfg.sad:
        indices = sad_slot_indices(record, evaluation)
        greedy_all = record.greedy if cfg.broadcast_all else None
        block = slot_block(indices, num_actions, greedy_all)
    else:
        block = slot_block(np.full(steps, NO_PREVIOUS_ACTION, dtype=np.int64), num_actions)
    out = np.empty((steps, agents, record.obs.shape[2] + num_actions + 1), dtype=np.float32)
    out[:, :, : record.obs.shape[2]] = record.obs
    out[:, :, record.obs.shape[2] :] = block[:, None, :]
    return out


@dataclass
class BatchArrays:
    """Padded, row-major view of a batch of episodes.

    A "row" is one agent within one episode; joint-mode episodes contribute
    one row per agent, per-agent episodes contribute a single row.
    """

    inputs: np.ndarray        # (T+1, R, input_dim)
    legal: np.ndarray         # (T+1, R, num_actions)
    actions: np.ndarray       # (T, R) per-row executed action (noop off turn)
    is_actor: np.ndarray      # (T, R) bool
    valid: np.ndarray         # (T, R) bool, step within the row's episode
    rewards: np.ndarray       # (T, E) shared reward per episode
    lengths: np.ndarray       # (E,)
    truncated: np.ndarray     # (E,) bool
    aux_labels: np.ndarray    # (T, R, hand_size)
    row_episode: np.ndarray   # (R,) episode index of each row
    groups: list[np.ndarray]  # per episode, its row indices in fixed order

    @property
    def max_steps(self) -> int:
        return self.actions.shape[0]

    @property
    def num_rows(self) -> int:
        return self.actions.shape[1]

    @property
    def num_episodes(self) -> int:
        return len(self.lengths)


def prepare_batch(records: list[EpisodeRecord], cfg: TrainConfig) -> BatchArrays:
    if not records:
        raise ValueError("empty batch")
    num_actions = records[0].legal_mask.shape[2]
    input_dim = records[0].obs.shape[2] + num_actions + 1
    hand_size = records[0].aux.shape[2]
    noop = num_actions - 1
    t_max = max(len(r) for r in records)
    rows = sum(r.num_agents for r in records)
    episodes = len(records)

    inputs = np.zeros((t_max + 1, rows, input_dim), dtype=np.float32)
    legal = np.zeros((t_max + 1, rows, num_actions), dtype=bool)
    legal[:, :, noop] = True  # padding rows fall back to noop-only masks
    actions = np.full((t_max, rows), noop, dtype=np.int64)
    is_actor = np.zeros((t_max, rows), dtype=bool)
    valid = np.zeros((t_max, rows), dtype=bool)
    rewards = np.zeros((t_max, episodes), dtype=np.float64)
    lengths = np.zeros(episodes, dtype=np.int64)
    truncated = np.zeros(episodes, dtype=bool)
    aux_labels = np.zeros((t_max, rows, hand_size), dtype=np.int64)
    row_episode = np.zeros(rows, dtype=np.int64)
    groups = []

    row = 0
    for j, rec in enumerate(records):
        steps = len(rec)
        agents = rec.num_agents
        span = np.arange(row, row + agents)
        groups.append(span)
        row_episode[span] = j
        lengths[j] = steps
        truncated[j] = rec.truncated
        rewards[:steps, j] = rec.rewards
        block = network_inputs(rec, cfg)
        inputs[: steps + 1, span, :] = block
        legal[: steps + 1, span, :] = rec.legal_mask
        aux_labels[:steps, span, :] = rec.aux
        valid[:steps, span] = True
        for a in range(agents):
            # Per-agent records remember which seat they were recorded from.
            seat = rec.agent if rec.agent is not None else a
            acting = rec.actor[:steps] == seat
            is_actor[:steps, row + a] = acting
            actions[:steps, row + a][acting] = rec.env_action[acting]
        row += agents
    return BatchArrays(inputs, legal, actions, is_actor, valid, rewards,
                       lengths, truncated, aux_labels, row_episode, groups)


def _forward_untaped(params: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    steps, rows = inputs.shape[0], inputs.shape[1]
    q = np.empty((steps, rows, params.spec.num_actions), dtype=params.dtype)
    state = None
    for t in range(steps):
        q[t], state = forward_step(params, inputs[t], state)
    return q


def compute_targets(
    batch: BatchArrays,
    online: NetworkParams,
    target: NetworkParams,
    cfg: TrainConfig,
) -> np.ndarray:
    """n-step double-Q targets.

    Returns (T, R) per-row targets in independent mode and (T, E) per-episode
    targets in joint mode.  The argmax at the bootstrap step uses the online
    network over that agent's legal actions; the bootstrap value comes from
    the target network.  Episodes that ended terminally contribute no value
    beyond their last reward; truncated episodes bootstrap through the cut.
    """
    q_online = _forward_untaped(online, batch.inputs)
    q_target = _forward_untaped(target, batch.inputs)
    a_star = greedy_actions(q_online, batch.legal)
    boot = np.take_along_axis(q_target, a_star[..., None], axis=-1)[..., 0]

    t_max, episodes = batch.max_steps, batch.num_episodes
    gamma, n = cfg.gamma, cfg.n_step
    padded = np.vstack([batch.rewards, np.zeros((n, episodes))])
    discounts = gamma ** np.arange(n)
    returns = np.zeros((t_max, episodes))
    for t in range(t_max):
        returns[t] = discounts @ padded[t : t + n]

    steps = np.arange(t_max)[:, None]
    boot_step = np.minimum(steps + n, batch.lengths[None, :])     # (T, E)
    use_boot = (boot_step < batch.lengths[None, :]) | batch.truncated[None, :]
    boot_scale = np.where(use_boot, gamma ** (boot_step - steps), 0.0)

    if cfg.mode == "iql":
        y = np.zeros((t_max, batch.num_rows))
        for r in range(batch.num_rows):
            j = batch.row_episode[r]
            y[:, r] = returns[:, j] + boot_scale[:, j] * boot[boot_step[:, j], r]
        return y
    y = returns.copy()
    for j, span in enumerate(batch.groups):
        joint_boot = boot[:, span].sum(axis=1)  # fixed row order
        y[:, j] += boot_scale[:, j] * joint_boot[boot_step[:, j]]
    return y


def loss(
    batch: BatchArrays,
    params: NetworkParams,
    targets: np.ndarray,
    weights: np.ndarray,
    cfg: TrainConfig,
) -> LossReport:
    """Importance-weighted TD loss plus per-card auxiliary cross entropy.

    In independent mode only acting steps carry TD error (off-turn steps
    offer no action choice), though every step still advances the recurrence
    and contributes to the auxiliary loss.
    """
    t_max = batch.max_steps
    q_steps, aux_steps, _ = forward_sequence(params, batch.inputs[:t_max])
    weights = np.asarray(weights, dtype=np.float64)

    if cfg.mode == "iql":
        contrib = batch.valid & batch.is_actor          # (T, R)
        w_entry = weights[batch.row_episode]            # (R,)
    else:
        contrib = np.zeros((t_max, batch.num_episodes), dtype=bool)
        for j in range(batch.num_episodes):
            contrib[: batch.lengths[j], j] = True
        w_entry = weights
    count = max(int(contrib.sum()), 1)

    group_sum = np.zeros((batch.num_rows, batch.num_episodes), dtype=params.dtype)
    for j, span in enumerate(batch.groups):
        group_sum[span, j] = 1.0
    td_terms = None
    deltas = np.zeros(contrib.shape)
    for t in range(t_max):
        picked = ad.gather_last(q_steps[t], batch.actions[t])   # (R,)
        if cfg.mode == "vdn":
            picked = ad.matmul(picked, Tensor(group_sum))        # (E,)
        delta = ad.add(picked, Tensor(-targets[t]))
        deltas[t] = delta.data
        scale = (w_entry * contrib[t]) / count
        term = ad.reduce_sum(ad.mul(ad.mul(delta, delta), Tensor(scale)))
        td_terms = term if td_terms is None else ad.add(td_terms, term)
    td_loss = td_terms

    td_error_lists = []
    if cfg.mode == "iql":
        for j, span in enumerate(batch.groups):
            row_deltas = []
            for r in span:
                mask = contrib[:, r]
                row_deltas.append(deltas[mask, r])
            td_error_lists.append(np.concatenate(row_deltas))
    else:
        for j in range(batch.num_episodes):
            td_error_lists.append(deltas[: batch.lengths[j], j])

    if cfg.aux and cfg.aux_weight > 0 and aux_steps:
        hand = batch.aux_labels.shape[2]
        aux_terms = None
        valid_rows = batch.valid.astype(np.float64)
        aux_count = max(int(batch.valid.sum()) * hand, 1)
        for t in range(t_max):
            logits = ad.reshape(aux_steps[t], (batch.num_rows, hand, 3))
            log_p = ad.log_softmax(logits)
            picked = ad.gather_last(log_p, batch.aux_labels[t])  # (R, hand)
            scaled = ad.mul(picked, Tensor(valid_rows[t][:, None] / aux_count))
            term = ad.mul_scalar(ad.reduce_sum(scaled), -1.0)
            aux_terms = term if aux_terms is None else ad.add(aux_terms, term)
        aux_loss = aux_terms
        total = ad.add(td_loss, ad.mul_scalar(aux_loss, cfg.aux_weight))
        aux_value = float(aux_loss.data)
    else:
        total = td_loss
        aux_value = 0.0

    report = LossReport(
        td_loss=float(td_loss.data),
        aux_loss=aux_value,
        td_error_lists=td_error_lists,
        total=total,
    )
    if not np.isfinite(report.total_value):
        raise FloatingPointError("non-finite training loss")
    return report


class Learner:
    """Owns the online/target parameter pair and performs replay updates."""

    def __init__(
        self,
        spec,
        cfg: TrainConfig,
        replay: PrioritizedEpisodeReplay,
        rng: RngStream,
        players: int,
        lr: float = 6.25e-5,
        adam_eps: float = 1.5e-5,
        dtype=np.float32,
    ):
        self.cfg = cfg
        self.replay = replay
        self.players = players
        self.online = init_params(spec, rng, dtype=dtype)
        self.target = self.online.clone()
        self.opt = Adam(lr=lr, eps=adam_eps)
        self.updates = 0

    def snapshot(self) -> NetworkParams:
        """Immutable copy for actors; safe to read from any thread."""
        return self.online.clone(requires_grad=False)

    def train_step(self) -> LossReport:
        batch_size = self.cfg.resolved_batch_size(self.players)
        records, weights, ids = self.replay.sample(batch_size)
        batch = prepare_batch(records, self.cfg)
        targets = compute_targets(batch, self.online, self.target, self.cfg)
        report = loss(batch, self.online, targets, weights, self.cfg)
        zero_grad(self.online.tensors.values())
        backward(report.total)
        self.opt.step(self.online)
        self.replay.update_priorities(ids, report.td_error_lists)
        self.updates += 1
        if self.updates % self.cfg.target_sync_every == 0:
            self.target.load_from(self.online)
        return report
