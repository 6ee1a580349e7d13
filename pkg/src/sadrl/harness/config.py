"""Run configuration: one flat record covering environment, network, replay,
training, and runner knobs, serialized as JSON with CLI overrides on top.

Two presets exist: the paper-scale defaults (80 actor threads of 80
environments, 512-unit network, 2^17-episode buffer) and a desk-scale preset
sized so a complete smoke run fits in minutes on a workstation CPU.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from ..train import TrainConfig


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunnerConfig:
    players: int = 2
    mode: str = "vdn"
    sad: bool = True
    aux: bool = True

    actor_threads: int = 80
    envs_per_thread: int = 80
    base_epsilon: float = 0.1
    alpha: float = 7.0

    hidden: int = 512
    lr: float = 6.25e-5
    adam_eps: float = 1.5e-5

    replay_capacity: int = 2 ** 17
    replay_warmup: int = 10_000
    priority_exponent: float = 0.9
    is_exponent: float = 0.6
    batch_size: int | None = None

    gamma: float = 0.999
    n_step: int = 3
    target_sync_every: int = 2500
    actor_sync_every: int = 10
    aux_weight: float = 1.0
    # When actors and the trainer share cores, cap collection at this many
    # environment steps per completed update (None = collect flat out).
    steps_per_update: float | None = None

    eval_games: int = 1000
    eval_batch_games: int = 32
    eval_every_updates: int = 500
    checkpoint_every_updates: int = 2000
    log_every_updates: int = 10
    # Optional early stop: end the run once an evaluation reaches this mean.
    stop_when_eval_at_least: float | None = None

    max_updates: int | None = None
    max_seconds: float | None = None
    max_env_steps: int | None = None

    seed: int = 0
    out_dir: str = "runs/default"
    deterministic: bool = False
    debug_checksums: bool = False

    def __post_init__(self):
        if self.players not in (2, 3, 4, 5):
            raise ConfigError(f"players must be 2..5, got {self.players}")
        if self.mode not in ("iql", "vdn"):
            raise ConfigError(f"mode must be iql or vdn, got {self.mode!r}")
        if self.actor_threads < 1 or self.envs_per_thread < 1:
            raise ConfigError("actor_threads and envs_per_thread must be >= 1")
        if self.hidden < 1:
            raise ConfigError("hidden must be >= 1")
        if not 0.0 < self.base_epsilon < 1.0:
            raise ConfigError("base_epsilon must be in (0, 1)")
        if self.eval_games < 1 or self.eval_batch_games < 1:
            raise ConfigError("eval_games and eval_batch_games must be >= 1")
        if self.steps_per_update is not None and self.steps_per_update <= 0:
            raise ConfigError("steps_per_update must be positive when set")
        if self.max_updates is None and self.max_seconds is None and self.max_env_steps is None:
            raise ConfigError("set at least one of max_updates, max_seconds, max_env_steps")
        if self.deterministic and (self.actor_threads != 1 or self.envs_per_thread != 1):
            raise ConfigError("deterministic mode requires actor_threads=1 and envs_per_thread=1")
        try:
            self.train_config()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            mode=self.mode,
            sad=self.sad,
            aux=self.aux,
            gamma=self.gamma,
            n_step=self.n_step,
            target_sync_every=self.target_sync_every,
            actor_sync_every=self.actor_sync_every,
            aux_weight=self.aux_weight,
            batch_size=self.batch_size,
        )


# Desk-scale smoke preset: 4 threads of 16 environments, a narrower network,
# and a buffer/warm-up sized so learning starts within a minute or two.
DESK_OVERRIDES = {
    "actor_threads": 4,
    "envs_per_thread": 16,
    # With 4 threads the default schedule leaves almost no exploration;
    # a flatter exponent keeps the mid-threads off the greedy floor.
    "alpha": 2.0,
    "hidden": 128,
    "lr": 2.5e-4,
    "replay_capacity": 4096,
    "replay_warmup": 200,
    "batch_size": 8,
    "target_sync_every": 100,
    "steps_per_update": 500.0,
    "eval_games": 100,
    "eval_batch_games": 25,
    "eval_every_updates": 150,
    "checkpoint_every_updates": 1000,
}


def desk_config(**overrides) -> RunnerConfig:
    merged = dict(DESK_OVERRIDES)
    merged.update(overrides)
    if "max_updates" not in merged and "max_seconds" not in merged and "max_env_steps" not in merged:
        merged["max_seconds"] = 1800.0
    return RunnerConfig(**merged)


def save_config(cfg: RunnerConfig, path) -> None:
    Path(path).write_text(json.dumps(dataclasses.asdict(cfg), indent=1) + "\n")


def load_config(path, overrides: dict | None = None) -> RunnerConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in dataclasses.fields(RunnerConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if overrides:
        raw.update(overrides)
    try:
        return RunnerConfig(**raw)
    except TypeError as err:
        raise ConfigError(str(err)) from err
