"""Throughput measurement: batched lockstep stepping versus one-at-a-time.

Stepping K games per forward amortizes the fixed per-call cost of the
network and the Python loop over a K-fold larger matrix multiply, which is
where the batched-actor architecture earns its keep.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

from ..hanabi.encoding import network_input_dim, num_actions
from ..hanabi.engine import HAND_SIZES
from ..nn import NetworkSpec, init_params
from ..rng import RngStream
from ..train import TrainConfig
from .actors import BatchedCollector


@dataclass
class ThroughputReport:
    batched_envs: int
    single_envs: int
    batched_steps_per_sec: float
    single_steps_per_sec: float
    ratio: float
    hardware_threads: int


def measure_steps_per_sec(
    players: int,
    hidden: int,
    num_envs: int,
    seconds: float,
    seed: int = 0,
    warmup_steps: int = 5,
) -> float:
    spec = NetworkSpec(
        input_dim=network_input_dim(players),
        num_actions=num_actions(players),
        hand_size=HAND_SIZES[players],
        hidden=hidden,
    )
    rng = RngStream(seed, 7000)
    params = init_params(spec, rng.substream(0))
    collector = BatchedCollector(
        players=players,
        hidden=hidden,
        train_cfg=TrainConfig(),
        num_envs=num_envs,
        epsilon=0.1,
        rng=rng.substream(1),
    )
    for _ in range(warmup_steps):
        collector.step(params)
    counted_from = collector.env_steps
    start = time.perf_counter()
    while time.perf_counter() - start < seconds:
        collector.step(params)
    elapsed = time.perf_counter() - start
    return (collector.env_steps - counted_from) / elapsed


def measure_throughput(
    players: int = 2,
    hidden: int = 256,
    batched_envs: int = 16,
    single_envs: int = 1,
    seconds: float = 3.0,
    seed: int = 0,
) -> ThroughputReport:
    batched = measure_steps_per_sec(players, hidden, batched_envs, seconds, seed)
    single = measure_steps_per_sec(players, hidden, single_envs, seconds, seed)
    return ThroughputReport(
        batched_envs=batched_envs,
        single_envs=single_envs,
        batched_steps_per_sec=batched,
        single_steps_per_sec=single,
        ratio=batched / single,
        hardware_threads=os.cpu_count() or 1,
    )
