"""Threaded training loop: actor threads fill replay, one trainer consumes.

Concurrency model: N actor threads, one trainer thread, one evaluator
thread.  The only shared state is the replay buffer (episode-granular
appends), the snapshot board (atomic parameter publication), and a counter
block guarded by its own lock.  Shutdown is a cooperative stop event; no
lock is ever held across an environment step or a network forward.

A deterministic mode (one actor, one environment, everything inline on the
calling thread) exists so two runs of the same config produce bit-identical
logs; it trades throughput for reproducibility.
"""

from __future__ import annotations

import dataclasses
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..hanabi.encoding import ENCODER_VERSION, network_input_dim, num_actions
from ..hanabi.engine import HAND_SIZES
from ..nn import NetworkSpec, params_checksum, save_checkpoint
from ..replay import BufferWarmupError, PrioritizedEpisodeReplay, episode_priority
from ..rng import RngStream
from ..train import Learner
from .actors import BatchedCollector, actor_epsilons
from .config import RunnerConfig, save_config
from .evaluation import EvalResult, evaluate

LOG_HEADER = "update,td_loss,aux_loss,buffer_size,eval_score"


class SnapshotBoard:
    """Single-slot, last-writer-wins parameter publication point.

    Readers always see a complete snapshot: the slot swap happens under a
    lock and published parameter sets are never mutated afterwards.  In
    debug mode every snapshot carries its checksum and readers verify it.
    """

    def __init__(self, params, debug_checksums: bool = False):
        self._lock = threading.Lock()
        self._debug = debug_checksums
        self._params = None
        self._version = -1
        self._checksum = None
        self.publish(params, 0)

    def publish(self, params, version: int) -> None:
        checksum = params_checksum(params) if self._debug else None
        with self._lock:
            self._params = params
            self._version = version
            self._checksum = checksum

    def read(self):
        with self._lock:
            params, version, checksum = self._params, self._version, self._checksum
        if self._debug and params_checksum(params) != checksum:
            raise RuntimeError("torn parameter snapshot: checksum mismatch")
        return params, version


class _Counters:
    """Monotone run counters shared across threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self.env_steps = 0
        self.episodes = 0
        self.updates = 0

    def add_actor(self, env_steps: int, episodes: int) -> None:
        with self._lock:
            self.env_steps += env_steps
            self.episodes += episodes

    def set_updates(self, updates: int) -> None:
        with self._lock:
            self.updates = updates

    def read(self) -> tuple[int, int, int]:
        with self._lock:
            return self.env_steps, self.episodes, self.updates


@dataclass
class RunMetrics:
    """Counters, rates, and the evaluation history of one run."""

    env_steps: int = 0
    episodes: int = 0
    updates: int = 0
    wall_seconds: float = 0.0
    env_steps_per_sec: float = 0.0
    episodes_per_sec: float = 0.0
    updates_per_sec: float = 0.0
    last_td_loss: float = float("nan")
    last_aux_loss: float = float("nan")
    # Rows of (update, env_steps, mean, sem), in completion order.
    eval_history: list = field(default_factory=list)
    final_eval_mean: float = float("nan")
    final_eval_sem: float = float("nan")
    best_eval_mean: float = float("nan")
    stop_reason: str = ""

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class _EvalBook:
    """Evaluation results shared between evaluator and trainer threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self.rows = []

    def append(self, row) -> None:
        with self._lock:
            self.rows.append(row)

    def snapshot(self) -> list:
        with self._lock:
            return list(self.rows)


def _spec_for(cfg: RunnerConfig) -> NetworkSpec:
    return NetworkSpec(
        input_dim=network_input_dim(cfg.players),
        num_actions=num_actions(cfg.players),
        hand_size=HAND_SIZES[cfg.players],
        hidden=cfg.hidden,
        aux=cfg.aux,
    )


def _checkpoint_hyperparameters(cfg: RunnerConfig) -> dict:
    return {
        "players": cfg.players,
        "mode": cfg.mode,
        "sad": cfg.sad,
        "aux": cfg.aux,
        "hidden": cfg.hidden,
        "gamma": cfg.gamma,
        "n_step": cfg.n_step,
        "lr": cfg.lr,
        "seed": cfg.seed,
    }


class TrainingRun:
    """Owns every moving part of one run; ``run()`` blocks until done."""

    def __init__(self, cfg: RunnerConfig):
        self.cfg = cfg
        self.out_dir = Path(cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.rng = RngStream(cfg.seed)
        self.spec = _spec_for(cfg)
        self.replay = PrioritizedEpisodeReplay(
            capacity=cfg.replay_capacity,
            warmup=cfg.replay_warmup,
            priority_exponent=cfg.priority_exponent,
            is_exponent=cfg.is_exponent,
            rng=self.rng.substream(4),
        )
        self.learner = Learner(
            self.spec,
            cfg.train_config(),
            self.replay,
            self.rng.substream(5),
            players=cfg.players,
            lr=cfg.lr,
            adam_eps=cfg.adam_eps,
        )
        self.board = SnapshotBoard(self.learner.snapshot(), cfg.debug_checksums)
        self.counters = _Counters()
        self.evals = _EvalBook()
        self.stop = threading.Event()
        self.stop_reason = ""
        self.metrics = RunMetrics()
        self._log_path = self.out_dir / "training_log.csv"
        self._log_file = None
        self._logged_evals = 0
        self._errors = []
        self._eval_requests = queue.Queue()
        self._deadline = None

    # -- shared helpers -------------------------------------------------

    def _note_stop(self, reason: str) -> None:
        if not self.stop.is_set():
            self.stop_reason = reason
            self.stop.set()

    def _budget_exhausted(self) -> str | None:
        cfg = self.cfg
        env_steps, _, updates = self.counters.read()
        if self._deadline is not None and time.monotonic() >= self._deadline:
            return "max_seconds"
        if cfg.max_updates is not None and updates >= cfg.max_updates:
            return "max_updates"
        if cfg.max_env_steps is not None and env_steps >= cfg.max_env_steps:
            return "max_env_steps"
        return None

    def _make_collector(self, thread_index: int, epsilon: float) -> BatchedCollector:
        return BatchedCollector(
            players=self.cfg.players,
            hidden=self.cfg.hidden,
            train_cfg=self.cfg.train_config(),
            num_envs=self.cfg.envs_per_thread,
            epsilon=epsilon,
            rng=self.rng.substream(2, thread_index),
        )

    def _store_episodes(self, completed) -> None:
        for episode in completed:
            priority = episode_priority(episode.td_errors)
            for record in episode.records:
                self.replay.add(record, priority)

    def _run_eval(self, update: int, params) -> EvalResult:
        result = evaluate(
            params,
            self.cfg.players,
            self.cfg.train_config(),
            self.cfg.eval_games,
            self.rng.substream(3, update),
            batch_games=self.cfg.eval_batch_games,
        )
        env_steps, _, _ = self.counters.read()
        self.evals.append((update, env_steps, result.mean, result.sem))
        target = self.cfg.stop_when_eval_at_least
        if target is not None and result.mean >= target:
            self._note_stop("eval_target")
        return result

    def _log_row(self, update: int, td_loss: float, aux_loss: float) -> None:
        rows = self.evals.snapshot()
        eval_cell = ""
        if len(rows) > self._logged_evals:
            eval_cell = f"{rows[-1][2]:.4f}"
            self._logged_evals = len(rows)
        self._log_file.write(
            f"{update},{td_loss:.6f},{aux_loss:.6f},{len(self.replay)},{eval_cell}\n"
        )
        self._log_file.flush()

    def _save_checkpoint(self, stem_name: str) -> Path:
        stem = self.out_dir / stem_name
        save_checkpoint(
            stem,
            self.learner.snapshot(),
            ENCODER_VERSION,
            hyperparameters=_checkpoint_hyperparameters(self.cfg),
        )
        return stem

    def _after_update(self, report) -> None:
        """Bookkeeping shared by the threaded and inline trainer loops."""
        cfg = self.cfg
        updates = self.learner.updates
        self.counters.set_updates(updates)
        self.metrics.last_td_loss = float(report.td_loss)
        self.metrics.last_aux_loss = float(report.aux_loss)
        if updates % cfg.actor_sync_every == 0:
            self.board.publish(self.learner.snapshot(), updates)
        if updates % cfg.log_every_updates == 0:
            self._log_row(updates, float(report.td_loss), float(report.aux_loss))
        if updates % cfg.checkpoint_every_updates == 0:
            self._save_checkpoint(f"ckpt_{updates:07d}")

    # -- thread bodies --------------------------------------------------

    def _actor_body(self, thread_index: int, epsilon: float) -> None:
        collector = self._make_collector(thread_index, epsilon)
        ratio = self.cfg.steps_per_update
        while not self.stop.is_set():
            if ratio is not None:
                # Once the buffer is warm, collection yields the CPU to the
                # trainer whenever it is far enough ahead of the update count.
                env_steps, _, updates = self.counters.read()
                warm = len(self.replay) >= self.replay.warmup
                if warm and env_steps > ratio * max(updates, 1):
                    time.sleep(0.02)
                    continue
            params, _ = self.board.read()
            completed = collector.step(params)
            self._store_episodes(completed)
            self.counters.add_actor(collector.num_envs, len(completed))

    def _trainer_body(self) -> None:
        cfg = self.cfg
        while not self.stop.is_set():
            reason = self._budget_exhausted()
            if reason:
                self._note_stop(reason)
                return
            try:
                report = self.learner.train_step()
            except BufferWarmupError:
                time.sleep(0.02)
                continue
            self._after_update(report)
            if self.learner.updates % cfg.eval_every_updates == 0:
                self._eval_requests.put(self.learner.updates)

    def _evaluator_body(self) -> None:
        while not self.stop.is_set():
            try:
                update = self._eval_requests.get(timeout=0.1)
            except queue.Empty:
                continue
            # Collapse a backlog to the most recent request.
            try:
                while True:
                    update = self._eval_requests.get_nowait()
            except queue.Empty:
                pass
            params, _ = self.board.read()
            self._run_eval(update, params)

    def _guarded(self, name: str, fn, *args):
        def body():
            try:
                fn(*args)
            except Exception as err:  # noqa: BLE001 - reported after join
                self._errors.append((name, err))
                self._note_stop(f"error in {name}")

        return threading.Thread(target=body, name=name, daemon=True)

    # -- entry points ---------------------------------------------------

    def run(self) -> RunMetrics:
        cfg = self.cfg
        save_config(cfg, self.out_dir / "config.json")
        start = time.monotonic()
        if cfg.max_seconds is not None:
            self._deadline = start + cfg.max_seconds
        self._log_file = open(self._log_path, "w")
        self._log_file.write(LOG_HEADER + "\n")
        try:
            if cfg.deterministic:
                self._run_inline()
            else:
                self._run_threaded()
            if not self._errors:
                return self._finish(start)
        finally:
            self._log_file.close()
        name, err = self._errors[0]
        raise RuntimeError(f"{name} thread failed: {err!r}") from err

    def _run_threaded(self) -> None:
        cfg = self.cfg
        epsilons = actor_epsilons(cfg.actor_threads, cfg.base_epsilon, cfg.alpha)
        threads = [
            self._guarded(f"actor-{i}", self._actor_body, i, float(epsilons[i]))
            for i in range(cfg.actor_threads)
        ]
        threads.append(self._guarded("trainer", self._trainer_body))
        threads.append(self._guarded("evaluator", self._evaluator_body))
        for t in threads:
            t.start()
        while not self.stop.is_set():
            reason = self._budget_exhausted()
            if reason:
                self._note_stop(reason)
                break
            time.sleep(0.1)
        self.stop.set()
        for t in threads:
            t.join()

    def _run_inline(self) -> None:
        """Single-threaded interleave: one collector step, then train."""
        cfg = self.cfg
        collector = self._make_collector(0, cfg.base_epsilon)
        while not self.stop.is_set():
            reason = self._budget_exhausted()
            if reason:
                self._note_stop(reason)
                return
            params, _ = self.board.read()
            completed = collector.step(params)
            self._store_episodes(completed)
            self.counters.add_actor(collector.num_envs, len(completed))
            try:
                report = self.learner.train_step()
            except BufferWarmupError:
                continue
            self._after_update(report)
            if self.learner.updates % cfg.eval_every_updates == 0:
                params, _ = self.board.read()
                self._run_eval(self.learner.updates, params)

    def _finish(self, start: float) -> RunMetrics:
        m = self.metrics
        m.wall_seconds = time.monotonic() - start
        m.env_steps, m.episodes, m.updates = self.counters.read()
        if m.wall_seconds > 0:
            m.env_steps_per_sec = m.env_steps / m.wall_seconds
            m.episodes_per_sec = m.episodes / m.wall_seconds
            m.updates_per_sec = m.updates / m.wall_seconds
        m.stop_reason = self.stop_reason or "finished"

        # Always end with a final greedy evaluation of the last parameters,
        # and make sure the log carries at least one evaluation point.
        rows = self.evals.snapshot()
        if not rows or rows[-1][0] != m.updates:
            self._run_eval(m.updates, self.learner.snapshot())
        if len(self.evals.snapshot()) > self._logged_evals:
            self._log_row(m.updates, m.last_td_loss, m.last_aux_loss)
        m.eval_history = self.evals.snapshot()
        m.final_eval_mean = m.eval_history[-1][2]
        m.final_eval_sem = m.eval_history[-1][3]
        m.best_eval_mean = max(r[2] for r in m.eval_history)
        self._save_checkpoint("final")
        (self.out_dir / "summary.json").write_text(
            json.dumps(m.as_dict(), indent=1) + "\n"
        )
        return m


def run_training(cfg: RunnerConfig) -> RunMetrics:
    return TrainingRun(cfg).run()
