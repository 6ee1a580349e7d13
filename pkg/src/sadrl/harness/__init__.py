"""Experiment harness: configs, collectors, the threaded runner, evaluation,
throughput measurement, and learning-curve aggregation."""

from .actors import BatchedCollector, CompletedEpisode, EpisodeBuilder, actor_epsilons
from .config import ConfigError, RunnerConfig, desk_config, load_config, save_config
from .curves import CurveError, aggregate_curves, emit_curves, read_eval_points
from .evaluation import (
    EvalResult,
    EvaluationError,
    evaluate,
    evaluate_checkpoint,
    random_baseline,
)
from .runner import RunMetrics, SnapshotBoard, TrainingRun, run_training
from .throughput import ThroughputReport, measure_steps_per_sec, measure_throughput

__all__ = [
    "BatchedCollector",
    "CompletedEpisode",
    "ConfigError",
    "CurveError",
    "EpisodeBuilder",
    "EvalResult",
    "EvaluationError",
    "RunMetrics",
    "RunnerConfig",
    "SnapshotBoard",
    "ThroughputReport",
    "TrainingRun",
    "actor_epsilons",
    "aggregate_curves",
    "desk_config",
    "emit_curves",
    "evaluate",
    "evaluate_checkpoint",
    "load_config",
    "measure_steps_per_sec",
    "measure_throughput",
    "random_baseline",
    "read_eval_points",
    "run_training",
    "save_config",
]
