from __future__ import annotations

import threading
from collections import Counter

import numpy as np
import pytest

from sadrl.replay import (
    BufferWarmupError,
    EpisodeRecord,
    PrioritizedEpisodeReplay,
    SumTree,
    episode_priority,
)
from sadrl.rng import RngStream


def _episode(steps=2, agents=1, obs_dim=3, actions=4, tag=0.0):
    return EpisodeRecord(
        obs=np.full((steps + 1, agents, obs_dim), tag, dtype=np.float32),
        legal_mask=np.ones((steps + 1, agents, actions), dtype=bool),
        actor=np.zeros(steps + 1, dtype=np.int8),
        env_action=np.zeros(steps, dtype=np.int16),
        broadcast=np.zeros(steps, dtype=np.int16),
        greedy=np.zeros((steps, agents), dtype=np.int16),
        rewards=np.full(steps, tag, dtype=np.float32),
        aux=np.zeros((steps, agents, 2), dtype=np.int8),
    )


def _buffer(**kwargs):
    kwargs.setdefault("capacity", 8)
    kwargs.setdefault("warmup", 2)
    kwargs.setdefault("rng", RngStream(0, 1))
    return PrioritizedEpisodeReplay(**kwargs)


def test_priority_formula_hand_cases():
    assert episode_priority([1, 3]) == pytest.approx(2.9, abs=1e-12)
    assert episode_priority([0, 0, 0]) == 0.0
    assert episode_priority([-2, 1]) == pytest.approx(0.9 * 2 + 0.1 * 1.5, abs=1e-12)
    with pytest.raises(ValueError):
        episode_priority([])


def test_episode_record_validation():
    with pytest.raises(ValueError, match="empty"):
        _episode(steps=0)
    with pytest.raises(ValueError, match="80"):
        _episode(steps=81)
    bad = dict(
        obs=np.zeros((2, 1, 3), dtype=np.float32),  # missing bootstrap row
        legal_mask=np.ones((3, 1, 4), dtype=bool),
        actor=np.zeros(3, dtype=np.int8),
        env_action=np.zeros(2, dtype=np.int16),
        broadcast=np.zeros(2, dtype=np.int16),
        greedy=np.zeros((2, 1), dtype=np.int16),
        rewards=np.zeros(2, dtype=np.float32),
        aux=np.zeros((2, 1, 2), dtype=np.int8),
    )
    with pytest.raises(ValueError, match="bootstrap"):
        EpisodeRecord(**bad)


def test_sum_tree_prefix_lookup():
    tree = SumTree(4)
    for i, p in enumerate([1.0, 2.0, 0.0, 3.0]):
        tree.set(i, p)
    assert tree.total() == 6.0
    assert tree.find_prefix(0.5) == 0
    assert tree.find_prefix(1.5) == 1
    assert tree.find_prefix(2.999) == 1
    assert tree.find_prefix(3.0) == 3  # zero-priority leaf is skipped
    assert tree.find_prefix(5.999) == 3


def test_fifo_eviction_order():
    buf = _buffer(capacity=4)
    ids = [buf.add(_episode(tag=i), priority=1.0) for i in range(6)]
    assert len(buf) == 4
    assert buf.metrics.episodes_evicted == 2
    episodes, _, sampled_ids = buf.sample(64)
    assert set(sampled_ids) <= set(ids[2:])  # the two oldest are gone
    tags = {float(ep.rewards[0]) for ep in episodes}
    assert tags <= {2.0, 3.0, 4.0, 5.0}


def test_warmup_gate():
    buf = _buffer(warmup=3)
    buf.add(_episode(), 1.0)
    assert not buf.can_sample()
    with pytest.raises(BufferWarmupError):
        buf.sample(1)
    buf.add(_episode(), 1.0)
    buf.add(_episode(), 1.0)
    assert buf.can_sample()
    buf.sample(1)


def test_zero_priority_never_sampled():
    buf = _buffer()
    buf.add(_episode(tag=0.0), priority=0.0)
    positive = buf.add(_episode(tag=1.0), priority=5.0)
    _, _, ids = buf.sample(200)
    assert set(ids) == {positive}


def test_uniform_priorities_give_unit_weights():
    buf = _buffer()
    for i in range(4):
        buf.add(_episode(tag=i), priority=2.5)
    _, weights, _ = buf.sample(32)
    assert np.allclose(weights, 1.0)


def test_sampling_ratio_matches_exponent():
    buf = _buffer(warmup=2)
    id1 = buf.add(_episode(tag=1.0), priority=1.0)
    id2 = buf.add(_episode(tag=2.0), priority=2.0)
    _, _, ids = buf.sample(20_000)
    counts = Counter(int(i) for i in ids)
    expected = 2.0 ** 0.9 / (1.0 + 2.0 ** 0.9)
    observed = counts[id2] / 20_000
    # 4 sigma band around the proportional-sampling probability.
    assert abs(observed - expected) < 4 * np.sqrt(expected * (1 - expected) / 20_000)
    assert counts[id1] > 0


def test_exponent_zero_is_uniform():
    buf = _buffer()
    buf.add(_episode(tag=1.0), priority=1.0)
    wide = buf.add(_episode(tag=2.0), priority=100.0)
    _, weights, ids = buf.sample(20_000, priority_exponent=0.0)
    observed = Counter(int(i) for i in ids)[wide] / 20_000
    assert abs(observed - 0.5) < 4 * np.sqrt(0.25 / 20_000)
    assert np.allclose(weights, 1.0)


def test_importance_weights_formula():
    buf = _buffer()
    id1 = buf.add(_episode(tag=1.0), priority=1.0)
    id2 = buf.add(_episode(tag=2.0), priority=2.0)
    _, weights, ids = buf.sample(64)
    total = 1.0 + 2.0 ** 0.9
    prob = {id1: 1.0 / total, id2: 2.0 ** 0.9 / total}
    raw = np.array([(1.0 / (2 * prob[int(i)])) ** 0.6 for i in ids])
    assert np.allclose(weights, raw / raw.max())
    assert weights.max() == 1.0


def test_update_priorities_changes_proportions():
    buf = _buffer()
    id1 = buf.add(_episode(tag=1.0), priority=1.0)
    id2 = buf.add(_episode(tag=2.0), priority=1.0)
    buf.update_priorities([id1], [[0.0, 0.0]])
    _, _, ids = buf.sample(500)
    assert set(ids) == {id2}
    # delta_t = [1, 3] -> 2.9; stored raw priority reflects the eta formula.
    buf.update_priorities([id1], [[1.0, 3.0]])
    stored = buf.stored_priorities()
    assert stored[0] == pytest.approx(2.9)


def test_stale_priority_update_is_noop():
    buf = _buffer(capacity=2)
    old = buf.add(_episode(), 1.0)
    buf.add(_episode(), 1.0)
    buf.add(_episode(), 1.0)  # evicts `old`
    before = buf.total_priority()
    buf.update_priorities([old], [[50.0]])
    assert buf.total_priority() == before
    with pytest.raises(ValueError):
        buf.update_priorities([1, 2], [[1.0]])


def test_add_rejects_bad_priorities():
    buf = _buffer()
    with pytest.raises(ValueError):
        buf.add(_episode(), -1.0)
    with pytest.raises(ValueError):
        buf.add(_episode(), float("nan"))


def test_sum_structure_consistency_under_churn():
    buf = _buffer(capacity=16, warmup=1)
    gen = RngStream(3).generator()
    ids = []
    for step in range(400):
        move = gen.random()
        if move < 0.5 or not ids:
            ids.append(buf.add(_episode(), float(gen.random() * 5)))
        else:
            victim = ids[int(gen.integers(len(ids)))]
            buf.update_priorities([victim], [gen.random(3) * 4])
        raw = buf.stored_priorities()
        assert abs(buf.total_priority() - np.sum(raw ** 0.9)) < 1e-6


def test_concurrent_writers_and_sampler():
    buf = PrioritizedEpisodeReplay(capacity=64, warmup=1, rng=RngStream(9))
    stop = threading.Event()
    errors: list[Exception] = []

    def writer(tag):
        try:
            for i in range(200):
                buf.add(_episode(tag=tag), priority=1.0 + (i % 3))
        except Exception as err:  # pragma: no cover - failure path
            errors.append(err)

    def sampler():
        try:
            while not stop.is_set():
                if buf.can_sample():
                    episodes, weights, _ = buf.sample(8)
                    for ep in episodes:
                        # A record is published atomically: its constant fill
                        # value must agree across fields.
                        assert float(ep.obs[0, 0, 0]) == float(ep.rewards[0])
                    assert np.isfinite(weights).all()
        except Exception as err:  # pragma: no cover - failure path
            errors.append(err)

    writers = [threading.Thread(target=writer, args=(float(t),)) for t in range(4)]
    reader = threading.Thread(target=sampler)
    reader.start()
    for t in writers:
        t.start()
    for t in writers:
        t.join()
    stop.set()
    reader.join()
    assert not errors
    assert len(buf) == 64
    assert buf.metrics.episodes_added == 800
