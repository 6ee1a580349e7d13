from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sadrl.belief import (
    BeliefDistribution,
    EpsGreedyPolicy,
    ImpossibleEvidenceError,
    bayes_update,
    blur_report,
    epsilon_sweep,
    sad_update,
)


def _random_instance(gen, n_actions=3):
    """A random prior over 2..6 integer histories plus a random greedy map."""
    size = int(gen.integers(2, 7))
    support = tuple(range(size))
    weights = gen.uniform(0.05, 1.0, size=size)
    prior = BeliefDistribution.from_weights(support, weights)
    greedy = {h: int(gen.integers(n_actions)) for h in support}
    return prior, greedy


def test_distribution_validation():
    with pytest.raises(ValueError, match="distinct"):
        BeliefDistribution(("a", "a"), np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="nonnegative"):
        BeliefDistribution(("a", "b"), np.array([1.5, -0.5]))
    with pytest.raises(ValueError, match="sum"):
        BeliefDistribution(("a", "b"), np.array([0.6, 0.6]))
    with pytest.raises(ValueError, match="lengths"):
        BeliefDistribution(("a", "b"), np.array([1.0]))


def test_uniform_and_prob_lookup():
    d = BeliefDistribution.uniform(["x", "y", "z", "w"])
    assert d.prob("z") == 0.25


def test_total_variation():
    a = BeliefDistribution(("h1", "h2"), np.array([1.0, 0.0]))
    b = BeliefDistribution(("h1", "h2"), np.array([0.0, 1.0]))
    assert a.total_variation(b) == 1.0
    assert a.total_variation(a) == 0.0
    with pytest.raises(ValueError):
        a.total_variation(BeliefDistribution(("h2", "h1"), np.array([0.0, 1.0])))


def test_policy_probabilities_sum_to_one():
    policy = EpsGreedyPolicy({0: 2}, epsilon=0.3, action_count=4)
    probs = [policy.action_prob(u, 0) for u in range(4)]
    assert sum(probs) == pytest.approx(1.0, abs=1e-15)
    assert probs[2] == pytest.approx(0.7 + 0.075)


def test_epsilon_one_posterior_collapses_to_prior():
    """Fully random behavior carries no information about the history."""
    gen = np.random.default_rng(11)
    for _ in range(100):
        prior, greedy = _random_instance(gen)
        policy = EpsGreedyPolicy(greedy, epsilon=1.0, action_count=3)
        for u in range(3):
            post = bayes_update(prior, policy, u)
            assert np.all(np.abs(post.probs - prior.probs) <= 1e-12)
            blurred, mass = blur_report(prior, policy, u)
            assert np.all(np.abs(blurred.probs - prior.probs) <= 1e-12)
            assert mass == pytest.approx(1.0, abs=1e-12)


def test_epsilon_zero_bayes_equals_greedy_filter():
    """At zero exploration conditioning on the executed action is filtering."""
    gen = np.random.default_rng(12)
    checked = 0
    for _ in range(1500):
        prior, greedy = _random_instance(gen)
        policy = EpsGreedyPolicy(greedy, epsilon=0.0, action_count=3)
        u = int(gen.integers(3))
        if not any(greedy[h] == u for h in prior.support):
            with pytest.raises(ImpossibleEvidenceError):
                bayes_update(prior, policy, u)
            continue
        via_bayes = bayes_update(prior, policy, u)
        via_filter = sad_update(prior, greedy, u)
        assert np.all(np.abs(via_bayes.probs - via_filter.probs) <= 1e-12)
        _, mass = blur_report(prior, policy, u)
        assert mass == 0.0
        checked += 1
    assert checked >= 1000


def test_posterior_matches_generative_enumeration():
    """Oracle: enumerate the explore/exploit mixture explicitly.

    For each history spread its prior mass over actions by the generative
    process (greedy branch with weight 1-eps, each action with weight eps/n)
    and read the posterior off the joint table.
    """
    gen = np.random.default_rng(13)
    for _ in range(300):
        prior, greedy = _random_instance(gen)
        eps = float(gen.uniform(0.0, 1.0))
        n = 3
        joint = np.zeros((len(prior.support), n))
        for i, h in enumerate(prior.support):
            joint[i, greedy[h]] += prior.probs[i] * (1.0 - eps)
            joint[i, :] += prior.probs[i] * eps / n
        u = int(gen.integers(n))
        if joint[:, u].sum() == 0.0:
            continue
        expected = joint[:, u] / joint[:, u].sum()
        policy = EpsGreedyPolicy(greedy, epsilon=eps, action_count=n)
        post = bayes_update(prior, policy, u)
        assert np.all(np.abs(post.probs - expected) <= 1e-12)
        blurred, _ = blur_report(prior, policy, u)
        assert np.all(np.abs(blurred.probs - expected) <= 1e-12)


def test_two_history_worked_example():
    # Uniform prior over two histories with distinct greedy actions, eps=0.2,
    # three actions, observe the first history's greedy action: 13/14.
    prior = BeliefDistribution.uniform(["t1", "t2"])
    policy = EpsGreedyPolicy({"t1": 0, "t2": 1}, epsilon=0.2, action_count=3)
    post = bayes_update(prior, policy, 0)
    assert post.prob("t1") == pytest.approx(13.0 / 14.0, abs=1e-15)
    blurred, mass = blur_report(prior, policy, 0)
    assert np.all(np.abs(blurred.probs - post.probs) <= 1e-12)
    assert 0.0 < mass < 1.0


def test_blurring_monotone_in_total_variation():
    """Distance from the sharp eps=0 posterior grows with exploration."""
    gen = np.random.default_rng(21)
    grid = [i / 10 for i in range(11)]
    for _ in range(100):
        prior, greedy = _random_instance(gen)
        u = greedy[prior.support[0]]
        sharp = sad_update(prior, greedy, u)
        distances = []
        for eps in grid:
            policy = EpsGreedyPolicy(greedy, eps, action_count=3)
            post = bayes_update(prior, policy, u)
            distances.append(sharp.total_variation(post))
        assert all(a <= b + 1e-12 for a, b in zip(distances, distances[1:]))


def test_matrix_game_card_posterior_matches_enumeration():
    """Player 2's belief over player 1's card, against direct enumeration."""
    from sadrl.matrix_game import NUM_ACTIONS, NUM_CARDS

    gen = np.random.default_rng(22)
    for _ in range(200):
        p1_policy = {c: int(gen.integers(NUM_ACTIONS)) for c in range(NUM_CARDS)}
        eps = float(gen.uniform(0, 1))
        prior = BeliefDistribution.uniform(list(range(NUM_CARDS)))
        u = int(gen.integers(NUM_ACTIONS))
        joint = np.zeros((NUM_CARDS, NUM_ACTIONS))
        for c in range(NUM_CARDS):
            joint[c, p1_policy[c]] += 0.5 * (1 - eps)
            joint[c, :] += 0.5 * eps / NUM_ACTIONS
        if joint[:, u].sum() == 0:
            continue
        expected = joint[:, u] / joint[:, u].sum()
        policy = EpsGreedyPolicy(p1_policy, eps, NUM_ACTIONS)
        post = bayes_update(prior, policy, u)
        assert np.all(np.abs(post.probs - expected) <= 1e-12)


def test_actor_view_projects_history():
    # Histories are (card, nuisance); the actor only sees the card.
    support = ((0, "x"), (0, "y"), (1, "x"))
    prior = BeliefDistribution.uniform(support)
    greedy = {0: 0, 1: 2}
    post = sad_update(prior, greedy, 0, actor_view=lambda h: h[0])
    assert post.prob((0, "x")) == pytest.approx(0.5)
    assert post.prob((0, "y")) == pytest.approx(0.5)
    assert post.prob((1, "x")) == 0.0


def test_impossible_evidence_raises():
    prior = BeliefDistribution.uniform([0, 1])
    with pytest.raises(ImpossibleEvidenceError):
        sad_update(prior, {0: 1, 1: 1}, observed_greedy=2)
    policy = EpsGreedyPolicy({0: 1, 1: 1}, epsilon=0.0, action_count=3)
    with pytest.raises(ImpossibleEvidenceError):
        blur_report(prior, policy, 2)


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    eps_pair=st.tuples(
        st.floats(0.0, 1.0, allow_nan=False), st.floats(0.0, 1.0, allow_nan=False)
    ),
)
def test_unfiltered_mass_monotone_in_epsilon(seed, eps_pair):
    """Leak mass is 0 at eps=0, 1 at eps=1, and nondecreasing between."""
    gen = np.random.default_rng(seed)
    prior, greedy = _random_instance(gen)
    u = greedy[prior.support[int(gen.integers(len(prior.support)))]]
    lo, hi = sorted(eps_pair)
    masses = epsilon_sweep(prior, greedy, u, action_count=3, epsilons=[0.0, lo, hi, 1.0])
    values = [m for _, m in masses]
    assert values[0] == 0.0
    assert values[-1] == pytest.approx(1.0, abs=1e-12)
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_sweep_reports_requested_epsilons():
    prior = BeliefDistribution.uniform([0, 1, 2])
    rows = epsilon_sweep(prior, {0: 0, 1: 0, 2: 1}, 0, 3, [0.0, 0.25, 0.5])
    assert [eps for eps, _ in rows] == [0.0, 0.25, 0.5]
