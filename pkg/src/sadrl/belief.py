"""Exact Bayesian belief tracking over enumerable history sets.

An observer holds a distribution over candidate histories and updates it
after seeing a teammate act.  Under epsilon-greedy behavior the update keeps
a history-independent leak term proportional to the prior, which blurs the
posterior; conditioning on the teammate's *greedy* action instead reduces the
update to pure filtering.  ``blur_report`` exposes the leak mass explicitly
so the effect can be measured.

These computations are only meant for history sets small enough to enumerate
(the signaling game); they are the analysis companion to the learned agents,
not part of the training path.
"""

from __future__ import annotations

from collections.abc import Callable, Hashable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

History = Hashable
GreedyMap = Callable[[History], int] | Mapping[History, int]

_NORMALIZATION_TOL = 1e-12


class ImpossibleEvidenceError(ValueError):
    """The observed action has zero probability under every candidate history."""


def _greedy_fn(greedy_map: GreedyMap) -> Callable[[History], int]:
    if callable(greedy_map):
        return greedy_map
    return greedy_map.__getitem__


@dataclass(frozen=True)
class BeliefDistribution:
    """Probability table over distinct candidate histories, normalized."""

    support: tuple[History, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if len(self.support) != len(probs):
            raise ValueError("support and probs lengths differ")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support entries must be distinct")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > _NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")

    @classmethod
    def uniform(cls, support: Sequence[History]) -> "BeliefDistribution":
        n = len(support)
        return cls(tuple(support), np.full(n, 1.0 / n))

    @classmethod
    def from_weights(
        cls, support: Sequence[History], weights: np.ndarray
    ) -> "BeliefDistribution":
        weights = np.asarray(weights, dtype=np.float64)
        total = weights.sum()
        if total <= 0:
            raise ImpossibleEvidenceError("all candidate histories have zero weight")
        return cls(tuple(support), weights / total)

    def prob(self, history: History) -> float:
        return float(self.probs[self.support.index(history)])

    def total_variation(self, other: "BeliefDistribution") -> float:
        if self.support != other.support:
            raise ValueError("distributions have different supports")
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


@dataclass(frozen=True)
class EpsGreedyPolicy:
    """Epsilon-greedy action distribution around a deterministic greedy map.

    ``greedy_map`` takes the acting agent's view of a history and returns its
    greedy action.  The action probability is
    ``(1 - epsilon) * [greedy == u] + epsilon / action_count``, which sums to
    one exactly over the action set.
    """

    greedy_map: GreedyMap
    epsilon: float
    action_count: int

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.action_count < 1:
            raise ValueError("action_count must be positive")

    def action_prob(self, action: int, actor_view: History) -> float:
        greedy = _greedy_fn(self.greedy_map)(actor_view)
        base = self.epsilon / self.action_count
        return base + (1.0 - self.epsilon) * (1.0 if greedy == action else 0.0)


def bayes_update(
    prior: BeliefDistribution,
    policy: EpsGreedyPolicy,
    observed_action: int,
    actor_view: Callable[[History], History] = lambda h: h,
) -> BeliefDistribution:
    """Condition the prior on an executed epsilon-greedy action.

    ``actor_view`` maps a candidate history to the acting agent's information
    state, i.e. what the policy's greedy map is keyed by.
    """
    likelihood = np.array(
        [policy.action_prob(observed_action, actor_view(h)) for h in prior.support]
    )
    return BeliefDistribution.from_weights(prior.support, likelihood * prior.probs)


def sad_update(
    prior: BeliefDistribution,
    greedy_map: GreedyMap,
    observed_greedy: int,
    actor_view: Callable[[History], History] = lambda h: h,
) -> BeliefDistribution:
    """Condition on the broadcast greedy action: pure filtering.

    Equivalent to ``bayes_update`` with ``epsilon == 0`` for any prior; no
    exploration term survives, so inconsistent histories drop to exactly
    zero.
    """
    greedy = _greedy_fn(greedy_map)
    keep = np.array(
        [1.0 if greedy(actor_view(h)) == observed_greedy else 0.0 for h in prior.support]
    )
    return BeliefDistribution.from_weights(prior.support, keep * prior.probs)


def blur_report(
    prior: BeliefDistribution,
    policy: EpsGreedyPolicy,
    observed_action: int,
    actor_view: Callable[[History], History] = lambda h: h,
) -> tuple[BeliefDistribution, float]:
    """Posterior plus the probability mass the exploration term leaks into it.

    The epsilon-greedy posterior decomposes into a filtered part (histories
    whose greedy action matches the observation) and a leak part proportional
    to the prior.  The returned mass is the leak total: 0 at epsilon = 0,
    1 at epsilon = 1, and monotonically nondecreasing in between.
    """
    greedy = _greedy_fn(policy.greedy_map)
    consistent = np.array(
        [1.0 if greedy(actor_view(h)) == observed_action else 0.0 for h in prior.support]
    )
    eps, n_actions = policy.epsilon, policy.action_count
    leak = (eps / n_actions) * prior.probs
    filtered = (1.0 - eps) * consistent * prior.probs
    denom = leak.sum() + filtered.sum()
    if denom <= 0.0:
        raise ImpossibleEvidenceError(
            f"action {observed_action} has zero probability under the prior"
        )
    posterior = BeliefDistribution(prior.support, (leak + filtered) / denom)
    return posterior, float(leak.sum() / denom)


def epsilon_sweep(
    prior: BeliefDistribution,
    greedy_map: GreedyMap,
    observed_action: int,
    action_count: int,
    epsilons: Sequence[float],
) -> list[tuple[float, float]]:
    """Leak mass of the posterior at each exploration rate."""
    rows = []
    for eps in epsilons:
        policy = EpsGreedyPolicy(greedy_map, eps, action_count)
        _, mass = blur_report(prior, policy, observed_action)
        rows.append((float(eps), mass))
    return rows
