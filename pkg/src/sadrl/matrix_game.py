"""Two-step, two-player signaling game with an exhaustive-search oracle.

Each player privately draws a card from {1, 2}.  Player 1 acts first with one
of three actions; player 2 observes that action plus her own card, then acts.
The team payoff depends on both cards and both actions.  Playing action 2
twice is a safe 8 points regardless of cards; decoding the first player's
action is worth 10.  ``solve_exhaustive`` enumerates every deterministic
policy pair and is the correctness oracle for everything learned on this
game.
"""

from __future__ import annotations

from itertools import product
from pathlib import Path

import numpy as np

from .core import AgentObservation, EpisodeFinishedError, RuleViolationError
from .rng import RngStream

NUM_CARDS = 2
NUM_ACTIONS = 3

SAFE_ACTION = 1        # 0-based id of the card-independent 8-point action
SAFE_PAYOFF = 8.0
BEST_PAYOFF = 10.0


class PayoffFormatError(ValueError):
    """Payoff file could not be parsed."""


class PayoffInvariantError(ValueError):
    """Payoff tensor violates a structural constraint; message names it."""


class PayoffTensor:
    """Team payoff indexed ``[c1, c2, a1, a2]`` with 0-based indices.

    Cards and actions are 0-based internally; file layout and error messages
    use the 1-based labels players see.
    """

    def __init__(self, values: np.ndarray, validate: bool = True):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (NUM_CARDS, NUM_CARDS, NUM_ACTIONS, NUM_ACTIONS):
            raise PayoffFormatError(
                f"payoff tensor must have shape (2, 2, 3, 3), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise PayoffFormatError("payoff tensor contains non-finite entries")
        self.values = values
        if validate:
            self.check_invariants()

    def __getitem__(self, idx) -> float:
        return float(self.values[idx])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PayoffTensor) and np.array_equal(
            self.values, other.values
        )

    def expected(self, a1: int, a2: int) -> float:
        """Expected payoff of a card-independent joint action (uniform cards)."""
        return float(self.values[:, :, a1, a2].mean())

    def check_invariants(self) -> None:
        v = self.values
        if not np.all(v[:, :, SAFE_ACTION, SAFE_ACTION] == SAFE_PAYOFF):
            raise PayoffInvariantError(
                "payoff[c1][c2][2][2] must equal 8 for every card pair"
            )
        if v.max() != BEST_PAYOFF:
            raise PayoffInvariantError("tensor maximum must be exactly 10")
        for c1, c2 in product(range(NUM_CARDS), repeat=2):
            if v[c1, c2].max() != BEST_PAYOFF:
                raise PayoffInvariantError(
                    f"card pair ({c1 + 1},{c2 + 1}) has no 10-valued joint action"
                )
        # (2, 2) must be a strict Nash equilibrium of the expected-payoff game,
        # which is the local optimum that traps non-communicating learners.
        safe = self.expected(SAFE_ACTION, SAFE_ACTION)
        for a in range(NUM_ACTIONS):
            if a == SAFE_ACTION:
                continue
            if self.expected(a, SAFE_ACTION) >= safe:
                raise PayoffInvariantError(
                    "(2,2) is not a strict Nash equilibrium: "
                    f"player-1 deviation to action {a + 1} does not lose"
                )
            if self.expected(SAFE_ACTION, a) >= safe:
                raise PayoffInvariantError(
                    "(2,2) is not a strict Nash equilibrium: "
                    f"player-2 deviation to action {a + 1} does not lose"
                )
        best, best_noncomm, _ = solve_exhaustive(self, validate=False)
        if best != BEST_PAYOFF:
            raise PayoffInvariantError(
                f"best communicative joint policy value is {best}, expected 10"
            )
        if best_noncomm != SAFE_PAYOFF:
            raise PayoffInvariantError(
                f"best card-independent player-1 value is {best_noncomm}, expected 8"
            )


def default_payoff() -> PayoffTensor:
    """The shipped payoff tensor.

    Action 2 by player 1 pays 8 if answered with 2, else 4.  Actions 1 and 3
    are signals: they pay 10 exactly when player 2 answers with 1 on matching
    cards and 3 on mismatched cards, else 0.
    """
    v = np.zeros((NUM_CARDS, NUM_CARDS, NUM_ACTIONS, NUM_ACTIONS))
    for c1, c2 in product(range(NUM_CARDS), repeat=2):
        target = 0 if c1 == c2 else 2
        for a2 in range(NUM_ACTIONS):
            v[c1, c2, SAFE_ACTION, a2] = SAFE_PAYOFF if a2 == SAFE_ACTION else 4.0
        for a1 in (0, 2):
            v[c1, c2, a1, target] = BEST_PAYOFF
    return PayoffTensor(v)


def solve_exhaustive(
    tensor: PayoffTensor, validate: bool = True
) -> tuple[float, float, int]:
    """Brute-force the game: enumerate all deterministic policy pairs.

    Player 1 has 3^2 policies (card -> action); player 2 has 3^6 policies
    ((observed action, card) -> action).  Returns the best expected payoff,
    the best achievable when player 1 ignores her card, and how many policy
    pairs attain the best value.
    """
    v = tensor.values if validate else np.asarray(tensor.values)

    p1_policies = list(product(range(NUM_ACTIONS), repeat=NUM_CARDS))
    p2_policies = list(product(range(NUM_ACTIONS), repeat=NUM_ACTIONS * NUM_CARDS))

    best = -np.inf
    best_noncomm = -np.inf
    best_count = 0
    for p1 in p1_policies:
        constant_p1 = p1[0] == p1[1]
        for p2 in p2_policies:
            total = 0.0
            for c1, c2 in product(range(NUM_CARDS), repeat=2):
                a1 = p1[c1]
                a2 = p2[a1 * NUM_CARDS + c2]
                total += v[c1, c2, a1, a2]
            value = total / (NUM_CARDS * NUM_CARDS)
            if value > best:
                best, best_count = value, 1
            elif value == best:
                best_count += 1
            if constant_p1 and value > best_noncomm:
                best_noncomm = value
    return float(best), float(best_noncomm), best_count


def save_payoff(tensor: PayoffTensor, path: str | Path) -> None:
    lines = [
        "# Signaling-game payoff tensor.",
        "# 4 blocks of 3x3 reals: rows = player-1 action, columns = player-2 action.",
        "# Blocks ordered by cards (c1,c2) = (1,1), (1,2), (2,1), (2,2).",
    ]
    for c1, c2 in product(range(NUM_CARDS), repeat=2):
        lines.append(f"# cards ({c1 + 1},{c2 + 1})")
        for a1 in range(NUM_ACTIONS):
            lines.append(
                " ".join(f"{tensor.values[c1, c2, a1, a2]:g}" for a2 in range(NUM_ACTIONS))
            )
    Path(path).write_text("\n".join(lines) + "\n")


def load_payoff(path: str | Path) -> PayoffTensor:
    """Parse and validate a payoff file; invariant failures are load errors."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise PayoffFormatError(f"cannot read payoff file {path}: {exc}") from exc
    numbers: list[float] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        for token in body.split():
            try:
                numbers.append(float(token))
            except ValueError as exc:
                raise PayoffFormatError(
                    f"{path}:{lineno}: not a number: {token!r}"
                ) from exc
    expected = NUM_CARDS * NUM_CARDS * NUM_ACTIONS * NUM_ACTIONS
    if len(numbers) != expected:
        raise PayoffFormatError(
            f"{path}: expected {expected} payoff values, found {len(numbers)}"
        )
    values = np.array(numbers).reshape(NUM_CARDS, NUM_CARDS, NUM_ACTIONS, NUM_ACTIONS)
    return PayoffTensor(values)


class MatrixGame:
    """The signaling game behind the shared turn-based environment contract."""

    num_players = 2
    num_actions = NUM_ACTIONS

    def __init__(self, payoff: PayoffTensor | None = None):
        self.payoff = payoff if payoff is not None else default_payoff()
        self.cards: tuple[int, int] | None = None
        self.first_action: int | None = None
        self.phase = 0  # 0: player 1 to act, 1: player 2 to act, 2: done

    def reset(self, rng: RngStream) -> None:
        gen = rng.generator()
        self.cards = (int(gen.integers(NUM_CARDS)), int(gen.integers(NUM_CARDS)))
        self.first_action = None
        self.phase = 0

    def current_player(self) -> int:
        if self.phase >= 2:
            raise EpisodeFinishedError("episode finished")
        return self.phase

    def is_terminal(self) -> bool:
        return self.phase >= 2

    def legal_mask(self) -> np.ndarray:
        if self.is_terminal():
            raise EpisodeFinishedError("episode finished")
        return np.ones(NUM_ACTIONS, dtype=bool)

    def step(self, action: int) -> tuple[float, bool]:
        if self.cards is None:
            raise RuleViolationError("environment not reset")
        if self.is_terminal():
            raise EpisodeFinishedError("episode finished")
        if not 0 <= action < NUM_ACTIONS:
            raise RuleViolationError(f"action id {action} out of range")
        if self.phase == 0:
            self.first_action = action
            self.phase = 1
            return 0.0, False
        reward = self.payoff[self.cards[0], self.cards[1], self.first_action, action]
        self.phase = 2
        return reward, True

    def observe(self, agent: int) -> AgentObservation:
        """Own card one-hot plus, for player 2 after the first move, the
        executed action of player 1."""
        if self.cards is None:
            raise RuleViolationError("environment not reset")
        features = np.zeros(NUM_CARDS + NUM_ACTIONS, dtype=np.float32)
        features[self.cards[agent]] = 1.0
        if self.first_action is not None:
            features[NUM_CARDS + self.first_action] = 1.0
        if not self.is_terminal() and self.current_player() == agent:
            mask = np.ones(NUM_ACTIONS, dtype=bool)
        else:
            mask = np.zeros(NUM_ACTIONS, dtype=bool)
        return AgentObservation(features=features, legal_mask=mask)
