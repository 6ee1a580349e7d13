"""Cooperative multi-agent Q-learning with a greedy-action side channel.

Subpackages: ``matrix_game``/``tabular``/``belief`` cover the two-step
signaling game and its exact belief analysis; ``hanabi`` is a from-scratch
rules engine with a fixed observation encoding; ``nn``/``replay``/``train``
/``harness`` form the recurrent Q-learning stack around it.
"""

__version__ = "0.1.0"
