"""Minimal neural kernel: taped numpy autodiff, the recurrent dueling
Q-network, Adam, and bit-exact checkpointing."""

from .adam import Adam, NonFiniteGradientError
from .autodiff import (
    Tensor,
    backward,
    finite_difference,
    max_relative_error,
    set_finite_checks,
    zero_grad,
)
from .checkpoint import (
    CheckpointError,
    FORMAT_NAME,
    load_checkpoint,
    params_checksum,
    save_checkpoint,
)
from .network import (
    AUX_CLASSES_PER_CARD,
    NetworkParams,
    NetworkSpec,
    RecurrentState,
    forward_sequence,
    forward_step,
    init_params,
    zero_params,
)

__all__ = [
    "AUX_CLASSES_PER_CARD",
    "Adam",
    "CheckpointError",
    "FORMAT_NAME",
    "NetworkParams",
    "NetworkSpec",
    "NonFiniteGradientError",
    "RecurrentState",
    "Tensor",
    "backward",
    "finite_difference",
    "forward_sequence",
    "forward_step",
    "init_params",
    "load_checkpoint",
    "max_relative_error",
    "params_checksum",
    "save_checkpoint",
    "set_finite_checks",
    "zero_grad",
    "zero_params",
]
