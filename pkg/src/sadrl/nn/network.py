"""The recurrent dueling Q-network.

One fully connected layer feeds two stacked LSTM layers; a value head and an
advantage head combine into Q-values, and an optional classification head
predicts a per-card 3-class status used as an auxiliary supervised signal.
Two forward paths share the same arithmetic: a taped path over sequences for
training, and a tape-free single-step path for actors.  Bit-identical outputs
between the two are part of the contract and covered by tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rng import RngStream
from . import autodiff as ad
from .autodiff import Tensor

AUX_CLASSES_PER_CARD = 3


@dataclass(frozen=True)
class NetworkSpec:
    """Shapes of one agent network; online and target copies share a spec."""

    input_dim: int
    num_actions: int
    hand_size: int
    hidden: int = 512
    aux: bool = True

    def __post_init__(self):
        if min(self.input_dim, self.num_actions, self.hand_size, self.hidden) < 1:
            raise ValueError("all network dimensions must be positive")

    @property
    def aux_dim(self) -> int:
        return AUX_CLASSES_PER_CARD * self.hand_size


def _param_shapes(spec: NetworkSpec) -> dict[str, tuple[int, ...]]:
    h = spec.hidden
    shapes = {
        "fc_w": (spec.input_dim, h),
        "fc_b": (h,),
        "lstm1_wx": (h, 4 * h),
        "lstm1_wh": (h, 4 * h),
        "lstm1_b": (4 * h,),
        "lstm2_wx": (h, 4 * h),
        "lstm2_wh": (h, 4 * h),
        "lstm2_b": (4 * h,),
        "value_w": (h, 1),
        "value_b": (1,),
        "adv_w": (h, spec.num_actions),
        "adv_b": (spec.num_actions,),
    }
    if spec.aux:
        shapes["aux_w"] = (h, spec.aux_dim)
        shapes["aux_b"] = (spec.aux_dim,)
    return shapes


# Fan-in per parameter: biases scale with the matrix they accompany.
_FAN_IN_OF = {
    "fc_w": "input_dim", "fc_b": "input_dim",
    "lstm1_wx": "hidden", "lstm1_wh": "hidden", "lstm1_b": "hidden",
    "lstm2_wx": "hidden", "lstm2_wh": "hidden", "lstm2_b": "hidden",
    "value_w": "hidden", "value_b": "hidden",
    "adv_w": "hidden", "adv_b": "hidden",
    "aux_w": "hidden", "aux_b": "hidden",
}


class NetworkParams:
    """Named parameter tensors for one network copy."""

    def __init__(self, spec: NetworkSpec, tensors: dict[str, Tensor]):
        self.spec = spec
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    @property
    def dtype(self):
        return self.tensors["fc_w"].dtype

    def clone(self, requires_grad: bool = False) -> "NetworkParams":
        copies = {
            name: Tensor(t.data.copy(), requires_grad=requires_grad)
            for name, t in self.tensors.items()
        }
        return NetworkParams(self.spec, copies)

    def load_from(self, other: "NetworkParams") -> None:
        """Overwrite values in place (target-network sync)."""
        if other.spec != self.spec:
            raise ValueError("parameter specs differ")
        for name, t in self.tensors.items():
            np.copyto(t.data, other.tensors[name].data)


def init_params(
    spec: NetworkSpec,
    rng: RngStream,
    dtype=np.float32,
    requires_grad: bool = True,
) -> NetworkParams:
    """Uniform fan-in initialization, seeded; weights and biases alike."""
    gen = rng.generator()
    tensors: dict[str, Tensor] = {}
    for name, shape in _param_shapes(spec).items():
        fan_in = getattr(spec, _FAN_IN_OF[name])
        bound = 1.0 / np.sqrt(fan_in)
        data = gen.uniform(-bound, bound, size=shape).astype(dtype)
        tensors[name] = Tensor(data, requires_grad=requires_grad)
    return NetworkParams(spec, tensors)


def zero_params(spec: NetworkSpec, dtype=np.float32) -> NetworkParams:
    tensors = {
        name: Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)
        for name, shape in _param_shapes(spec).items()
    }
    return NetworkParams(spec, tensors)


@dataclass
class RecurrentState:
    """Hidden and cell vectors for both LSTM layers; zeros at episode start."""

    h1: np.ndarray
    c1: np.ndarray
    h2: np.ndarray
    c2: np.ndarray

    @staticmethod
    def zeros(batch: int, hidden: int, dtype=np.float32) -> "RecurrentState":
        parts = [np.zeros((batch, hidden), dtype=dtype) for _ in range(4)]
        return RecurrentState(*parts)

    def copy(self) -> "RecurrentState":
        return RecurrentState(self.h1.copy(), self.c1.copy(), self.h2.copy(), self.c2.copy())

    def select(self, rows) -> "RecurrentState":
        return RecurrentState(self.h1[rows], self.c1[rows], self.h2[rows], self.c2[rows])


def _lstm_graph(x: Tensor, h: Tensor, c: Tensor, wx, wh, b, hidden: int):
    gates = ad.add(ad.add(ad.matmul(x, wx), ad.matmul(h, wh)), b)
    i = ad.sigmoid(ad.slice_last(gates, 0, hidden))
    f = ad.sigmoid(ad.slice_last(gates, hidden, 2 * hidden))
    g = ad.tanh(ad.slice_last(gates, 2 * hidden, 3 * hidden))
    o = ad.sigmoid(ad.slice_last(gates, 3 * hidden, 4 * hidden))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def _lstm_step_np(x, h, c, wx, wh, b, hidden: int):
    gates = (x @ wx + h @ wh) + b
    i = ad.stable_sigmoid(gates[:, :hidden])
    f = ad.stable_sigmoid(gates[:, hidden : 2 * hidden])
    g = np.tanh(gates[:, 2 * hidden : 3 * hidden])
    o = ad.stable_sigmoid(gates[:, 3 * hidden :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def _dueling(v, a):
    # Q = V + (A - mean A); association fixed so both paths agree bitwise.
    if isinstance(v, Tensor):
        return ad.add(v, ad.sub(a, ad.reduce_mean(a, axis=-1, keepdims=True)))
    return v + (a + (-1.0 * (a.mean(axis=-1, keepdims=True))))


def forward_sequence(
    params: NetworkParams,
    obs: np.ndarray,
    state: RecurrentState | None = None,
):
    """Taped forward over a (T, B, input_dim) batch of step sequences.

    Returns per-step Q tensors, per-step aux-logit tensors (empty list when
    the spec has no aux head), and the final recurrent state as raw arrays.
    """
    spec = params.spec
    if obs.ndim != 3 or obs.shape[2] != spec.input_dim:
        raise ValueError(f"expected (T, B, {spec.input_dim}) observations, got {obs.shape}")
    steps, batch = obs.shape[0], obs.shape[1]
    dtype = params.dtype
    if state is None:
        state = RecurrentState.zeros(batch, spec.hidden, dtype)
    h1, c1 = Tensor(state.h1), Tensor(state.c1)
    h2, c2 = Tensor(state.h2), Tensor(state.c2)
    q_steps: list[Tensor] = []
    aux_steps: list[Tensor] = []
    for t in range(steps):
        x = Tensor(obs[t].astype(dtype, copy=False))
        z = ad.relu(ad.add(ad.matmul(x, params["fc_w"]), params["fc_b"]))
        h1, c1 = _lstm_graph(z, h1, c1, params["lstm1_wx"], params["lstm1_wh"],
                             params["lstm1_b"], spec.hidden)
        h2, c2 = _lstm_graph(h1, h2, c2, params["lstm2_wx"], params["lstm2_wh"],
                             params["lstm2_b"], spec.hidden)
        v = ad.add(ad.matmul(h2, params["value_w"]), params["value_b"])
        a = ad.add(ad.matmul(h2, params["adv_w"]), params["adv_b"])
        q_steps.append(_dueling(v, a))
        if spec.aux:
            aux_steps.append(ad.add(ad.matmul(h2, params["aux_w"]), params["aux_b"]))
    final = RecurrentState(h1.data, c1.data, h2.data, c2.data)
    return q_steps, aux_steps, final


def forward_step(
    params: NetworkParams,
    obs: np.ndarray,
    state: RecurrentState | None = None,
):
    """Tape-free single step on a (B, input_dim) batch; actor-side path."""
    spec = params.spec
    obs = np.asarray(obs)
    squeeze = obs.ndim == 1
    if squeeze:
        obs = obs[None, :]
    if obs.shape[1] != spec.input_dim:
        raise ValueError(f"expected (B, {spec.input_dim}) observations, got {obs.shape}")
    dtype = params.dtype
    x = obs.astype(dtype, copy=False)
    if state is None:
        state = RecurrentState.zeros(obs.shape[0], spec.hidden, dtype)
    t = params.tensors
    z = np.maximum((x @ t["fc_w"].data) + t["fc_b"].data, 0.0)
    h1, c1 = _lstm_step_np(z, state.h1, state.c1, t["lstm1_wx"].data,
                           t["lstm1_wh"].data, t["lstm1_b"].data, spec.hidden)
    h2, c2 = _lstm_step_np(h1, state.h2, state.c2, t["lstm2_wx"].data,
                           t["lstm2_wh"].data, t["lstm2_b"].data, spec.hidden)
    v = (h2 @ t["value_w"].data) + t["value_b"].data
    a = (h2 @ t["adv_w"].data) + t["adv_b"].data
    q = _dueling(v, a)
    if squeeze:
        q = q[0]
    return q, RecurrentState(h1, c1, h2, c2)
