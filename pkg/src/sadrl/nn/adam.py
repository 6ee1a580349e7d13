"""Adam optimizer with bias correction.

Defaults follow the training setup this package targets: lr 6.25e-5 and
eps 1.5e-5, with the conventional beta values.  Moment buffers live in the
optimizer, keyed by parameter name, so one optimizer instance is bound to
one parameter set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkParams


class NonFiniteGradientError(FloatingPointError):
    """Raised when a gradient fed to the optimizer contains NaN or Inf."""


@dataclass
class Adam:
    lr: float = 6.25e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.5e-5
    step_count: int = 0
    _m: dict = field(default_factory=dict)
    _v: dict = field(default_factory=dict)

    def step(self, params: NetworkParams, grads: dict[str, np.ndarray] | None = None) -> None:
        """Apply one update in place.

        ``grads`` defaults to the ``.grad`` buffers accumulated on the
        parameter tensors by a backward pass; missing or ``None`` entries
        mean zero gradient and leave the parameter untouched.
        """
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1 ** t
        bias2 = 1.0 - self.beta2 ** t
        for name, tensor in params.tensors.items():
            g = grads.get(name) if grads is not None else tensor.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"non-finite gradient for {name}")
            if name not in self._m:
                self._m[name] = np.zeros_like(tensor.data)
                self._v[name] = np.zeros_like(tensor.data)
            m, v = self._m[name], self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bias1
            v_hat = v / bias2
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
