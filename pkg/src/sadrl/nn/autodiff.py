"""Reverse-mode automatic differentiation on numpy arrays.

Only the operations the recurrent Q-network needs are provided: affine maps,
the LSTM gate nonlinearities, slicing and gathering, reductions, and a stable
log-softmax for the classification head.  Graphs are built eagerly; calling
:func:`backward` on a scalar loss walks the tape once in reverse topological
order and accumulates gradients into every reachable tensor that has
``requires_grad`` set.

Inference paths that need no gradients should pass plain numpy arrays through
the same formulas (see ``network.forward_step``); wrapping constants in
:class:`Tensor` is cheap but building the tape is not free.
"""

from __future__ import annotations

import numpy as np

_check_finite = False


def set_finite_checks(enabled: bool) -> None:
    """Toggle per-operation NaN/Inf detection (slow; meant for tests)."""
    global _check_finite
    _check_finite = bool(enabled)


def _checked(data: np.ndarray, op: str) -> np.ndarray:
    if _check_finite and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values produced by {op}")
    return data


class Tensor:
    """A numpy array plus the tape edge that produced it.

    ``grad`` stays ``None`` until a backward pass deposits into it; gradients
    accumulate across backward calls until :func:`zero_grad` clears them.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backprop")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backprop=None):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = _parents
        self._backprop = _backprop

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _tracked(a: Tensor, *rest: Tensor) -> bool:
    return a.requires_grad or a._backprop is not None or any(
        t.requires_grad or t._backprop is not None for t in rest
    )


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(_checked(a.data @ b.data, "matmul"))
    if not _tracked(a, b):
        return out

    def backprop():
        g = out.grad
        if a.requires_grad or a._backprop is not None:
            a._accumulate(g @ b.data.T)
        if b.requires_grad or b._backprop is not None:
            b._accumulate(a.data.T @ g)

    out._parents, out._backprop = (a, b), backprop
    return out


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(_checked(a.data + b.data, "add"))
    if not _tracked(a, b):
        return out

    def backprop():
        g = out.grad
        if a.requires_grad or a._backprop is not None:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad or b._backprop is not None:
            b._accumulate(_unbroadcast(g, b.data.shape))

    out._parents, out._backprop = (a, b), backprop
    return out


def sub(a, b) -> Tensor:
    return add(a, mul_scalar(b, -1.0))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(_checked(a.data * b.data, "mul"))
    if not _tracked(a, b):
        return out

    def backprop():
        g = out.grad
        if a.requires_grad or a._backprop is not None:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad or b._backprop is not None:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    out._parents, out._backprop = (a, b), backprop
    return out


def mul_scalar(a, c: float) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(_checked(a.data * c, "mul_scalar"))
    if not _tracked(a):
        return out

    def backprop():
        a._accumulate(out.grad * c)

    out._parents, out._backprop = (a,), backprop
    return out


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function split by sign so exp never overflows."""
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = stable_sigmoid(a.data)
    out = Tensor(_checked(s, "sigmoid"))
    if not _tracked(a):
        return out

    def backprop():
        a._accumulate(out.grad * s * (1.0 - s))

    out._parents, out._backprop = (a,), backprop
    return out


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)
    out = Tensor(_checked(t, "tanh"))
    if not _tracked(a):
        return out

    def backprop():
        a._accumulate(out.grad * (1.0 - t * t))

    out._parents, out._backprop = (a,), backprop
    return out


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(_checked(np.maximum(a.data, 0.0), "relu"))
    if not _tracked(a):
        return out

    def backprop():
        a._accumulate(out.grad * (a.data > 0))

    out._parents, out._backprop = (a,), backprop
    return out


def slice_last(a, start: int, end: int) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data[..., start:end])
    if not _tracked(a):
        return out

    def backprop():
        g = np.zeros_like(a.data)
        g[..., start:end] = out.grad
        a._accumulate(g)

    out._parents, out._backprop = (a,), backprop
    return out


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape))
    if not _tracked(a):
        return out

    def backprop():
        a._accumulate(out.grad.reshape(a.data.shape))

    out._parents, out._backprop = (a,), backprop
    return out


def gather_last(a, index: np.ndarray) -> Tensor:
    """Pick one entry along the last axis per leading position."""
    a = _as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.shape != a.data.shape[:-1]:
        raise ValueError(f"index shape {idx.shape} does not match {a.data.shape[:-1]}")
    picked = np.take_along_axis(a.data, idx[..., None], axis=-1)[..., 0]
    out = Tensor(picked)
    if not _tracked(a):
        return out

    def backprop():
        g = np.zeros_like(a.data)
        np.put_along_axis(g, idx[..., None], out.grad[..., None], axis=-1)
        a._accumulate(g)

    out._parents, out._backprop = (a,), backprop
    return out


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(_checked(a.data.sum(axis=axis, keepdims=keepdims), "sum"))
    if not _tracked(a):
        return out

    def backprop():
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    out._parents, out._backprop = (a,), backprop
    return out


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul_scalar(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def log_softmax(a) -> Tensor:
    """Numerically stable log-softmax over the last axis."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_p = shifted - lse
    out = Tensor(_checked(log_p, "log_softmax"))
    if not _tracked(a):
        return out

    def backprop():
        g = out.grad
        a._accumulate(g - np.exp(log_p) * g.sum(axis=-1, keepdims=True))

    out._parents, out._backprop = (a,), backprop
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into every reachable tracked tensor."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss._backprop is None and not loss.requires_grad:
        raise RuntimeError("backward called on a tensor with no recorded graph")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backprop is not None:
            node._backprop()


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None


def finite_difference(loss_fn, tensors, h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients of ``loss_fn()`` w.r.t. each tensor.

    ``loss_fn`` must recompute the loss from the tensors' current ``data``;
    entries are perturbed in place one coordinate at a time.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(loss_fn())
            flat[i] = keep - h
            down = float(loss_fn())
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Worst-case elementwise relative disagreement between gradient sets.

    Entries whose magnitude falls below ``floor`` are compared absolutely at
    floor scale: central differences carry roundoff noise of roughly
    machine-eps times the loss over the step size, which would swamp the
    ratio for near-zero gradients.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.zeros_like(n) if a is None else a
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
