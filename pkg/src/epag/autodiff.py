"""Reverse-mode automatic differentiation over float64 numpy arrays.

Small by design: only the operations the encoder/classifier stack needs.
Every op records a closure that accumulates gradients into its parents;
``Tensor.backward()`` walks the graph once in reverse topological order.
"""

from __future__ import annotations

import contextlib
import threading

import numpy as np

# Per-thread so concurrent read-only inference cannot corrupt the flag.
_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    """Skip graph bookkeeping inside the block (forward values unchanged)."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def _sum_to_shape(grad: np.ndarray, shape: tuple) -> np.ndarray:
    # Undo numpy broadcasting: sum the gradient down to the operand's shape.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_prev", "_backward")

    def __init__(self, data, _prev=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._prev = _prev
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def _accum(self, grad: np.ndarray) -> None:
        grad = _sum_to_shape(np.asarray(grad, dtype=np.float64), self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into every reachable node's ``.grad``."""
        if self.data.ndim != 0:
            raise ValueError("backward() requires a scalar root")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones((), dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def detach(self) -> "Tensor":
        """A new leaf sharing this tensor's values; gradients stop here."""
        return Tensor(self.data)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        out = _make(self.data + other.data, (self, other))
        if out._prev:
            def backward():
                self._accum(out.grad)
                other._accum(out.grad)
            out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = _make(-self.data, (self,))
        if out._prev:
            def backward():
                self._accum(-out.grad)
            out._backward = backward
        return out

    def __sub__(self, other):
        other = _as_tensor(other)
        out = _make(self.data - other.data, (self, other))
        if out._prev:
            def backward():
                self._accum(out.grad)
                other._accum(-out.grad)
            out._backward = backward
        return out

    def __rsub__(self, other):
        return _as_tensor(other) - self

    def __mul__(self, other):
        other = _as_tensor(other)
        out = _make(self.data * other.data, (self, other))
        if out._prev:
            def backward():
                self._accum(out.grad * other.data)
                other._accum(out.grad * self.data)
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        out = _make(self.data / other.data, (self, other))
        if out._prev:
            def backward():
                self._accum(out.grad / other.data)
                other._accum(-out.grad * self.data / (other.data ** 2))
            out._backward = backward
        return out

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = _make(self.data ** exponent, (self,))
        if out._prev:
            def backward():
                self._accum(out.grad * exponent * self.data ** (exponent - 1))
            out._backward = backward
        return out

    def __matmul__(self, other):
        other = _as_tensor(other)
        a, b = self.data, other.data
        out = _make(a @ b, (self, other))
        if out._prev:
            def backward():
                g = out.grad
                if a.ndim == 2 and b.ndim == 2:
                    self._accum(g @ b.T)
                    other._accum(a.T @ g)
                elif a.ndim == 1 and b.ndim == 2:
                    self._accum(b @ g)
                    other._accum(np.outer(a, g))
                elif a.ndim == 2 and b.ndim == 1:
                    self._accum(np.outer(g, b))
                    other._accum(a.T @ g)
                elif a.ndim == 1 and b.ndim == 1:
                    self._accum(g * b)
                    other._accum(g * a)
                else:
                    raise ValueError("unsupported matmul operand ranks")
            out._backward = backward
        return out

    def __getitem__(self, key):
        out = _make(self.data[key], (self,))
        if out._prev:
            def backward():
                acc = np.zeros_like(self.data)
                np.add.at(acc, key, out.grad)
                self._accum(acc)
            out._backward = backward
        return out


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents: tuple) -> Tensor:
    if _grad_enabled():
        return Tensor(data, parents)
    return Tensor(data)


# -- elementwise functions ------------------------------------------------

def exp(t: Tensor) -> Tensor:
    out = _make(np.exp(t.data), (t,))
    if out._prev:
        def backward():
            t._accum(out.grad * out.data)
        out._backward = backward
    return out


def log(t: Tensor) -> Tensor:
    out = _make(np.log(t.data), (t,))
    if out._prev:
        def backward():
            t._accum(out.grad / t.data)
        out._backward = backward
    return out


def tanh(t: Tensor) -> Tensor:
    out = _make(np.tanh(t.data), (t,))
    if out._prev:
        def backward():
            t._accum(out.grad * (1.0 - out.data ** 2))
        out._backward = backward
    return out


def sigmoid(t: Tensor) -> Tensor:
    out = _make(1.0 / (1.0 + np.exp(-t.data)), (t,))
    if out._prev:
        def backward():
            t._accum(out.grad * out.data * (1.0 - out.data))
        out._backward = backward
    return out


def clamp_min(t: Tensor, floor: float) -> Tensor:
    """max(t, floor) elementwise; gradient is zero on the clamped region."""
    out = _make(np.maximum(t.data, floor), (t,))
    if out._prev:
        def backward():
            t._accum(out.grad * (t.data > floor))
        out._backward = backward
    return out


# -- reductions / shape ----------------------------------------------------

def tsum(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = _make(t.data.sum(axis=axis, keepdims=keepdims), (t,))
    if out._prev:
        def backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            t._accum(np.broadcast_to(g, t.data.shape))
        out._backward = backward
    return out


def mean(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = t.data.size if axis is None else t.data.shape[axis]
    return tsum(t, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(t: Tensor, shape) -> Tensor:
    out = _make(t.data.reshape(shape), (t,))
    if out._prev:
        def backward():
            t._accum(out.grad.reshape(t.data.shape))
        out._backward = backward
    return out


def transpose(t: Tensor) -> Tensor:
    out = _make(np.swapaxes(t.data, -1, -2), (t,))
    if out._prev:
        def backward():
            t._accum(np.swapaxes(out.grad, -1, -2))
        out._backward = backward
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out._prev:
        sizes = [t.data.shape[axis] for t in tensors]
        def backward():
            offset = 0
            for t, size in zip(tensors, sizes):
                index = [slice(None)] * out.grad.ndim
                index[axis] = slice(offset, offset + size)
                t._accum(out.grad[tuple(index)])
                offset += size
        out._backward = backward
    return out


def gather_rows(t: Tensor, index: np.ndarray) -> Tensor:
    """Index rows of a 2-D tensor with an integer array of any shape."""
    index = np.asarray(index)
    out = _make(t.data[index], (t,))
    if out._prev:
        def backward():
            acc = np.zeros_like(t.data)
            np.add.at(acc, index, out.grad)
            t._accum(acc)
        out._backward = backward
    return out


# -- composites ------------------------------------------------------------

def softmax(t: Tensor, axis: int = -1) -> Tensor:
    # The shift by the (detached) row max leaves value and gradient exact.
    shifted = t - t.data.max(axis=axis, keepdims=True)
    e = exp(shifted)
    return e / tsum(e, axis=axis, keepdims=True)


def layer_norm(t: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    mu = mean(t, axis=-1, keepdims=True)
    centered = t - mu
    var = mean(centered * centered, axis=-1, keepdims=True)
    return centered * ((var + eps) ** -0.5) * gain + bias


def gelu(t: Tensor) -> Tensor:
    # tanh approximation; smooth everywhere.
    inner = 0.7978845608028654 * (t + 0.044715 * t * t * t)
    return 0.5 * t * (1.0 + tanh(inner))
