"""Reverse-mode automatic differentiation on a dynamic tape.

Nodes hold float64 numpy arrays.  Each operation records a closure that
scatters the output gradient back to its parents; ``Tensor.backward`` runs
the closures in reverse topological order.  There is deliberately no general
broadcasting engine: shapes must match exactly except for the two cases the
layers need, trailing-shape bias addition and batched matmul against a
shared 2-D weight.  Anything else raises ShapeError up front.
"""

from __future__ import annotations

import numpy as np

from rlforge.core import NumericError, ShapeError, TapeStateError


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _sum_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce ``grad`` down to ``shape`` by summing broadcast axes."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra < 0:
        raise ShapeError(f"cannot reduce grad {grad.shape} to {shape}")
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if g != s and s == 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    if grad.shape != shape:
        raise ShapeError(f"grad shape {grad.shape} incompatible with {shape}")
    return grad


def _trailing_compatible(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    """True when ``b`` matches a trailing slice of ``a`` (bias-style add)."""
    if len(b) > len(a):
        return False
    return all(bd == ad or bd == 1 for ad, bd in zip(a[len(a) - len(b):], b))


class Tensor:
    """A node on the tape: value, gradient slot, and parent links."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_spent", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = np.zeros_like(self.data) if requires_grad else None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._spent = False
        self.name = name
        if requires_grad and not np.all(np.isfinite(self.data)):
            raise NumericError(f"non-finite values in parameter {name or '<unnamed>'}")

    # -- infrastructure ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self):
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.data.shape})"

    def _track(self) -> bool:
        return self.requires_grad or self._parents != ()

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def backward(self):
        """Backpropagate from this scalar through the recorded tape.

        The tape is released afterwards; calling backward a second time on
        the same graph raises TapeStateError, as does calling it on a node
        whose forward pass has already been consumed.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise NumericError("loss is non-finite")
        if self._spent:
            raise TapeStateError("tape already consumed; run a fresh forward pass")
        if self._parents:
            self._spent = True

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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

        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)
                node._backward = None
                node._parents = ()

    # -- arithmetic ---------------------------------------------------------

    def _wrap_const(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(other)

    def __add__(self, other):
        return add(self, self._wrap_const(other))

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return add(self, scale(self._wrap_const(other), -1.0))

    def __rsub__(self, other):
        return add(self._wrap_const(other), scale(self, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_view(self, idx)

    # -- reductions and shape helpers ----------------------------------------

    def sum(self, axis=None):
        return reduce_sum(self, axis)

    def mean(self, axis=None):
        return reduce_mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    def relu(self):
        return relu(self)

    def tanh(self):
        return tanh(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def square(self):
        return square(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])


def constant(data, name: str = "") -> Tensor:
    """A tape leaf that never receives gradient."""
    return Tensor(data, requires_grad=False, name=name)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if any(p._track() for p in parents):
        out._parents = parents
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# Primitive operations
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape and not (_trailing_compatible(a.shape, b.shape) or _trailing_compatible(b.shape, a.shape)):
        raise ShapeError(f"add shapes {a.shape} and {b.shape} are incompatible")
    data = a.data + b.data

    def backward(grad):
        if a._track():
            a._accumulate(_sum_to_shape(grad, a.shape))
        if b._track():
            b._accumulate(_sum_to_shape(grad, b.shape))

    return _node(data, (a, b), backward)


def scale(a: Tensor, k: float) -> Tensor:
    data = a.data * k

    def backward(grad):
        if a._track():
            a._accumulate(grad * k)

    return _node(data, (a,), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape and a.data.size != 1 and b.data.size != 1:
        raise ShapeError(f"mul shapes {a.shape} and {b.shape} differ")
    data = a.data * b.data

    def backward(grad):
        if a._track():
            a._accumulate(_sum_to_shape(grad * b.data, a.shape))
        if b._track():
            b._accumulate(_sum_to_shape(grad * a.data, b.shape))

    return _node(data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    if a.data.ndim != b.data.ndim and b.data.ndim != 2 and a.data.ndim != 2:
        raise ShapeError(f"matmul batch ranks differ: {a.shape} @ {b.shape}")
    if a.data.ndim == b.data.ndim and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul batch dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(grad):
        if a._track():
            a._accumulate(_sum_to_shape(grad @ np.swapaxes(b.data, -1, -2), a.shape))
        if b._track():
            b._accumulate(_sum_to_shape(np.swapaxes(a.data, -1, -2) @ grad, b.shape))

    return _node(data, (a, b), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    data = np.where(mask, a.data, 0.0)

    def backward(grad):
        if a._track():
            a._accumulate(grad * mask)

    return _node(data, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def backward(grad):
        if a._track():
            a._accumulate(grad * (1.0 - data * data))

    return _node(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(grad):
        if a._track():
            a._accumulate(grad * data)

    return _node(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise NumericError("log of a non-positive value")
    data = np.log(a.data)

    def backward(grad):
        if a._track():
            a._accumulate(grad / a.data)

    return _node(data, (a,), backward)


def square(a: Tensor) -> Tensor:
    data = a.data * a.data

    def backward(grad):
        if a._track():
            a._accumulate(grad * 2.0 * a.data)

    return _node(data, (a,), backward)


def reduce_sum(a: Tensor, axis=None) -> Tensor:
    data = a.data.sum(axis=axis)

    def backward(grad):
        if not a._track():
            return
        if axis is None:
            a._accumulate(np.full(a.shape, float(grad)))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(grad, axis), a.shape).copy())

    return _node(data, (a,), backward)


def reduce_mean(a: Tensor, axis=None) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return scale(reduce_sum(a, axis), 1.0 / count)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = a.data.reshape(shape)

    def backward(grad):
        if a._track():
            a._accumulate(grad.reshape(a.shape))

    return _node(data, (a,), backward)


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    data = np.swapaxes(a.data, ax1, ax2)

    def backward(grad):
        if a._track():
            a._accumulate(np.swapaxes(grad, ax1, ax2))

    return _node(data, (a,), backward)


def slice_view(a: Tensor, idx) -> Tensor:
    """Basic slicing only; gradients scatter back into a zero buffer."""
    data = a.data[idx]

    def backward(grad):
        if a._track():
            buf = np.zeros(a.shape)
            buf[idx] = grad
            a._accumulate(buf)

    return _node(np.array(data, copy=True), (a,), backward)


def concat(parts: list[Tensor], axis: int) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if part._track():
                index = [slice(None)] * grad.ndim
                index[axis] = slice(lo, hi)
                part._accumulate(grad[tuple(index)])

    return _node(data, tuple(parts), backward)


def gather_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup ``table[indices]`` with duplicate-safe scatter-add backward.

    ``indices`` is an integer array of any shape; output shape is
    ``indices.shape + table.shape[1:]``.  Used for token embedding tables.
    """
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("gather_rows indices must be integers")
    if np.any(idx < 0) or np.any(idx >= table.shape[0]):
        raise ShapeError(f"gather_rows index out of range for table with {table.shape[0]} rows")
    data = table.data[idx]

    def backward(grad):
        if table._track():
            buf = np.zeros(table.shape)
            np.add.at(buf, idx, grad)
            table._accumulate(buf)

    return _node(data, (table,), backward)


def take_axis(a: Tensor, indices: np.ndarray, axis: int) -> Tensor:
    """Select positions along one axis (``numpy.take`` semantics)."""
    idx = np.asarray(indices)
    data = np.take(a.data, idx, axis=axis)

    def backward(grad):
        if a._track():
            buf = np.zeros(a.shape)
            np.add.at(buf, (slice(None),) * axis + (idx,), grad)
            a._accumulate(buf)

    return _node(data, (a,), backward)


def select_last_axis(a: Tensor, indices: np.ndarray) -> Tensor:
    """Pick one entry per row along the last axis, e.g. chosen-action scores.

    ``indices`` must match ``a.shape[:-1]``; the output drops the last axis.
    """
    idx = np.asarray(indices)
    if idx.shape != a.shape[:-1]:
        raise ShapeError(f"select indices shape {idx.shape} != leading {a.shape[:-1]}")
    if np.any(idx < 0) or np.any(idx >= a.shape[-1]):
        raise ShapeError("select index out of range on last axis")
    grid = tuple(np.indices(idx.shape)) + (idx,)
    data = a.data[grid]

    def backward(grad):
        if a._track():
            buf = np.zeros(a.shape)
            np.add.at(buf, grid, grad)
            a._accumulate(buf)

    return _node(data, (a,), backward)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; ties route gradient to the first operand."""
    if a.shape != b.shape and a.data.size != 1 and b.data.size != 1:
        raise ShapeError(f"maximum shapes {a.shape} and {b.shape} differ")
    mask = a.data >= b.data
    data = np.where(mask, a.data, b.data)

    def backward(grad):
        if a._track():
            a._accumulate(_sum_to_shape(grad * mask, a.shape))
        if b._track():
            b._accumulate(_sum_to_shape(grad * ~mask, b.shape))

    return _node(data, (a, b), backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties route gradient to the first operand."""
    if a.shape != b.shape and a.data.size != 1 and b.data.size != 1:
        raise ShapeError(f"minimum shapes {a.shape} and {b.shape} differ")
    mask = a.data <= b.data
    data = np.where(mask, a.data, b.data)

    def backward(grad):
        if a._track():
            a._accumulate(_sum_to_shape(grad * mask, a.shape))
        if b._track():
            b._accumulate(_sum_to_shape(grad * ~mask, b.shape))

    return _node(data, (a, b), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; zero gradient outside the open interval."""
    data = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)

    def backward(grad):
        if a._track():
            a._accumulate(grad * inside)

    return _node(data, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Fused softmax with the standard Jacobian-vector backward."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(grad):
        if a._track():
            inner = (grad * data).sum(axis=axis, keepdims=True)
            a._accumulate((grad - inner) * data)

    return _node(data, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    soft = np.exp(data)

    def backward(grad):
        if a._track():
            a._accumulate(grad - soft * grad.sum(axis=axis, keepdims=True))

    return _node(data, (a,), backward)


def huber(residual: Tensor, delta: float = 1.0) -> Tensor:
    """Huber penalty of a residual: quadratic inside ``delta``, linear outside.

    d/dr is clip(r, -delta, delta), which keeps finite-difference checks
    clean away from the |r| == delta seams.
    """
    if delta <= 0:
        raise ShapeError(f"huber delta must be positive, got {delta}")
    r = residual.data
    absr = np.abs(r)
    data = np.where(absr <= delta, 0.5 * r * r, delta * (absr - 0.5 * delta))

    def backward(grad):
        if residual._track():
            residual._accumulate(grad * np.clip(r, -delta, delta))

    return _node(data, (residual,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError(f"layer_norm affine shapes {gain.shape}/{bias.shape} != ({x.shape[-1]},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = xhat * gain.data + bias.data

    def backward(grad):
        if gain._track():
            gain._accumulate((grad * xhat).reshape(-1, x.shape[-1]).sum(axis=0))
        if bias._track():
            bias._accumulate(grad.reshape(-1, x.shape[-1]).sum(axis=0))
        if x._track():
            dxhat = grad * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate((dxhat - m1 - xhat * m2) * inv)

    return _node(data, (x, gain, bias), backward)
