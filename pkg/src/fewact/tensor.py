"""numpy-backed tensors with reverse-mode automatic differentiation.

Graphs are built eagerly: every operation closes over its parent nodes and a
vector-Jacobian callback, and ``backward`` replays those callbacks in reverse
topological order. float64 is the working dtype for training; float32 is
accepted for storage interop. All operations are deterministic for fixed
inputs.
"""

from __future__ import annotations

import contextlib
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense float array plus the graph edges needed for backprop.

    ``data`` is a row-major numpy array (f32 or f64). Tensors are treated as
    immutable once created; only optimizer steps mutate leaf ``data`` in
    place, outside any live graph.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _bad_item(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        a, b = self, _coerce(other)
        out = a.data + b.data

        def vjp(g):
            return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

        return _result(out, (a, b), vjp)

    __radd__ = __add__

    def __neg__(self):
        return _result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __mul__(self, other):
        a, b = self, _coerce(other)
        out = a.data * b.data

        def vjp(g):
            return (_unbroadcast(g * b.data, a.data.shape),
                    _unbroadcast(g * a.data, b.data.shape))

        return _result(out, (a, b), vjp)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, _coerce(other)
        out = a.data / b.data

        def vjp(g):
            return (_unbroadcast(g / b.data, a.data.shape),
                    _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return _result(out, (a, b), vjp)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise DomainError("only scalar exponents are supported")
        n = float(exponent)
        out = self.data ** n

        def vjp(g):
            return (g * n * self.data ** (n - 1.0),)

        return _result(out, (self,), vjp)

    def __matmul__(self, other):
        a, b = self, _coerce(other)
        if a.data.ndim < 2 or b.data.ndim < 2:
            raise ShapeError("matmul requires operands of rank >= 2")
        out = a.data @ b.data

        def vjp(g):
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
            return ga, gb

        return _result(out, (a, b), vjp)

    # -- shaping ------------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.data.shape
        return _result(self.data.reshape(shape), (self,), lambda g: (g.reshape(src),))

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.data.ndim)))
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return _result(self.data.transpose(axes), (self,),
                       lambda g: (g.transpose(inv),))

    @property
    def T(self):  # noqa: N802 - numpy-style alias
        return self.transpose()

    def __getitem__(self, key):
        out = self.data[key]

        def vjp(g):
            buf = np.zeros_like(self.data)
            buf[key] = g
            return (buf,)

        return _result(out, (self,), vjp)

    def take(self, indices, axis: int = 0):
        """Gather along ``axis``; duplicate indices accumulate gradient."""
        idx = np.asarray(indices, dtype=np.int64)
        out = np.take(self.data, idx, axis=axis)

        def vjp(g):
            buf = np.zeros_like(self.data)
            np.add.at(np.moveaxis(buf, axis, 0), idx, np.moveaxis(g, axis, 0))
            return (buf,)

        return _result(out, (self,), vjp)

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, self.data.shape).copy() if np.ndim(g) == 0
                        else np.full_like(self.data, g.reshape(())),)
            g2 = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(g2, self.data.shape).copy(),)

        return _result(out, (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        if count == 0:
            raise DomainError("mean over an empty axis")
        # divide (not multiply by reciprocal) to stay bit-identical to np.mean
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def amin(self, axis: int, keepdims: bool = False):
        return _extremum(self, axis, keepdims, np.argmin)

    def amax(self, axis: int, keepdims: bool = False):
        return _extremum(self, axis, keepdims, np.argmax)

    # -- elementwise --------------------------------------------------------

    def sqrt(self):
        root = np.sqrt(self.data)

        def vjp(g):
            # Subgradient 0 at exactly-zero inputs so identical-token distances
            # do not produce NaN; elsewhere the usual 0.5/sqrt(x).
            denom = np.where(root > 1e-12, root, np.inf)
            return (g * 0.5 / denom,)

        return _result(root, (self,), vjp)

    def exp(self):
        out = np.exp(self.data)
        return _result(out, (self,), lambda g: (g * out,))

    def log(self):
        return _result(np.log(self.data), (self,), lambda g: (g / self.data,))


# -- free functions ----------------------------------------------------------


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return data if isinstance(data, Tensor) and dtype is None else Tensor(data, requires_grad, dtype)


def zeros(shape, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [_coerce(t) for t in tensors]
    if not ts:
        raise DomainError("concat of an empty sequence")
    sizes = [t.data.shape[axis] for t in ts]
    out = np.concatenate([t.data for t in ts], axis=axis)

    def vjp(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return _result(out, tuple(ts), vjp)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = [_coerce(t) for t in tensors]
    if not ts:
        raise DomainError("stack of an empty sequence")
    out = np.stack([t.data for t in ts], axis=axis)

    def vjp(g):
        parts = np.split(g, len(ts), axis=axis)
        return tuple(p.squeeze(axis) for p in parts)

    return _result(out, tuple(ts), vjp)


def where(mask, a, b) -> Tensor:
    """Select ``a`` where ``mask`` else ``b``; ``mask`` is a constant."""
    m = np.asarray(mask, dtype=bool)
    ta, tb = _coerce(a), _coerce(b)
    out = np.where(m, ta.data, tb.data)

    def vjp(g):
        return (_unbroadcast(np.where(m, g, 0.0), ta.data.shape),
                _unbroadcast(np.where(m, 0.0, g), tb.data.shape))

    return _result(out, (ta, tb), vjp)


def softmax_last_axis(x) -> Tensor:
    """Numerically stable softmax over the last axis."""
    t = _coerce(x)
    if t.data.ndim == 0 or t.data.shape[-1] == 0:
        raise DomainError("softmax requires a non-empty last axis")
    z = t.data - t.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - inner),)

    return _result(s, (t,), vjp)


def backward(loss: Tensor, params: Sequence[Tensor] | None = None):
    """Backpropagate from a scalar ``loss``.

    Accumulated gradients land in ``.grad`` of every reachable node. When
    ``params`` is given, returns their gradients as numpy arrays in order,
    with zeros for parameters the loss does not depend on.
    """
    if loss.data.size != 1:
        raise DomainError("backward requires a scalar loss")
    order = _topo_order(loss)
    for node in order:
        node.grad = None
    if params is not None:
        for p in params:
            p.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._vjp is None:
            continue
        grads = node._vjp(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
    if params is not None:
        return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    return None


def uniform_param(rng: np.random.Generator, shape, fan_in: int,
                  dtype=np.float64) -> Tensor:
    """Trainable leaf initialized U[-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(float(fan_in))
    data = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return Tensor(data, requires_grad=True)


# -- internals ---------------------------------------------------------------


def _bad_item(t: Tensor):
    raise DomainError(f"item() on tensor of shape {t.data.shape}")


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, vjp) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _extremum(t: Tensor, axis: int, keepdims: bool, argfn):
    if t.data.shape[axis] == 0:
        raise DomainError("extremum over an empty axis")
    idx = argfn(t.data, axis=axis)
    picked = np.take_along_axis(t.data, np.expand_dims(idx, axis), axis=axis)
    out = picked if keepdims else picked.squeeze(axis)

    def vjp(g):
        buf = np.zeros_like(t.data)
        g2 = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(buf, np.expand_dims(idx, axis), g2, axis=axis)
        return (buf,)

    return _result(out, (t,), vjp)


def _topo_order(root: Tensor):
    """Post-order over the grad-requiring subgraph, parents before children."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order
