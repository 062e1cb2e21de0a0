"""Minimal reverse-mode automatic differentiation on dense float64 arrays.

A ``Tensor`` wraps a numpy array and records the primitive ops applied to it.
``backward(loss)`` walks the recorded graph in reverse topological order and
accumulates exact gradients into ``.grad`` of every reachable leaf.  All data
is 64-bit; summation orders are fixed so repeated runs are bit-identical.

Gradient recording can be switched off wholesale with ``no_grad()`` which is
what rollout workers use: the same forward code then runs without building a
graph.
"""

from __future__ import annotations

import numpy as np

_GRAD_ENABLED = True
_DEBUG_CHECK_FINITE = False


class no_grad:
    """Context manager that disables graph recording inside its scope."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def set_debug_check_finite(flag: bool) -> None:
    """When enabled, every primitive raises if it produces a non-finite value."""
    global _DEBUG_CHECK_FINITE
    _DEBUG_CHECK_FINITE = bool(flag)


def _asarray(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad", "_grad_owned")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = _asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self._grad_owned = False
        if _DEBUG_CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite value produced by a tensor op")

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None
        self._grad_owned = False

    def _accum(self, g: np.ndarray) -> None:
        # The first contribution is adopted by reference (it may alias a
        # child's gradient, which is final by the time it reaches us); a
        # second contribution forces a fresh owned buffer.  Nothing in the
        # engine mutates a gradient after it is propagated.
        if self.grad is None:
            self.grad = g
            self._grad_owned = False
        elif self._grad_owned:
            self.grad += g
        else:
            self.grad = self.grad + g
            self._grad_owned = True

    # operator sugar; every op routes through the module-level primitives
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(*parents: Tensor) -> bool:
    return _GRAD_ENABLED and any(p.requires_grad or p._parents for p in parents)


def _make(data, parents, backward) -> Tensor:
    if backward is not None and _tracked(*parents):
        return Tensor(data, parents=parents, backward=backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bwd(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bwd(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bwd(g):
        a._accum(_unbroadcast(g * b.data, a.shape))
        b._accum(_unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data / b.data

    def bwd(g):
        a._accum(_unbroadcast(g / b.data, a.shape))
        b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        a._accum(-g)

    return _make(-a.data, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def bwd(g):
        a._accum(g @ b.data.T)
        b._accum(a.data.T @ g)

    return _make(out_data, (a, b), bwd)


def pow_const(a: Tensor, p: float) -> Tensor:
    out_data = a.data**p

    def bwd(g):
        a._accum(g * p * a.data ** (p - 1))

    return _make(out_data, (a,), bwd)


def square(a: Tensor) -> Tensor:
    return pow_const(a, 2.0)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def bwd(g):
        a._accum(g * 0.5 / out_data)

    return _make(out_data, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def bwd(g):
        a._accum(g * out_data)

    return _make(out_data, (a,), bwd)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def bwd(g):
        a._accum(g / a.data)

    return _make(out_data, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bwd(g):
        a._accum(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    out_data = np.where(mask, a.data, 0.0)

    def bwd(g):
        a._accum(g * mask)

    return _make(out_data, (a,), bwd)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            a._accum(np.broadcast_to(g, a.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accum(np.broadcast_to(gg, a.shape).copy())

    return _make(out_data, (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), Tensor(1.0 / n))


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; on exact ties the gradient flows to `a`."""
    take_a = a.data >= b.data
    out_data = np.where(take_a, a.data, b.data)

    def bwd(g):
        a._accum(_unbroadcast(g * take_a, a.shape))
        b._accum(_unbroadcast(g * ~take_a, b.shape))

    return _make(out_data, (a, b), bwd)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; on exact ties the gradient flows to `a`."""
    take_a = a.data <= b.data
    out_data = np.where(take_a, a.data, b.data)

    def bwd(g):
        a._accum(_unbroadcast(g * take_a, a.shape))
        b._accum(_unbroadcast(g * ~take_a, b.shape))

    return _make(out_data, (a, b), bwd)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    out_data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def bwd(g):
        a._accum(g * inside)

    return _make(out_data, (a,), bwd)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows a[idx]; backward scatter-adds into the source rows."""
    idx = np.asarray(idx, dtype=np.intp)
    out_data = a.data[idx]

    def bwd(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        a._accum(acc)

    return _make(out_data, (a,), bwd)


def _segment_sum_data(values: np.ndarray, seg_ids: np.ndarray, num_segments: int
                      ) -> np.ndarray:
    out = np.zeros((num_segments,) + values.shape[1:], dtype=np.float64)
    if values.shape[0] == 0:
        return out
    if seg_ids.size == 0 or np.all(seg_ids[1:] >= seg_ids[:-1]):
        # sorted ids: contiguous runs reduce with reduceat (fast path)
        uniq, starts = np.unique(seg_ids, return_index=True)
        out[uniq] = np.add.reduceat(values, starts, axis=0)
    else:
        np.add.at(out, seg_ids, values)
    return out


def segment_sum(a: Tensor, seg_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of `a` into `num_segments` buckets given by `seg_ids`.

    The reduction algorithm is fixed for a fixed row order, so results are
    bit-reproducible across runs.
    """
    seg_ids = np.asarray(seg_ids, dtype=np.intp)
    out_data = _segment_sum_data(a.data, seg_ids, num_segments)

    def bwd(g):
        a._accum(g[seg_ids])

    return _make(out_data, (a,), bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = list(tensors)
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t._accum(g[tuple(sl)])

    return _make(out_data, tuple(tensors), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def bwd(g):
        a._accum(g.reshape(a.shape))

    return _make(out_data, (a,), bwd)


def backward(out: Tensor) -> None:
    """Run reverse-mode accumulation from a scalar output."""
    if out.data.size != 1:
        raise ValueError(f"backward requires a scalar output, got shape {out.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    out.grad = np.ones_like(out.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
