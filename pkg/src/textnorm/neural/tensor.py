"""Minimal reverse-mode autodiff over dense numpy arrays.

A Tensor records the operation that produced it (parent tensors plus a
backward closure); ``backward()`` walks that implicit compute graph once in
reverse topological order. Float32 is the training/inference dtype;
gradient checking runs the same code in float64.
"""

from __future__ import annotations

import numpy as np

Arrayish = "Tensor | np.ndarray | float | int"


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A node in the compute graph: a value, optionally a gradient slot,
    and links to the tensors it was computed from."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    def item(self) -> float:
        return float(self.data)

    # operator sugar; non-Tensor operands are constants
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor)
                   else -np.asarray(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self) -> None:
        """Accumulate gradients of this (scalar) tensor w.r.t. the graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)
            if node._parents:
                # interior values are not needed after their backward ran
                node.grad = None


class Parameter(Tensor):
    """A named leaf tensor that optimizers update."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(np.asarray(data), requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"

    def zero_grad(self) -> None:
        if self.grad is None or self.grad.shape != self.data.shape:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)


def _result(data, parents, backward):
    parents = tuple(p for p in parents if isinstance(p, Tensor) and p.requires_grad)
    out = Tensor(data, requires_grad=bool(parents))
    if parents:
        out._parents = parents
        out._backward = backward
    return out


def _accum(t, grad):
    if isinstance(t, Tensor) and t.requires_grad:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += grad


def _data(x, like=None):
    if isinstance(x, Tensor):
        return x.data
    dtype = like.dtype if like is not None else None
    return np.asarray(x, dtype=dtype)


def add(a, b) -> Tensor:
    ad = _data(a)
    bd = _data(b, like=a if isinstance(a, Tensor) else None)
    out_data = ad + bd

    def backward(g):
        _accum(a, _unbroadcast(g, ad.shape))
        _accum(b, _unbroadcast(g, bd.shape))

    return _result(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    ad = _data(a)
    bd = _data(b, like=a if isinstance(a, Tensor) else None)
    out_data = ad * bd

    def backward(g):
        _accum(a, _unbroadcast(g * bd, ad.shape))
        _accum(b, _unbroadcast(g * ad, bd.shape))

    return _result(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    ad, bd = _data(a), _data(b)
    out_data = ad @ bd

    def backward(g):
        _accum(a, g @ bd.T)
        _accum(b, ad.T @ g)

    return _result(out_data, (a, b), backward)


def sigmoid(x: Tensor) -> Tensor:
    xd = _data(x)
    out_data = np.empty_like(xd)
    pos = xd >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accum(x, g * out_data * (1.0 - out_data))

    return _result(out_data, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(_data(x))

    def backward(g):
        _accum(x, g * (1.0 - out_data * out_data))

    return _result(out_data, (x,), backward)


def concat(tensors: list, axis: int = -1) -> Tensor:
    datas = [_data(t) for t in tensors]
    out_data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, end in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(start, end)
            _accum(t, g[tuple(index)])

    return _result(out_data, tuple(tensors), backward)


def stack0(tensors: list) -> Tensor:
    out_data = np.stack([_data(t) for t in tensors], axis=0)

    def backward(g):
        for i, t in enumerate(tensors):
            _accum(t, g[i])

    return _result(out_data, tuple(tensors), backward)


def embed(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather: out[k] = table[ids[k]]."""
    ids = np.asarray(ids)
    out_data = _data(table)[ids]

    def backward(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids, g)

    return _result(out_data, (table,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = _data(x)
    shifted = xd - xd.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        _accum(x, (g - inner) * out_data)

    return _result(out_data, (x,), backward)


def cross_entropy_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Per-row negative log softmax probability of the target id.

    logits: (B, V); targets: (B,) int ids; returns (B,) losses.
    """
    ld = _data(logits)
    targets = np.asarray(targets)
    rows = np.arange(ld.shape[0])
    shifted = ld - ld.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    out_data = logz - shifted[rows, targets]

    def backward(g):
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[rows, targets] -= 1.0
        _accum(logits, probs * g[:, None])

    return _result(out_data, (logits,), backward)


def attn_scores(u: Tensor, states: Tensor) -> Tensor:
    """scores[b, t] = <u[b], states[t, b]> for u (B, e), states (T, B, e)."""
    ud, sd = _data(u), _data(states)
    out_data = np.einsum("be,tbe->bt", ud, sd)

    def backward(g):
        _accum(u, np.einsum("bt,tbe->be", g, sd))
        _accum(states, np.einsum("bt,be->tbe", g, ud))

    return _result(out_data, (u, states), backward)


def attn_context(alpha: Tensor, states: Tensor) -> Tensor:
    """context[b] = sum_t alpha[b, t] * states[t, b] -> (B, e)."""
    ad, sd = _data(alpha), _data(states)
    out_data = np.einsum("bt,tbe->be", ad, sd)

    def backward(g):
        _accum(alpha, np.einsum("be,tbe->bt", g, sd))
        _accum(states, np.einsum("bt,be->tbe", ad, g))

    return _result(out_data, (alpha, states), backward)


def reshape(x: Tensor, shape) -> Tensor:
    xd = _data(x)
    out_data = xd.reshape(shape)

    def backward(g):
        _accum(x, g.reshape(xd.shape))

    return _result(out_data, (x,), backward)


def transpose2(x: Tensor) -> Tensor:
    out_data = _data(x).T

    def backward(g):
        _accum(x, g.T)

    return _result(out_data, (x,), backward)


def tsum(x: Tensor) -> Tensor:
    xd = _data(x)
    out_data = np.asarray(xd.sum())

    def backward(g):
        _accum(x, np.broadcast_to(g, xd.shape).astype(xd.dtype, copy=False))

    return _result(out_data, (x,), backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator,
            training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not training or p <= 0.0:
        return x
    xd = _data(x)
    mask = (rng.random(xd.shape) >= p).astype(xd.dtype) / (1.0 - p)
    return mul(x, mask)
