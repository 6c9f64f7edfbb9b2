"""Reverse-mode automatic differentiation over dense float64 arrays.

Every backward rule is written with the same differentiable operations used
in the forward pass, so gradients can themselves be differentiated when
``grad(..., create_graph=True)`` is requested. That is all the gradient
penalty needs: the critic's input gradient is built as a graph and its norm
is differentiated again with respect to the critic parameters.

Piecewise-linear activations (relu, leaky relu, clamp) use a constant mask in
their backward rule, so their second derivative is zero almost everywhere.
"""
from __future__ import annotations

import contextlib
import weakref
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def set_grad_enabled(flag: bool):
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = bool(flag)
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def no_grad():
    return set_grad_enabled(False)


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class GraphError(RuntimeError):
    """Raised when a gradient is requested from a graph that cannot supply it."""


BackwardFn = Callable[["Tensor"], Sequence["Tensor | None"]]


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "grad", "op", "__weakref__")

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: BackwardFn | None = None
        self.grad: np.ndarray | None = None
        self.op = "leaf"

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
        leaves = [n for n in _topological_order(self) if n.backward_fn is None]
        grads = grad(self, leaves, allow_unused=True)
        for leaf, g in zip(leaves, grads):
            leaf.grad = g.data.copy() if leaf.grad is None else leaf.grad + g.data

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        return mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents: tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.backward_fn = backward_fn
        out.op = op
    return out


# ---------------------------------------------------------------------------
# graph traversal
# ---------------------------------------------------------------------------

def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(
    output: Tensor,
    inputs: Iterable[Tensor],
    create_graph: bool = False,
    allow_unused: bool = False,
) -> list[Tensor]:
    """Gradients of a scalar ``output`` with respect to ``inputs``.

    With ``create_graph`` the returned tensors are nodes of a new graph and
    can be differentiated again.
    """
    inputs = list(inputs)
    if output.data.size != 1:
        raise GraphError(f"gradient needs a scalar output, got shape {output.shape}")
    if not output.requires_grad:
        raise GraphError("output does not depend on any tensor that requires grad")

    order = _topological_order(output)
    grads: dict[int, Tensor] = {id(output): Tensor(np.ones_like(output.data))}
    with set_grad_enabled(create_graph):
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node.backward_fn is None:
                continue
            parent_grads = node.backward_fn(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else add(grads[key], pg)

    result = []
    for x in inputs:
        g = grads.get(id(x))
        if g is None:
            if not allow_unused:
                raise GraphError("an input is not reachable from the output")
            g = Tensor(np.zeros_like(x.data))
        result.append(g)
    return result


# ---------------------------------------------------------------------------
# shape plumbing
# ---------------------------------------------------------------------------

def sum_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Reduce a broadcast result back to ``shape`` (adjoint of broadcast_to)."""
    if x.shape == tuple(shape):
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and x.shape[i + lead] != 1
    )
    data = x.data.sum(axis=axes, keepdims=True)
    if lead:
        data = data.reshape(data.shape[lead:])
    src_shape = x.shape
    return _make(data, (x,), lambda g: (broadcast_to(g, src_shape),), "sum_to")


def broadcast_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if x.shape == tuple(shape):
        return x
    src_shape = x.shape
    data = np.broadcast_to(x.data, shape).copy()
    return _make(data, (x,), lambda g: (sum_to(g, src_shape),), "broadcast_to")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    src_shape = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (reshape(g, src_shape),), "reshape")


def transpose(x: Tensor) -> Tensor:
    return _make(x.data.T, (x,), lambda g: (transpose(g),), "transpose")


def take(x: Tensor, index) -> Tensor:
    src_shape = x.shape
    return _make(x.data[index], (x,), lambda g: (scatter(g, index, src_shape),), "take")


def scatter(x: Tensor, index, shape: tuple[int, ...]) -> Tensor:
    """Zero array of ``shape`` with ``x`` added at ``index`` (adjoint of take)."""
    data = np.zeros(shape)
    np.add.at(data, index, x.data)
    return _make(data, (x,), lambda g: (take(g, index),), "scatter")


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    data = np.concatenate([x.data for x in xs], axis=axis)
    bounds = np.cumsum([0] + [x.shape[axis] for x in xs])
    ndim = data.ndim
    ax = axis % ndim

    def backward(g):
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = [slice(None)] * ndim
            idx[ax] = slice(int(lo), int(hi))
            out.append(take(g, tuple(idx)))
        return out

    return _make(data, tuple(xs), backward, "concat")


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (sum_to(g, sa), sum_to(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (sum_to(g, sa), sum_to(neg(g), sb)), "sub")


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (neg(g),), "neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        ga = sum_to(mul(g, b), sa) if a.requires_grad else None
        gb = sum_to(mul(g, a), sb) if b.requires_grad else None
        return ga, gb

    return _make(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        ga = sum_to(div(g, b), sa) if a.requires_grad else None
        gb = sum_to(neg(div(mul(g, a), mul(b, b))), sb) if b.requires_grad else None
        return ga, gb

    return _make(a.data / b.data, (a, b), backward, "div")


def power(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)

    def backward(g):
        if exponent == 2.0:
            return (mul(g, mul(a, 2.0)),)
        return (mul(g, mul(power(a, exponent - 1.0), exponent)),)

    return _make(a.data ** exponent, (a,), backward, "power")


def square(a: Tensor) -> Tensor:
    return power(a, 2.0)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        ga = matmul(g, transpose(b)) if a.requires_grad else None
        gb = matmul(transpose(a), g) if b.requires_grad else None
        return ga, gb

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    src_shape = x.shape
    data = x.data.sum(axis=axis, keepdims=keepdims)
    if axis is None:
        kept = (1,) * x.ndim
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(a % x.ndim for a in axes)
        kept = tuple(1 if i in axes else s for i, s in enumerate(src_shape))

    def backward(g):
        return (broadcast_to(reshape(g, kept), src_shape),)

    return _make(data, (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = x.data.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([x.shape[a] for a in axes]))
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------
# elementwise nonlinearities
# ---------------------------------------------------------------------------

def exp(x: Tensor) -> Tensor:
    # weak, so the output and its own backward closure do not form a cycle
    out_holder: list[weakref.ref] = []

    def backward(g):
        return (mul(g, out_holder[0]()),)

    out = _make(np.exp(x.data), (x,), backward, "exp")
    out_holder.append(weakref.ref(out))
    return out


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="raise", invalid="raise"):
        try:
            data = np.log(x.data)
        except FloatingPointError as exc:
            raise FloatingPointError("log of a non-positive value") from exc
    return _make(data, (x,), lambda g: (div(g, x),), "log")


def sqrt(x: Tensor) -> Tensor:
    data = np.sqrt(x.data)
    # weak, so the output and its own backward closure do not form a cycle
    out_holder: list[weakref.ref] = []

    def backward(g):
        if np.any(out_holder[0]().data == 0.0):
            raise GraphError("derivative of sqrt at zero is unbounded")
        return (div(mul(g, 0.5), out_holder[0]()),)

    out = _make(data, (x,), backward, "sqrt")
    out_holder.append(weakref.ref(out))
    return out


def tanh(x: Tensor) -> Tensor:
    # weak, so the output and its own backward closure do not form a cycle
    out_holder: list[weakref.ref] = []

    def backward(g):
        y = out_holder[0]()
        return (mul(g, sub(1.0, mul(y, y))),)

    out = _make(np.tanh(x.data), (x,), backward, "tanh")
    out_holder.append(weakref.ref(out))
    return out


def sigmoid(x: Tensor) -> Tensor:
    # weak, so the output and its own backward closure do not form a cycle
    out_holder: list[weakref.ref] = []

    def backward(g):
        y = out_holder[0]()
        return (mul(g, mul(y, sub(1.0, y))),)

    data = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    out = _make(data, (x,), backward, "sigmoid")
    out_holder.append(weakref.ref(out))
    return out


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = np.where(x.data > 0, 1.0, slope)
    return _make(x.data * mask, (x,), lambda g: (mul(g, mask),), "leaky_relu")


def relu(x: Tensor) -> Tensor:
    mask = (x.data > 0).astype(np.float64)
    return _make(x.data * mask, (x,), lambda g: (mul(g, mask),), "relu")


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); the gradient is zero where the floor is active."""
    mask = (x.data > floor).astype(np.float64)
    data = np.maximum(x.data, floor)
    return _make(data, (x,), lambda g: (mul(g, mask),), "clamp_min")


# ---------------------------------------------------------------------------
# per-attribute softmax
# ---------------------------------------------------------------------------

def block_indicator(blocks: Sequence[tuple[int, int]]) -> np.ndarray:
    """W x K matrix with a 1 where column w belongs to block k."""
    width = blocks[-1][1]
    ind = np.zeros((width, len(blocks)))
    for k, (lo, hi) in enumerate(blocks):
        ind[lo:hi, k] = 1.0
    return ind


def block_softmax(x: Tensor, blocks: Sequence[tuple[int, int]]) -> Tensor:
    """Softmax applied independently inside each column block."""
    data = np.empty_like(x.data)
    for lo, hi in blocks:
        z = x.data[:, lo:hi]
        z = np.exp(z - z.max(axis=1, keepdims=True))
        data[:, lo:hi] = z / z.sum(axis=1, keepdims=True)
    ind = block_indicator(blocks)
    # weak, so the output and its own backward closure do not form a cycle
    out_holder: list[weakref.ref] = []

    def backward(g):
        y = out_holder[0]()
        gy = mul(g, y)
        per_block = matmul(matmul(gy, ind), ind.T)
        return (mul(y, sub(g, per_block)),)

    out = _make(data, (x,), backward, "block_softmax")
    out_holder.append(weakref.ref(out))
    return out


def safe_sqrt(x: Tensor, eps: float = 1e-8) -> Tensor:
    """sqrt(max(x, 0)) whose derivative uses max(sqrt(x), eps) in the denominator."""
    data = np.sqrt(np.maximum(x.data, 0.0))
    # weak, so the output and its own backward closure do not form a cycle
    out_holder: list[weakref.ref] = []

    def backward(g):
        return (div(mul(g, 0.5), clamp_min(out_holder[0](), eps)),)

    out = _make(data, (x,), backward, "safe_sqrt")
    out_holder.append(weakref.ref(out))
    return out
