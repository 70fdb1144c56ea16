"""Dense float64 tensors with reverse-mode automatic differentiation.

Everything is recorded on a global tape as the forward pass runs; calling
:func:`backward` on a scalar loss replays the tape in reverse, fills in
``.grad`` for every tensor that requires it, and retires the tape.  A tape
can be consumed once only; a second ``backward`` raises instead of silently
double-accumulating.

Broadcasting follows numpy's trailing-axis rules.  Binary ops with
incompatible shapes raise :class:`ShapeError` naming both shapes.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "TapeError",
    "tensor",
    "elementwise",
    "reduce",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "exp",
    "log",
    "sqrt",
    "sin",
    "cos",
    "arctan",
    "sigmoid",
    "silu",
    "relu",
    "matmul",
    "reshape",
    "transpose",
    "tsum",
    "tmean",
    "tmax",
    "softmax_cross_entropy",
    "mse_loss",
    "backward",
    "grad_check",
    "no_grad",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class TapeError(RuntimeError):
    """Raised on tape misuse (double backward, foreign-tape loss, ...)."""


class Node:
    """One recorded operation: the output tensor plus per-input vjp rules."""

    __slots__ = ("out", "vjps")

    def __init__(self, out: "Tensor", vjps):
        self.out = out
        self.vjps = vjps  # list of (input_tensor, fn(grad_out) -> ndarray)


class Tape:
    """Ordered record of operations, consumed exactly once by backward()."""

    __slots__ = ("nodes", "consumed")

    def __init__(self):
        self.nodes: list[Node] = []
        self.consumed = False


_tape = Tape()
_grad_enabled = True


def active_tape() -> Tape:
    return _tape


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation, optimizer steps)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense n-dimensional float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = arr.copy(order="C")  # ascontiguousarray would upcast 0-d to 1-d
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and arrays are wrapped as constants
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

    def __pow__(self, exponent):
        return pow_scalar(self, exponent)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _record(out: Tensor, vjps: Sequence[tuple[Tensor, Callable]]) -> Tensor:
    if _grad_enabled:
        tracked = [(t, fn) for t, fn in vjps if t.requires_grad]
        if tracked:
            out.requires_grad = True
            node = Node(out, tracked)
            out.node = node
            _tape.nodes.append(node)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.shape} and {b.shape} are not broadcast-compatible"
        ) from None


# ---------------------------------------------------------------------------
# binary elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data)
    return _record(
        out,
        [
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(g, b.shape)),
        ],
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data)
    return _record(
        out,
        [
            (a, lambda g: _unbroadcast(g, a.shape)),
            (b, lambda g: _unbroadcast(-g, b.shape)),
        ],
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data)
    return _record(
        out,
        [
            (a, lambda g: _unbroadcast(g * b.data, a.shape)),
            (b, lambda g: _unbroadcast(g * a.data, b.shape)),
        ],
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = Tensor(a.data / b.data)
    return _record(
        out,
        [
            (a, lambda g: _unbroadcast(g / b.data, a.shape)),
            (b, lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.shape)),
        ],
    )


# ---------------------------------------------------------------------------
# unary elementwise


def neg(a: Tensor) -> Tensor:
    return _record(Tensor(-a.data), [(a, lambda g: -g)])


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _record(Tensor(y), [(a, lambda g: g * y)])


def log(a: Tensor) -> Tensor:
    return _record(Tensor(np.log(a.data)), [(a, lambda g: g / a.data)])


def sqrt(a: Tensor) -> Tensor:
    y = np.sqrt(a.data)
    return _record(Tensor(y), [(a, lambda g: g * 0.5 / y)])


def sin(a: Tensor) -> Tensor:
    return _record(Tensor(np.sin(a.data)), [(a, lambda g: g * np.cos(a.data))])


def cos(a: Tensor) -> Tensor:
    return _record(Tensor(np.cos(a.data)), [(a, lambda g: -g * np.sin(a.data))])


def arctan(a: Tensor) -> Tensor:
    return _record(
        Tensor(np.arctan(a.data)), [(a, lambda g: g / (1.0 + a.data * a.data))]
    )


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))
    return _record(Tensor(y), [(a, lambda g: g * y * (1.0 - y))])


def silu(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    y = a.data * s
    return _record(Tensor(y), [(a, lambda g: g * (s + y * (1.0 - s)))])


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)
    return _record(Tensor(y), [(a, lambda g: g * (a.data > 0.0))])


def pow_scalar(a: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    y = a.data**p
    return _record(Tensor(y), [(a, lambda g: g * p * a.data ** (p - 1.0))])


_UNARY = {
    "neg": neg,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "arctan": arctan,
    "sigmoid": sigmoid,
    "silu": silu,
    "relu": relu,
}

_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div}


def elementwise(op_kind: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch an elementwise op by name.

    Unary kinds: neg, exp, log, sqrt, sin, cos, arctan, sigmoid, silu, relu.
    Binary kinds (broadcasting): add, sub, mul, div.
    """
    if op_kind in _UNARY:
        if b is not None:
            raise ValueError(f"{op_kind} is unary, got a second operand")
        return _UNARY[op_kind](a)
    if op_kind in _BINARY:
        if b is None:
            raise ValueError(f"{op_kind} is binary, second operand missing")
        return _BINARY[op_kind](a, b)
    raise ValueError(f"unknown elementwise op kind: {op_kind!r}")


# ---------------------------------------------------------------------------
# matmul / shape ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data)
    return _record(
        out,
        [
            (a, lambda g: g @ b.data.T),
            (b, lambda g: a.data.T @ g),
        ],
    )


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = Tensor(a.data.reshape(shape))
    return _record(out, [(a, lambda g: g.reshape(a.shape))])


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = Tensor(np.ascontiguousarray(a.data.transpose(axes)))
    return _record(out, [(a, lambda g: g.transpose(inverse))])


# ---------------------------------------------------------------------------
# reductions


def _check_axis(a: Tensor, axis: int | None, op: str) -> None:
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"{op}: axis {axis} out of range for rank {a.ndim}")


def tsum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    _check_axis(a, axis, "sum")
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.shape).copy()
        ge = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(ge, a.shape).copy()

    return _record(out, [(a, vjp)])


def tmean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    _check_axis(a, axis, "mean")
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims))
    count = a.size if axis is None else a.shape[axis]

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g / count, a.shape).copy()
        ge = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(ge / count, a.shape).copy()

    return _record(out, [(a, vjp)])


def tmax(a: Tensor, axis: int | None = None) -> Tensor:
    """Max reduction; the gradient flows to the first maximal index on ties."""
    _check_axis(a, axis, "max")
    if axis is None:
        out = Tensor(a.data.max())
        flat_idx = int(np.argmax(a.data))

        def vjp(g):
            grad = np.zeros(a.size)
            grad[flat_idx] = np.asarray(g).reshape(())
            return grad.reshape(a.shape)

        return _record(out, [(a, vjp)])

    out = Tensor(a.data.max(axis=axis))
    arg = np.argmax(a.data, axis=axis)

    def vjp(g):
        grad = np.zeros(a.shape)
        idx = list(np.indices(out.shape))
        idx.insert(axis % a.ndim, arg)
        grad[tuple(idx)] = g
        return grad

    return _record(out, [(a, vjp)])


_REDUCE = {"sum": tsum, "mean": tmean, "max": tmax}


def reduce(op_kind: str, a: Tensor, axis: int | None = None) -> Tensor:
    """Dispatch a reduction (sum, mean, max) by name; drops the reduced axis."""
    if op_kind not in _REDUCE:
        raise ValueError(f"unknown reduce op kind: {op_kind!r}")
    return _REDUCE[op_kind](a, axis)


# ---------------------------------------------------------------------------
# losses


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], max-stabilized.

    Gradient is (softmax - onehot) / batch.
    """
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy expects B x K logits, got {logits.shape}")
    y = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if y.shape != (batch,):
        raise ShapeError(f"labels shape {y.shape} does not match batch {batch}")
    if y.size and (y.min() < 0 or y.max() >= classes):
        bad = y[(y < 0) | (y >= classes)][0]
        raise ValueError(f"label {bad} out of range [0, {classes})")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    expz = np.exp(z)
    probs = expz / expz.sum(axis=1, keepdims=True)
    logp = z - np.log(expz.sum(axis=1, keepdims=True))
    loss = -logp[np.arange(batch), y].mean()
    out = Tensor(loss)

    def vjp(g):
        grad = probs.copy()
        grad[np.arange(batch), y] -= 1.0
        return grad * (np.asarray(g).reshape(()) / batch)

    return _record(out, [(logits, vjp)])


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: shapes {pred.shape} and {target.shape} differ")
    diff = sub(pred, target)
    return tmean(mul(diff, diff))


# ---------------------------------------------------------------------------
# backward / checking


def backward(loss: Tensor) -> None:
    """Reverse sweep from a scalar loss; populates .grad, retires the tape."""
    global _tape
    if loss.size != 1:
        raise TapeError(f"backward expects a scalar loss, got shape {loss.shape}")
    tape = _tape
    if tape.consumed:
        raise TapeError("backward() already called on this tape")
    if loss.node is None or id(loss.node) not in {id(n) for n in tape.nodes}:
        raise TapeError("loss was not produced under the current tape")

    acc: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    tensors: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(tape.nodes):
        g = acc.get(id(node.out))
        if g is None:
            continue
        for inp, vjp in node.vjps:
            contrib = np.asarray(vjp(g), dtype=np.float64)
            key = id(inp)
            if key in acc:
                acc[key] = acc[key] + contrib
            else:
                acc[key] = contrib
                tensors[key] = inp
    for key, t in tensors.items():
        if t.requires_grad:
            grad = acc[key].reshape(t.shape)
            t.grad = grad.copy() if t.grad is None else t.grad + grad
    tape.consumed = True
    tape.nodes.clear()
    _tape = Tape()


def grad_check(
    f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5
) -> float:
    """Max relative error between analytic gradients and central differences.

    Relative error per entry is |analytic - numeric| / max(1, |numeric|).
    """
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = f(probe)
    backward(out)
    analytic = probe.grad.copy() if probe.grad is not None else np.zeros(probe.shape)

    numeric = np.zeros(probe.size)
    flat = probe.data.reshape(-1)
    with no_grad():
        for i in range(probe.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(probe).item()
            flat[i] = orig - h
            fm = f(probe).item()
            flat[i] = orig
            numeric[i] = (fp - fm) / (2.0 * h)
    numeric = numeric.reshape(probe.shape)
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
