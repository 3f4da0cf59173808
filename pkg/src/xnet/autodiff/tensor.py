"""Reverse-mode autodiff core: Tensor, Tape, and elementwise/reduction ops.

Everything is float64. Ops record onto the innermost active Tape (entered
as a context manager); with no active tape a forward pass is pure and
allocates no graph state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class Tensor:
    """An n-dimensional float64 array that can participate in a gradient tape."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor holds non-finite values")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Convenience operators; same shape or python-scalar operands only.
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else add_const(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else add_const(self, -other)

    def __rsub__(self, other):
        return rsub_const(self, other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else mul_const(self, other)

    def __rmul__(self, other):
        return mul_const(self, other)

    def __neg__(self):
        return mul_const(self, -1.0)


@dataclass
class TapeNode:
    """One recorded operation: inputs, output, and its backward rule.

    ``backward`` maps the output gradient to one gradient array per input
    (None for inputs that need no gradient).
    """

    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], tuple]


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Execution-ordered operation record; execution order is topological."""

    def __init__(self):
        self.nodes: list[TapeNode] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> bool:
        assert _TAPE_STACK.pop() is self
        return False

    def __len__(self) -> int:
        return len(self.nodes)

    def clear(self) -> None:
        self.nodes.clear()


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def record(inputs: Sequence[Tensor], out: Tensor, backward) -> None:
    """Attach ``out`` to the active tape if any input participates in grads."""
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.nodes.append(TapeNode(tuple(inputs), out, backward))


def backward(loss: Tensor, tape: Tape, retain: bool = False) -> None:
    """Populate ``grad`` on every requires_grad tensor reachable from ``loss``.

    Grad fields of all tensors touched by the tape are reset first, so each
    call yields exactly d(loss)/d(tensor). With ``retain`` the recorded ops
    are kept for another pass; by default the tape is cleared.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not any(node.output is loss for node in tape.nodes):
        raise ValueError("loss is not an output recorded on this tape")
    for node in tape.nodes:
        node.output.grad = None
        for t in node.inputs:
            t.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g = node.output.grad
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            inp.grad = gi if inp.grad is None else inp.grad + gi
    if not retain:
        tape.clear()


# ---------------------------------------------------------------------------
# elementwise ops


def _binary_check(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "add")
    out = Tensor(a.data + b.data)
    record((a, b), out, lambda g: (g, g))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "sub")
    out = Tensor(a.data - b.data)
    record((a, b), out, lambda g: (g, -g))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _binary_check(a, b, "mul")
    out = Tensor(a.data * b.data)
    record((a, b), out, lambda g: (g * b.data, g * a.data))
    return out


def add_const(x: Tensor, c: float) -> Tensor:
    out = Tensor(x.data + float(c))
    record((x,), out, lambda g: (g,))
    return out


def mul_const(x: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(x.data * c)
    record((x,), out, lambda g: (g * c,))
    return out


def rsub_const(x: Tensor, c: float) -> Tensor:
    """c - x elementwise."""
    out = Tensor(float(c) - x.data)
    record((x,), out, lambda g: (-g,))
    return out


def square(x: Tensor) -> Tensor:
    out = Tensor(x.data * x.data)
    record((x,), out, lambda g: (2.0 * x.data * g,))
    return out


def exp(x: Tensor) -> Tensor:
    out = Tensor(np.exp(x.data))
    record((x,), out, lambda g: (out.data * g,))
    return out


def log_clamped(x: Tensor, floor: float = 1e-8) -> Tensor:
    """log(max(x, floor)); gradient is zero where the clamp binds."""
    clamped = np.maximum(x.data, floor)
    out = Tensor(np.log(clamped))
    mask = x.data >= floor

    def bwd(g):
        return (g * mask / clamped,)

    record((x,), out, bwd)
    return out


def minimum_const(x: Tensor, c: float) -> Tensor:
    """min(x, c) elementwise; subgradient zero where the cap binds."""
    out = Tensor(np.minimum(x.data, c))
    mask = x.data < c

    def bwd(g):
        return (g * mask,)

    record((x,), out, bwd)
    return out


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))
    record((x,), out, lambda g: ((1.0 - out.data * out.data) * g,))
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = Tensor(1.0 / (1.0 + np.exp(-x.data)))
    record((x,), out, lambda g: (out.data * (1.0 - out.data) * g,))
    return out


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    scale = np.where(x.data >= 0.0, 1.0, slope)
    out = Tensor(x.data * scale)
    record((x,), out, lambda g: (g * scale,))
    return out


def activation(x: Tensor, kind: str) -> Tensor:
    """Dispatch by name: tanh | sigmoid | leaky_relu (slope 0.2)."""
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "leaky_relu":
        return leaky_relu(x)
    raise ValueError(f"unknown activation kind: {kind!r}")


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum())
    record((x,), out, lambda g: (np.full_like(x.data, float(g)),))
    return out


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    out = Tensor(x.data.mean())
    record((x,), out, lambda g: (np.full_like(x.data, float(g) / n),))
    return out


def mean_over(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Mean over ``axes`` (no keepdims)."""
    count = int(np.prod([x.shape[a] for a in axes]))
    out = Tensor(x.data.mean(axis=axes))

    def bwd(g):
        g_exp = np.expand_dims(g, axes)
        return (np.broadcast_to(g_exp / count, x.shape).copy(),)

    record((x,), out, bwd)
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.data.reshape(shape))
    record((x,), out, lambda g: (g.reshape(x.shape),))
    return out


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    record(tuple(parts), out, bwd)
    return out


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(x.data[start:stop].copy())

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        return (gx,)

    record((x,), out, bwd)
    return out
