"""
autograd.py

Dense float64 arrays with tape-based reverse-mode automatic differentiation.

Every learnable weight and every intermediate activation of the model is an
Array. While a Tape is active, each primitive applied to an Array that
requires gradients appends one record (inputs, output, local-derivative
closure) to the tape. Replaying the records in reverse fills the .grad of the
leaf Arrays.

Design goals:
- Deterministic: identical tapes give bitwise-identical gradients
- Small: only the primitives the evidential model needs
- Thread-confined: the active tape lives in thread-local storage, so frozen
  parameter sets can be shared by several threads doing inference
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special as sp

from edict.numerics import special

ArrayLike = Union["Array", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_local = threading.local()


def _tape_stack() -> List["Tape"]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    """Return the innermost tape entered on this thread, or None."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Array:
    """A float64 ndarray plus an optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "_leaf")
    # make `ndarray <op> Array` dispatch to Array's reflected operators
    __array_ufunc__ = None

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Array):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._leaf = True

    # --- plain accessors ---------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element Array, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Array":
        return Array(self.data.copy())

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Array(shape={self.shape}, requires_grad={self.requires_grad})"

    # --- operators ---------------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Array":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Array":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Array":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Array":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Array":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Array":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Array":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Array":
        return div(other, self)

    def __neg__(self) -> "Array":
        return neg(self)

    def __matmul__(self, other: ArrayLike) -> "Array":
        return matmul(self, other)

    def __pow__(self, exponent: float) -> "Array":
        return power(self, exponent)

    def __getitem__(self, key) -> "Array":
        return take(self, key)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Array":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Array":
        return mean(self, axis=axis, keepdims=keepdims)


@dataclass
class TapeRecord:
    inputs: Tuple[Array, ...]
    output: Array
    backward: BackwardFn
    op: str


class Tape:
    """
    Ordered record of the primitives applied during one forward pass.

    Usage:
        with Tape() as tape:
            loss = f(params)
        tape.backward(loss)
    """

    def __init__(self) -> None:
        self.records: List[TapeRecord] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    def record(self, inputs: Tuple[Array, ...], output: Array, backward: BackwardFn, op: str) -> None:
        self.records.append(TapeRecord(inputs, output, backward, op))

    def backward(self, root: Array, leaves: Optional[Iterable[Array]] = None) -> None:
        """
        Accumulate d(root)/d(leaf) into the .grad of every leaf reached.

        If `leaves` is given, each must require gradients and feed at least one
        record of this tape. Repeated calls accumulate.
        """
        if root.size != 1:
            raise ValueError(f"backward() needs a scalar root, got shape {root.shape}")

        produced = {id(r.output) for r in self.records}
        if id(root) not in produced:
            raise ValueError("backward() root was not produced on this tape")

        if leaves is not None:
            consumed = {id(a) for r in self.records for a in r.inputs}
            for leaf in leaves:
                if not leaf.requires_grad:
                    raise ValueError(f"leaf {leaf!r} does not require gradients")
                if id(leaf) not in consumed:
                    raise ValueError(f"leaf {leaf!r} is not on the tape")

        adjoints = {id(root): np.ones_like(root.data)}
        for rec in reversed(self.records):
            g = adjoints.pop(id(rec.output), None)
            if g is None:
                continue
            input_grads = rec.backward(g)
            for inp, ig in zip(rec.inputs, input_grads):
                if ig is None or not inp.requires_grad:
                    continue
                if inp._leaf:
                    inp.grad = inp.grad + ig
                elif id(inp) in adjoints:
                    adjoints[id(inp)] = adjoints[id(inp)] + ig
                else:
                    adjoints[id(inp)] = ig


def backward(tape: Tape, root: Array, leaves: Optional[Iterable[Array]] = None) -> None:
    """Functional alias for Tape.backward."""
    tape.backward(root, leaves)


# --- plumbing --------------------------------------------------------------

def as_array(x: ArrayLike) -> Array:
    return x if isinstance(x, Array) else Array(x)


def _result(data: np.ndarray, inputs: Tuple[Array, ...], backward_fn: BackwardFn, op: str) -> Array:
    out = Array(data)
    tape = active_tape()
    if tape is not None and any(a.requires_grad for a in inputs):
        out.requires_grad = True
        out._leaf = False
        tape.record(inputs, out, backward_fn, op)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- binary primitives -----------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Array:
    a, b = as_array(a), as_array(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a: ArrayLike, b: ArrayLike) -> Array:
    a, b = as_array(a), as_array(b)
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a: ArrayLike, b: ArrayLike) -> Array:
    a, b = as_array(a), as_array(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a: ArrayLike, b: ArrayLike) -> Array:
    a, b = as_array(a), as_array(b)
    out = a.data / b.data
    return _result(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
        "div",
    )


def matmul(a: ArrayLike, b: ArrayLike) -> Array:
    """(n, k) @ (k, m) matrix product."""
    a, b = as_array(a), as_array(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _result(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
        "matmul",
    )


def select(mask: np.ndarray, a: ArrayLike, b: ArrayLike) -> Array:
    """Elementwise `mask ? a : b` with a constant boolean mask."""
    a, b = as_array(a), as_array(b)
    m = np.asarray(mask, dtype=bool)
    out = np.where(m, a.data, b.data)
    return _result(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(np.where(m, g, 0.0), a.shape),
            _unbroadcast(np.where(m, 0.0, g), b.shape),
        ),
        "select",
    )


# --- unary primitives ------------------------------------------------------

def neg(a: ArrayLike) -> Array:
    a = as_array(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def power(a: ArrayLike, exponent: float) -> Array:
    a = as_array(a)
    p = float(exponent)
    return _result(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1.0),), "power")


def exp(a: ArrayLike) -> Array:
    a = as_array(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a: ArrayLike) -> Array:
    a = as_array(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tanh(a: ArrayLike) -> Array:
    a = as_array(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: ArrayLike) -> Array:
    a = as_array(a)
    out = sp.expit(a.data)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(a: ArrayLike) -> Array:
    """ln(1 + e^x), using x + ln(1 + e^-x) for x > 0."""
    a = as_array(a)
    x = a.data
    out = np.where(x > 0, x + np.log1p(np.exp(-np.abs(x))), np.log1p(np.exp(np.minimum(x, 0.0))))
    return _result(out, (a,), lambda g: (g * sp.expit(x),), "softplus")


def abs_(a: ArrayLike) -> Array:
    a = as_array(a)
    return _result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def lgamma(a: ArrayLike) -> Array:
    a = as_array(a)
    return _result(special.lgamma(a.data), (a,), lambda g: (g * special.digamma(a.data),), "lgamma")


def digamma(a: ArrayLike) -> Array:
    a = as_array(a)
    return _result(special.digamma(a.data), (a,), lambda g: (g * special.trigamma(a.data),), "digamma")


# --- reductions and reshaping ---------------------------------------------

def sum_(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Array:
    a = as_array(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def _backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(np.asarray(out), (a,), _backward, "sum")


def mean(a: ArrayLike, axis: Optional[int] = None, keepdims: bool = False) -> Array:
    a = as_array(a)
    count = a.size if axis is None else a.shape[axis]
    return sum_(a, axis=axis, keepdims=keepdims) / float(count)


def logsumexp(a: ArrayLike, axis: int = -1) -> Array:
    a = as_array(a)
    out = sp.logsumexp(a.data, axis=axis)

    def _backward(g: np.ndarray):
        soft = np.exp(a.data - np.expand_dims(out, axis))
        return (np.expand_dims(g, axis) * soft,)

    return _result(np.asarray(out), (a,), _backward, "logsumexp")


def take(a: ArrayLike, key) -> Array:
    """Basic or fancy indexing; the backward pass scatter-adds."""
    a = as_array(a)

    def _backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return _result(np.array(a.data[key]), (a,), _backward, "take")


def reshape(a: ArrayLike, shape: Tuple[int, ...]) -> Array:
    a = as_array(a)
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def concat(arrays: Sequence[ArrayLike], axis: int = -1) -> Array:
    parts = tuple(as_array(x) for x in arrays)
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def _backward(g: np.ndarray):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(out, parts, _backward, "concat")
