"""Small define-by-run reverse-mode autodiff engine over float64 numpy arrays.

Operations executed inside an active :class:`Tape` are recorded when any
input is tracked (a ``requires_grad`` leaf or an output of an earlier
recorded op). Outside a tape everything is plain eager numpy.

    with Tape() as tape:
        loss = cross_entropy(x @ w, 1)
    backward(loss, tape)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class NumericError(ArithmeticError):
    pass


class StateError(RuntimeError):
    pass


_ACTIVE: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_tape", "_node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._tape: Tape | None = None
        self._node: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def node_id(self) -> int | None:
        return self._node

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __getitem__(self, index: int) -> "Tensor":
        return row(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Record:
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of differentiable operations for one forward pass."""

    records: list[_Record] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or t._tape is self

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], vjp) -> None:
        out._tape = self
        out._node = len(self.records)
        self.records.append(_Record(inputs, out, vjp))


def _emit(value: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(value)
    if _ACTIVE:
        tape = _ACTIVE[-1]
        if any(tape.tracks(t) for t in inputs):
            tape._record(out, inputs, vjp)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is not tape:
        raise TapeError("loss was not produced on this tape")

    grads: dict[int, np.ndarray] = {loss._node: np.ones_like(loss.data)}
    leaves: dict[int, tuple[Tensor, np.ndarray]] = {}
    for node in range(loss._node, -1, -1):
        g = grads.pop(node, None)
        if g is None:
            continue
        rec = tape.records[node]
        for inp, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None:
                continue
            if inp._tape is tape:
                prev = grads.get(inp._node)
                grads[inp._node] = gi if prev is None else prev + gi
            elif inp.requires_grad:
                key = id(inp)
                if key in leaves:
                    leaves[key] = (inp, leaves[key][1] + gi)
                else:
                    leaves[key] = (inp, gi)
    for t, g in leaves.values():
        g = np.asarray(g, dtype=np.float64).reshape(t.shape)
        t.grad = g.copy() if t.grad is None else t.grad + g


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- operators


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. A rank-1 left operand is treated as a single row."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.data, b.data

    def vjp(g):
        if av.ndim == 1:
            return g @ bv.T, np.outer(av, g)
        return g @ bv.T, av.T @ g

    return _emit(av @ bv, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _emit(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    av, bv = a.data, b.data
    return _emit(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x: Tensor, s) -> Tensor:
    """Multiply by a python float or by a one-element tensor (differentiable)."""
    x = as_tensor(x)
    xv = x.data
    if isinstance(s, Tensor):
        if s.size != 1:
            raise ShapeError(f"scale: factor must have one element, got {s.shape}")
        sv = s.data.reshape(-1)[0]
        shape = s.shape

        def vjp(g):
            return g * sv, np.full(shape, np.sum(g * xv))

        return _emit(xv * sv, (x, s), vjp)
    sv = float(s)
    return _emit(xv * sv, (x,), lambda g: (g * sv,))


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0  # subgradient at exactly 0 is 0
    return _emit(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return _emit(s, (x,), lambda g: (g * s * (1.0 - s),))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return _emit(t, (x,), lambda g: (g * (1.0 - t * t),))


def concat(*parts: Tensor) -> Tensor:
    parts = tuple(as_tensor(p) for p in parts)
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError(f"concat: expected rank-1 tensors, got shape {p.shape}")
    sizes = [p.size for p in parts]
    cuts = np.cumsum(sizes)[:-1]
    return _emit(
        np.concatenate([p.data for p in parts]),
        parts,
        lambda g: tuple(np.split(g, cuts)),
    )


def row(x: Tensor, index: int) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"row: expected a matrix, got shape {x.shape}")
    n = x.shape[0]
    if not -n <= index < n:
        raise IndexError(f"row {index} out of range for {n} rows")
    shape = x.shape

    def vjp(g):
        full = np.zeros(shape)
        full[index] = g
        return (full,)

    return _emit(x.data[index].copy(), (x,), vjp)


def take(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice ``x[start:stop]`` of a vector."""
    x = as_tensor(x)
    if x.data.ndim != 1 or not 0 <= start <= stop <= x.size:
        raise ShapeError(f"take: bad slice [{start}:{stop}] of shape {x.shape}")
    n = x.size

    def vjp(g):
        full = np.zeros(n)
        full[start:stop] = g
        return (full,)

    return _emit(x.data[start:stop].copy(), (x,), vjp)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    old = x.shape
    return _emit(x.data.reshape(shape).copy(), (x,), lambda g: (g.reshape(old),))


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    shape = x.shape
    return _emit(np.array(x.data.sum()), (x,), lambda g: (np.full(shape, g),))


def mean(terms: Sequence[Tensor]) -> Tensor:
    """Average of equally shaped tensors (used for batch losses)."""
    if not terms:
        raise ShapeError("mean of an empty sequence")
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return scale(total, 1.0 / len(terms))


def _check_finite(op: str, v: np.ndarray) -> None:
    if not np.all(np.isfinite(v)):
        raise NumericError(f"{op}: non-finite input {v}")


def softmax_array(v: np.ndarray) -> np.ndarray:
    z = np.exp(v - v.max())
    return z / z.sum()


def softmax(logits: Tensor) -> Tensor:
    logits = as_tensor(logits)
    if logits.data.ndim != 1 or logits.size < 1:
        raise ShapeError(f"softmax: expected a non-empty vector, got {logits.shape}")
    _check_finite("softmax", logits.data)
    s = softmax_array(logits.data)
    return _emit(s, (logits,), lambda g: (s * (g - np.dot(g, s)),))


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log-likelihood of ``target`` under ``softmax(logits)``."""
    logits = as_tensor(logits)
    if logits.data.ndim != 1:
        raise ShapeError(f"cross_entropy: expected a vector, got {logits.shape}")
    n = logits.size
    if not 0 <= target < n:
        raise IndexError(f"target class {target} out of range for {n} classes")
    v = logits.data
    _check_finite("cross_entropy", v)
    shifted = v - v.max()
    log_z = np.log(np.exp(shifted).sum())
    loss = log_z - shifted[target]
    p = np.exp(shifted - log_z)

    def vjp(g):
        d = p.copy()
        d[target] -= 1.0
        return (d * g,)

    return _emit(np.array(loss), (logits,), vjp)


# ---------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """One bias-corrected Adam update, in place. Grads are left untouched."""
    for i, p in enumerate(params):
        if p.grad is None:
            raise StateError(f"parameter {i} {p.shape} has no gradient")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    elif len(state.m) != len(params):
        raise StateError("parameter list changed between Adam steps")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def zero_grads(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None
