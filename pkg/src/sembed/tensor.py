"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation on a *tracked* tensor (a leaf created with
``requires_grad=True`` or the output of another tracked operation) appends a
node to the active :class:`Tape`.  :func:`backward` walks the tape in reverse
append order exactly once and then marks it consumed; calling it again on the
same tape raises :class:`~sembed.errors.TapeError`.

The active tape is thread-local.  Use ``with Tape():`` to scope a fresh tape
explicitly, or rely on the implicit per-thread default, which is replaced
automatically once consumed.  ``with no_grad():`` disables recording.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Callable, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TapeError

__all__ = [
    "Tensor",
    "Tape",
    "no_grad",
    "backward",
    "custom_op",
    "matmul",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "exp",
    "log",
    "sqrt",
    "tsum",
    "mean",
    "reshape",
    "transpose",
    "concat",
    "embedding",
    "softmax",
    "log_softmax",
    "layer_norm",
    "gelu",
    "finite_diff_check",
    "GradCheckReport",
]

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@dataclass
class Node:
    kind: str
    inputs: tuple["Tensor", ...]
    output: "Tensor"
    backward: BackwardFn


@dataclass
class Tape:
    """Append-only record of operations; single use."""

    nodes: list[Node] = field(default_factory=list)
    leaves: dict[int, "Tensor"] = field(default_factory=dict)
    consumed: bool = False

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()


_local = threading.local()


def _stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def _grad_enabled() -> bool:
    return getattr(_local, "no_grad_depth", 0) == 0


def current_tape() -> Tape:
    stack = _stack()
    if stack:
        return stack[-1]
    default = getattr(_local, "default", None)
    if default is None or default.consumed:
        default = _local.default = Tape()
    return default


@contextmanager
def no_grad():
    _local.no_grad_depth = getattr(_local, "no_grad_depth", 0) + 1
    try:
        yield
    finally:
        _local.no_grad_depth -= 1


class Tensor:
    """An n-dimensional float64 array that can take part in differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "_tape")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._tape: Tape | None = None

    @classmethod
    def _wrap(cls, data: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        arr = np.asarray(data, dtype=np.float64)
        t.data = arr if arr.flags.c_contiguous else arr.copy()
        t.grad = None
        t.requires_grad = False
        t._tape = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        return self.requires_grad or self._tape is not None

    @property
    def is_leaf(self) -> bool:
        return self._tape is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor._wrap(self.data.copy())

    def __repr__(self) -> str:
        flag = ", tracked" if self.tracked else ""
        return f"Tensor(shape={self.shape}{flag})"

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

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor._wrap(np.asarray(x, dtype=np.float64))


def custom_op(kind: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap ``data`` as the output of an operation and record it when needed.

    ``backward_fn`` receives the upstream gradient (shape of ``data``) and
    returns one gradient per input (``None`` to skip an input).
    """
    out = Tensor._wrap(data)
    inputs = tuple(inputs)
    if not _grad_enabled() or not any(t.tracked for t in inputs):
        return out
    tape = current_tape()
    if tape.consumed:
        raise TapeError("cannot record on a consumed tape")
    for t in inputs:
        if t._tape is not None and t._tape is not tape:
            state = "a consumed" if t._tape.consumed else "a different"
            raise TapeError(f"input of {kind!r} belongs to {state} tape")
        if t.requires_grad and t._tape is None:
            tape.leaves.setdefault(id(t), t)
    tape.nodes.append(Node(kind, inputs, out, backward_fn))
    out._tape = tape
    return out


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every tracked leaf recorded on ``loss``'s tape."""
    if not isinstance(loss, Tensor) or loss.size != 1:
        shape = getattr(loss, "shape", None)
        raise TapeError(f"backward needs a scalar tensor, got shape {shape}")
    if not loss.tracked:
        raise TapeError("backward on an untracked tensor")
    if loss._tape is None:
        seed = np.ones_like(loss.data)
        loss.grad = seed if loss.grad is None else loss.grad + seed
        return
    tape = loss._tape
    if tape.consumed:
        raise TapeError("tape already consumed by a previous backward")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = pending.pop(id(node.output), None)
        if g is None:
            continue
        for t, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not t.tracked:
                continue
            if gi.shape != t.shape:
                raise TapeError(f"{node.kind}: gradient shape {gi.shape} != input shape {t.shape}")
            if t._tape is None:
                t.grad = gi.astype(np.float64, copy=True) if t.grad is None else t.grad + gi
            else:
                key = id(t)
                pending[key] = pending[key] + gi if key in pending else gi
    for leaf in tape.leaves.values():
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
    tape.consumed = True
    tape.nodes.clear()
    tape.leaves.clear()


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return custom_op(
        "add", a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return custom_op(
        "sub", a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return custom_op(
        "mul", a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data
    return custom_op(
        "div", out, (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
    )


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return custom_op("neg", -a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    return custom_op("exp", out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    return custom_op("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _as_tensor(a)
    out = np.sqrt(a.data)
    return custom_op("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = np.matmul(a.data, b.data)

    def grad(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return custom_op("matmul", out, (a, b), grad)


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def grad(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return custom_op("sum", out, (a,), grad)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = math.prod(a.shape[ax] for ax in axes)
    return tsum(a, axis=axes, keepdims=keepdims) * (1.0 / count)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    return custom_op("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return custom_op("transpose", np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a, index) -> Tensor:
    a = _as_tensor(a)

    def grad(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return custom_op("getitem", a.data[index], (a,), grad)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def grad(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return custom_op("concat", out, tensors, grad)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` (``[V, h]``) for an integer array ``ids``."""
    ids = np.asarray(ids, dtype=np.int64)

    def grad(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return custom_op("embedding", table.data[ids], (table,), grad)


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    z = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    out = z / z.sum(axis=axis, keepdims=True)
    return custom_op(
        "softmax", out, (x,),
        lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),),
    )


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
    probs = np.exp(out)
    return custom_op(
        "log_softmax", out, (x,),
        lambda g: (g - probs * g.sum(axis=axis, keepdims=True),),
    )


def layer_norm(x, gain, bias, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale and shift."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    h = x.shape[-1]
    if gain.shape != (h,) or bias.shape != (h,):
        raise DimensionError(f"layer_norm params {gain.shape}/{bias.shape} for input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = xhat * gain.data + bias.data

    def grad(g):
        gx_hat = g * gain.data
        gx = inv_std * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        reduce = tuple(range(g.ndim - 1))
        return gx, (g * xhat).sum(axis=reduce), g.sum(axis=reduce)

    return custom_op("layer_norm", out, (x, gain, bias), grad)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x) -> Tensor:
    """tanh-approximation GELU."""
    x = _as_tensor(x)
    u = _GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(u)
    out = 0.5 * x.data * (1.0 + t)

    def grad(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du),)

    return custom_op("gelu", out, (x,), grad)


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: tuple[int, int] | None
    checked: int
    tol: float | None = None

    @property
    def passed(self) -> bool:
        return self.tol is None or self.max_rel_error < self.tol


def finite_diff_check(
    f: Callable,
    x: Tensor | Sequence[Tensor],
    step: float = 1e-5,
    tol: float | None = None,
    max_coords: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of scalar ``f(x)`` with central differences.

    ``x`` may be one tensor or a list of tensors; they are perturbed in place
    and restored.  Error per coordinate is ``|analytic - numeric| / max(1, |numeric|)``.
    ``max_coords`` samples at most that many coordinates per tensor.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    xs = [x] if isinstance(x, Tensor) else list(x)
    saved = [(t.requires_grad, t.grad) for t in xs]
    for t in xs:
        t.requires_grad = True
        t.grad = None
    try:
        with Tape():
            backward(f(x))
        analytic = [t.grad.reshape(-1).copy() for t in xs]
    finally:
        for t, (req, grad) in zip(xs, saved):
            t.requires_grad, t.grad = req, grad

    rng = np.random.default_rng(seed)
    worst, max_err, checked = None, 0.0, 0
    with no_grad():
        for ti, t in enumerate(xs):
            flat = t.data.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
            for i in coords:
                orig = flat[i]
                flat[i] = orig + step
                fp = f(x).item()
                flat[i] = orig - step
                fm = f(x).item()
                flat[i] = orig
                numeric = (fp - fm) / (2 * step)
                err = abs(analytic[ti][i] - numeric) / max(1.0, abs(numeric))
                checked += 1
                if err > max_err or worst is None:
                    max_err, worst = max(err, max_err), (ti, int(i))
    return GradCheckReport(max_err, worst, checked, tol)
