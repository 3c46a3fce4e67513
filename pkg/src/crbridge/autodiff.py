"""Minimal reverse-mode automatic differentiation on numpy arrays.

Operations executed while a :class:`Tape` is active are recorded in
execution order; :func:`backward` replays them in reverse. Tensors created
outside any tape (or from inputs that do not require gradients) are plain
constants.

Image tensors are laid out ``C x H x W`` or batched ``N x C x H x W``.
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tape",
    "no_grad",
    "Tensor",
    "tensor",
    "conv2d",
    "maxpool2x2",
    "upsample2x_nearest",
    "activation",
    "leaky_relu",
    "sigmoid",
    "mean_abs_diff",
    "abs_scalar",
    "absolute",
    "mean",
    "backward",
    "OptimizerState",
    "optimizer_step",
    "he_uniform",
    "LEAKY_SLOPE",
]

LEAKY_SLOPE = 0.1

_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of differentiable operations.

    Used as a context manager; nested tapes shadow outer ones.
    """

    def __init__(self) -> None:
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise RuntimeError("tape stack corrupted")
        stack.pop()

    def __len__(self) -> int:
        return len(self.records)


@contextlib.contextmanager
def no_grad():
    """Suspend recording on any active tape."""
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


@dataclass
class _Record:
    inputs: tuple
    output: "Tensor"
    backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """A numpy array that may take part in a tape."""

    __slots__ = ("data", "requires_grad", "grad", "_tape", "node_id", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None) -> None:
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        if arr.ndim > 4:
            raise ValueError(f"tensor rank must be <= 4, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._tape: Tape | None = None
        self.node_id: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            _not_scalar(self)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

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

    def __neg__(self):
        return mul(self, -1.0)


def _not_scalar(t: Tensor):
    raise ValueError(f"expected a scalar tensor, got shape {t.shape}")


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _as_tensor(x, like: np.ndarray | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _make(out: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    result = Tensor(out)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        result.requires_grad = True
        result._tape = tape
        result.node_id = len(tape.records)
        tape.records.append(_Record(inputs, result, backward_fn))
    return result


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# --- elementwise arithmetic -------------------------------------------------


def add(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "data", None))
    b = _as_tensor(b, a.data)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), bw)


def sub(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "data", None))
    b = _as_tensor(b, a.data)
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a = _as_tensor(a, getattr(b, "data", None))
    b = _as_tensor(b, a.data)
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), bw)


def absolute(x: Tensor) -> Tensor:
    """Elementwise ``|x|``; the subgradient at 0 is 0."""
    out = np.abs(x.data)

    def bw(g):
        return (g * np.sign(x.data),)

    return _make(out, (x,), bw)


def abs_scalar(x: Tensor) -> Tensor:
    if x.size != 1:
        _not_scalar(x)
    return absolute(x)


def mean(x: Tensor) -> Tensor:
    n = x.size
    out = np.asarray(x.data.mean(), dtype=x.dtype)

    def bw(g):
        return (np.broadcast_to(g / n, x.shape).astype(x.dtype),)

    return _make(out, (x,), bw)


def mean_abs_diff(a: Tensor, b: Tensor, per_item: bool = False) -> Tensor:
    """Mean absolute difference (normalized Manhattan distance).

    With ``per_item=True`` the mean is taken over all but the leading axis,
    giving one value per batch item.
    """
    a = _as_tensor(a, getattr(b, "data", None))
    b = _as_tensor(b, a.data)
    if a.shape != b.shape:
        raise ValueError(f"mean_abs_diff shape mismatch: {a.shape} vs {b.shape}")
    diff = a.data - b.data
    if per_item:
        n = int(np.prod(a.shape[1:]))
        out = np.abs(diff).reshape(a.shape[0], -1).mean(axis=1)
    else:
        n = a.size
        out = np.asarray(np.abs(diff).mean(), dtype=diff.dtype)
    sign = np.sign(diff)

    def bw(g):
        if per_item:
            g = g.reshape((-1,) + (1,) * (a.data.ndim - 1))
        ga = (g / n) * sign
        return ga, -ga

    return _make(out, (a, b), bw)


# --- activations ------------------------------------------------------------


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    pos = x.data >= 0
    out = np.where(pos, x.data, x.data * x.dtype.type(slope))

    def bw(g):
        return (np.where(pos, g, g * x.dtype.type(slope)),)

    return _make(out, (x,), bw)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)

    def bw(g):
        return (g * out * (1 - out),)

    return _make(out, (x,), bw)


def activation(x: Tensor, kind: str = "leaky_relu") -> Tensor:
    if kind == "leaky_relu":
        return leaky_relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


# --- spatial ops ------------------------------------------------------------


def _batched(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 4:
        return x, False
    if x.ndim == 3:
        return x[None], True
    raise ValueError(f"expected CxHxW or NxCxHxW, got shape {x.shape}")


def _conv_forward(x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """'same' cross-correlation, x: NxCxHxW, w: OxCxKxK -> NxOxHxW.

    Also returns the im2col matrix, laid out (C*K*K) x (N*H*W).
    """
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    p = k // 2
    xp = np.zeros((c, n, h + 2 * p, wd + 2 * p), dtype=x.dtype)
    xp[:, :, p : p + h, p : p + wd] = x.transpose(1, 0, 2, 3)
    cols = np.empty((c, k, k, n, h, wd), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, :, i : i + h, j : j + wd]
    cols = cols.reshape(c * k * k, n * h * wd)
    out = w.reshape(o, -1) @ cols
    return out.reshape(o, n, h, wd).transpose(1, 0, 2, 3), cols


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Stride-1 'same' 2-D cross-correlation plus per-channel bias."""
    k = kernels.shape[-1]
    if kernels.data.ndim != 4 or kernels.shape[2] != k:
        raise ValueError(f"kernels must be OxCxKxK, got {kernels.shape}")
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    xb, squeeze = _batched(x.data)
    if xb.shape[1] != kernels.shape[1]:
        raise ValueError(
            f"conv2d channel mismatch: input has {xb.shape[1]} channels, "
            f"kernels expect {kernels.shape[1]} (kernels {kernels.shape})"
        )
    if bias.shape != (kernels.shape[0],):
        raise ValueError(f"bias must have shape ({kernels.shape[0]},), got {bias.shape}")
    w = kernels.data
    y, cols = _conv_forward(xb, w)
    y = y + bias.data.reshape(1, -1, 1, 1)
    out = y[0] if squeeze else y

    def bw(g):
        gb = g[None] if squeeze else g
        o = gb.shape[1]
        gmat = gb.transpose(1, 0, 2, 3).reshape(o, -1)
        gw = (gmat @ cols.T).reshape(w.shape) if kernels.requires_grad else None
        gbias = gmat.sum(axis=1) if bias.requires_grad else None
        gx = None
        if x.requires_grad:
            # full correlation with flipped, channel-transposed kernels
            wt = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            gx, _ = _conv_forward(gb, wt)
            if squeeze:
                gx = gx[0]
        return gx, gw, gbias

    return _make(np.ascontiguousarray(out), (x, kernels, bias), bw)


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 max pooling; gradient goes to the first row-major argmax."""
    xb, squeeze = _batched(x.data)
    n, c, h, w = xb.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    win = xb.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def bw(g):
        gb = g[None] if squeeze else g
        onehot = np.zeros(win.shape, dtype=gb.dtype)
        np.put_along_axis(onehot, idx[..., None], gb[..., None], axis=-1)
        gx = onehot.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        gx = gx.reshape(n, c, h, w)
        return (gx[0] if squeeze else gx,)

    return _make(out[0] if squeeze else out, (x,), bw)


def upsample2x_nearest(x: Tensor) -> Tensor:
    out = x.data.repeat(2, axis=-2).repeat(2, axis=-1)

    def bw(g):
        s = g.shape
        g = g.reshape(s[:-2] + (s[-2] // 2, 2, s[-1] // 2, 2))
        return (g.sum(axis=(-3, -1)),)

    return _make(out, (x,), bw)


# --- reverse sweep ------------------------------------------------------------


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    Leaves are tensors with ``requires_grad`` that were not produced on
    ``tape``. Gradients add onto existing ``.grad`` values.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {loss.shape}")
    if loss._tape is not tape or loss.node_id is None:
        raise ValueError("loss was not recorded on this tape")

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    for node in range(loss.node_id, -1, -1):
        g = grads.pop(node, None)
        if g is None:
            continue
        rec = tape.records[node]
        in_grads = rec.backward_fn(g)
        for inp, ig in zip(rec.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            if inp._tape is tape and inp.node_id is not None:
                prev = grads.get(inp.node_id)
                grads[inp.node_id] = ig if prev is None else prev + ig
            else:
                ig = np.asarray(ig, dtype=inp.dtype).reshape(inp.shape)
                inp.grad = ig.copy() if inp.grad is None else inp.grad + ig


# --- parameters and optimization ---------------------------------------------


def he_uniform(rng: np.random.Generator, shape: tuple, dtype=np.float32) -> np.ndarray:
    """He-uniform init, bound sqrt(6 / fan_in) with fan_in = prod(shape[1:])."""
    fan_in = int(np.prod(shape[1:]))
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


def optimizer_step(state: OptimizerState, params: Sequence[Tensor], grads: Sequence[np.ndarray] | None = None) -> None:
    """Update ``params`` in place. Raises FloatingPointError on non-finite gradients."""
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ValueError("params and grads differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape:
            raise ValueError(f"grad {i} shape {g.shape} != param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {i}")

    lr = state.learning_rate
    if state.kind == "sgd":
        state.step += 1
        for p, g in zip(params, grads):
            p.data = (p.data - p.dtype.type(lr) * g).astype(p.dtype)
        return

    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        dt = p.dtype.type
        m = dt(b1) * state.m[i] + dt(1 - b1) * g
        v = dt(b2) * state.v[i] + dt(1 - b2) * (g * g)
        state.m[i], state.v[i] = m, v
        mhat = m / dt(c1)
        vhat = v / dt(c2)
        p.data = (p.data - dt(lr) * mhat / (np.sqrt(vhat) + dt(state.eps))).astype(p.dtype)
