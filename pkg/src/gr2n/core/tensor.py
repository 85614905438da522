"""Dense float64 tensors with a recorded reverse-mode tape.

Operations are recorded onto the tape that is active in the current context
(see :class:`Tape`). Outside any tape the same functions simply evaluate,
which is what evaluation and benchmarking use.

Supported op kinds (the ``kind`` argument of :func:`record`)::

    matmul, rowdot, concat, add, sub, mul, scale, sigmoid, tanh, relu, sum,
    transpose, reshape, slice, bce, softmax_xent

``add``/``sub``/``mul`` follow numpy broadcasting; gradients are reduced back
onto the input shapes.
"""

from __future__ import annotations

import contextvars
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ParamStore",
    "ShapeError",
    "NonFiniteError",
    "TapeError",
    "record",
    "backward",
    "as_tensor",
    "matmul",
    "rowdot",
    "concat",
    "add",
    "sub",
    "mul",
    "scale",
    "sigmoid",
    "tanh",
    "relu",
    "sum",
    "transpose",
    "reshape",
    "slice_",
    "bce",
    "softmax_xent",
    "linear",
]


class ShapeError(ValueError):
    pass


class NonFiniteError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Tensor:
    """A float64 array plus an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# --------------------------------------------------------------------------
# tape


class _Node:
    __slots__ = ("kind", "inputs", "output", "cache", "vjp")

    def __init__(self, kind, inputs, output, cache, vjp):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.cache = cache
        self.vjp = vjp


_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "active_tape", default=None
)


class Tape:
    """Records differentiable operations in topological (execution) order.

    Use as a context manager::

        with Tape() as tape:
            loss = ...
        backward(tape, loss, store)
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._consumed = False
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def reset(self) -> None:
        self.nodes.clear()
        self._consumed = False

    def _append(self, node: _Node) -> None:
        if self._consumed:
            raise TapeError("tape already consumed by backward; call reset() first")
        self.nodes.append(node)


# --------------------------------------------------------------------------
# op registry

_Forward = Callable[..., tuple[np.ndarray, dict]]
_Vjp = Callable[[np.ndarray, tuple[np.ndarray, ...], np.ndarray, dict], tuple]
_OPS: dict[str, tuple[_Forward, _Vjp]] = {}


def _op(kind: str):
    def register(pair):
        _OPS[kind] = pair
        return pair

    return register


def record(kind: str, *inputs, **attrs) -> Tensor:
    """Evaluate op ``kind`` on ``inputs`` and append it to the active tape."""
    try:
        fwd, vjp = _OPS[kind]
    except KeyError:
        raise ValueError(f"unsupported op kind {kind!r}") from None
    ts = tuple(as_tensor(x) for x in inputs)
    for t in ts:
        if not np.isfinite(t.data).all():
            raise NonFiniteError(f"{kind}: non-finite input of shape {t.shape}")
    arrays = tuple(t.data for t in ts)
    out, cache = fwd(*arrays, **attrs)
    tape = _active_tape.get()
    needs = tape is not None and any(t.requires_grad for t in ts)
    result = Tensor(out, requires_grad=needs)
    if needs:
        tape._append(_Node(kind, ts, result, cache, vjp))
    return result


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}") from None


def _fwd_add(a, b):
    _broadcast_check("add", a, b)
    return a + b, {}


def _vjp_add(g, ins, out, cache):
    a, b = ins
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


_op("add")((_fwd_add, _vjp_add))


def _fwd_sub(a, b):
    _broadcast_check("sub", a, b)
    return a - b, {}


def _vjp_sub(g, ins, out, cache):
    a, b = ins
    return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


_op("sub")((_fwd_sub, _vjp_sub))


def _fwd_mul(a, b):
    _broadcast_check("mul", a, b)
    return a * b, {}


def _vjp_mul(g, ins, out, cache):
    a, b = ins
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


_op("mul")((_fwd_mul, _vjp_mul))


def _fwd_scale(a, *, c: float):
    return a * c, {"c": c}


def _vjp_scale(g, ins, out, cache):
    return (g * cache["c"],)


_op("scale")((_fwd_scale, _vjp_scale))


def _fwd_matmul(a, b):
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"matmul: scalar operand, shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul: inner dimensions differ, shapes {a.shape} and {b.shape}")
    try:
        return np.matmul(a, b), {}
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from None


def _vjp_matmul(g, ins, out, cache):
    a, b = ins
    if a.ndim == 1 and b.ndim == 1:
        return g * b, g * a
    a2 = a[None, :] if a.ndim == 1 else a
    b2 = b[:, None] if b.ndim == 1 else b
    g2 = g
    if a.ndim == 1:
        g2 = np.expand_dims(g2, -2)
    if b.ndim == 1:
        g2 = np.expand_dims(g2, -1)
    ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
    gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
    if a.ndim == 1:
        ga = ga[..., 0, :]
    if b.ndim == 1:
        gb = gb[..., :, 0]
    return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)


_op("matmul")((_fwd_matmul, _vjp_matmul))


def _fwd_rowdot(a, b):
    if a.shape[-1:] != b.shape[-1:]:
        raise ShapeError(f"rowdot: last axes differ, shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    except ValueError:
        raise ShapeError(f"rowdot: incompatible shapes {a.shape} and {b.shape}") from None
    # einsum keeps one accumulation order per output entry whatever the layout
    return np.einsum("...j,...j->...", a, b), {}


def _vjp_rowdot(g, ins, out, cache):
    a, b = ins
    g = g[..., None]
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


_op("rowdot")((_fwd_rowdot, _vjp_rowdot))


def _fwd_concat(*arrays, axis: int = -1):
    try:
        out = np.concatenate(arrays, axis=axis)
    except ValueError:
        shapes = [x.shape for x in arrays]
        raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
    return out, {"axis": axis, "sizes": [x.shape[axis] for x in arrays]}


def _vjp_concat(g, ins, out, cache):
    bounds = np.cumsum(cache["sizes"])[:-1]
    return tuple(np.split(g, bounds, axis=cache["axis"]))


_op("concat")((_fwd_concat, _vjp_concat))


def _fwd_sigmoid(a):
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out, {}


def _vjp_sigmoid(g, ins, out, cache):
    return (g * out * (1.0 - out),)


_op("sigmoid")((_fwd_sigmoid, _vjp_sigmoid))


def _fwd_tanh(a):
    return np.tanh(a), {}


def _vjp_tanh(g, ins, out, cache):
    return (g * (1.0 - out * out),)


_op("tanh")((_fwd_tanh, _vjp_tanh))


def _fwd_relu(a):
    return np.maximum(a, 0.0), {}


def _vjp_relu(g, ins, out, cache):
    return (g * (ins[0] > 0),)


_op("relu")((_fwd_relu, _vjp_relu))


def _fwd_sum(a, *, axis=None, keepdims: bool = False):
    return np.sum(a, axis=axis, keepdims=keepdims), {"axis": axis, "keepdims": keepdims}


def _vjp_sum(g, ins, out, cache):
    (a,) = ins
    axis = cache["axis"]
    if axis is not None and not cache["keepdims"]:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, a.shape).copy(),)


_op("sum")((_fwd_sum, _vjp_sum))


def _fwd_transpose(a, *, axes=None):
    if axes is None:
        axes = tuple(range(a.ndim))[::-1]
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {a.shape}")
    return np.transpose(a, axes), {"axes": tuple(axes)}


def _vjp_transpose(g, ins, out, cache):
    return (np.transpose(g, np.argsort(cache["axes"])),)


_op("transpose")((_fwd_transpose, _vjp_transpose))


def _fwd_reshape(a, *, shape):
    try:
        return a.reshape(shape), {}
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {shape}") from None


def _vjp_reshape(g, ins, out, cache):
    return (g.reshape(ins[0].shape),)


_op("reshape")((_fwd_reshape, _vjp_reshape))


def _fwd_slice(a, *, index):
    return a[index], {"index": index}


def _vjp_slice(g, ins, out, cache):
    full = np.zeros_like(ins[0])
    full[cache["index"]] = g
    return (full,)


_op("slice")((_fwd_slice, _vjp_slice))


def _fwd_bce(p, *, target, delta: float = 1e-7):
    target = np.asarray(target, dtype=np.float64)
    if target.shape != p.shape:
        raise ShapeError(f"bce: target shape {target.shape} != prediction shape {p.shape}")
    q = np.clip(p, delta, 1.0 - delta)
    out = -(target * np.log(q) + (1.0 - target) * np.log(1.0 - q))
    return out, {"target": target, "q": q, "inside": (p > delta) & (p < 1.0 - delta)}


def _vjp_bce(g, ins, out, cache):
    y, q = cache["target"], cache["q"]
    d = (1.0 - y) / (1.0 - q) - y / q
    return (g * d * cache["inside"],)


_op("bce")((_fwd_bce, _vjp_bce))


def _fwd_softmax_xent(z, *, target):
    target = np.asarray(target, dtype=np.float64)
    if target.shape != z.shape:
        raise ShapeError(f"softmax_xent: target shape {target.shape} != logits shape {z.shape}")
    shifted = z - z.max(axis=-1, keepdims=True)
    logsm = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return -(target * logsm).sum(axis=-1), {"target": target, "logsm": logsm}


def _vjp_softmax_xent(g, ins, out, cache):
    y = cache["target"]
    p = np.exp(cache["logsm"])
    return (g[..., None] * (p * y.sum(axis=-1, keepdims=True) - y),)


_op("softmax_xent")((_fwd_softmax_xent, _vjp_softmax_xent))


# --------------------------------------------------------------------------
# convenience wrappers


def matmul(a, b) -> Tensor:
    return record("matmul", a, b)


def rowdot(a, b) -> Tensor:
    """Dot product along the last axis, broadcasting the leading axes."""
    return record("rowdot", a, b)


def concat(tensors, axis: int = -1) -> Tensor:
    return record("concat", *tensors, axis=axis)


def add(a, b) -> Tensor:
    return record("add", a, b)


def sub(a, b) -> Tensor:
    return record("sub", a, b)


def mul(a, b) -> Tensor:
    return record("mul", a, b)


def scale(a, c: float) -> Tensor:
    return record("scale", a, c=float(c))


def sigmoid(a) -> Tensor:
    return record("sigmoid", a)


def tanh(a) -> Tensor:
    return record("tanh", a)


def relu(a) -> Tensor:
    return record("relu", a)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return record("sum", a, axis=axis, keepdims=keepdims)


def transpose(a, axes=None) -> Tensor:
    return record("transpose", a, axes=axes)


def reshape(a, shape) -> Tensor:
    return record("reshape", a, shape=tuple(shape))


def slice_(a, index) -> Tensor:
    return record("slice", a, index=index)


def bce(p, target, delta: float = 1e-7) -> Tensor:
    """Elementwise binary cross-entropy with predictions clamped to [delta, 1-delta]."""
    return record("bce", p, target=target, delta=delta)


def softmax_xent(logits, target) -> Tensor:
    """Cross-entropy of softmax(logits) against ``target`` along the last axis."""
    return record("softmax_xent", logits, target=target)


def linear(x, w) -> Tensor:
    """``x @ w.T`` for ``x`` of shape (..., in) and ``w`` of shape (out, in)."""
    return matmul(x, transpose(w))


# --------------------------------------------------------------------------
# parameters and backward


class ParamStore:
    """Named parameter tensors with gradient accumulators.

    Shapes are fixed at registration; ``set`` refuses to change them.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        if not np.isfinite(t.data).all():
            raise NonFiniteError(f"parameter {name!r} has non-finite entries")
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def set(self, name: str, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        t = self._params[name]
        if value.shape != t.shape:
            raise ShapeError(f"parameter {name!r}: shape {value.shape} != {t.shape}")
        t.data = value.copy()

    def grad(self, name: str) -> np.ndarray | None:
        return self._params[name].grad

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def values(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            self.set(k, v)

    def num_parameters(self) -> int:
        return int(np.sum([t.data.size for t in self._params.values()]))


def backward(tape: Tape, loss: Tensor, store: ParamStore | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires grad.

    When ``store`` is given every parameter in it ends up with a gradient array,
    zero-filled for parameters the loss does not depend on. The tape is consumed.
    """
    if tape._consumed:
        raise TapeError("backward already ran on this tape; call reset() first")
    if loss.data.size != 1 or loss.ndim != 0:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    tape._consumed = True
    if store is not None:
        for _, t in store.items():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
    if not loss.requires_grad:
        tape.nodes.clear()
        return

    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
    produced = {id(node.output) for node in tape.nodes}
    leaves: dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        in_grads = node.vjp(g, tuple(t.data for t in node.inputs), node.output.data, node.cache)
        for t, gi in zip(node.inputs, in_grads):
            if not t.requires_grad or gi is None:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if key not in produced:
                leaves[key] = t
    for key, t in leaves.items():
        g = grads[key]
        if t.grad is None:
            t.grad = np.array(g, dtype=np.float64).reshape(t.shape)
        else:
            t.grad = t.grad + g
    tape.nodes.clear()
