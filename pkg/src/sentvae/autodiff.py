"""Reverse-mode automatic differentiation over dense numpy arrays.

The primitive set is deliberately small and fixed -- matmul, elementwise
add/mul, sigmoid, tanh, exp, log, softmax, concat, slice, sum -- and every
layer in the package is composed from it.  Each primitive knows how to run
forward from raw arrays, so a recorded tape can be replayed after leaf
values change; the finite-difference verifier leans on that to check every
gradient path numerically.

Typical use::

    tape = Tape(dtype=np.float64)
    w = tape.param("w", weights)          # leaf tied to a parameter array
    x = tape.const(inputs)                # leaf without a gradient slot
    loss = ((x @ w).tanh() * x).sum()
    grads = forward_backward(tape, loss)  # {"w": dloss/dw}

Tensors are immutable once written by an op.  A tape is single-threaded;
frozen parameter arrays may be shared between tapes running concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "OptimizerState",
    "concat",
    "forward_backward",
    "finite_difference_check",
    "optimizer_step",
]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, inverting numpy broadcasting."""
    g = grad
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# Primitive registry: forward(input arrays, attrs) and
# backward(output grad, input arrays, output array, attrs) per op.
# ---------------------------------------------------------------------------


def _matmul_fwd(ins, attrs):
    a, b = ins
    a = a.T if attrs["ta"] else a
    b = b.T if attrs["tb"] else b
    return a @ b


def _matmul_bwd(g, ins, out, attrs):
    a_raw, b_raw = ins
    a = a_raw.T if attrs["ta"] else a_raw
    b = b_raw.T if attrs["tb"] else b_raw
    if a.ndim == 2 and b.ndim == 2:
        ga, gb = g @ b.T, a.T @ g
    elif a.ndim == 2 and b.ndim == 1:
        ga, gb = np.outer(g, b), a.T @ g
    elif a.ndim == 1 and b.ndim == 2:
        ga, gb = b @ g, np.outer(a, g)
    else:
        ga, gb = g * b, g * a
    if attrs["ta"]:
        ga = ga.T
    if attrs["tb"]:
        gb = gb.T
    return ga, gb


def _slice_fwd(ins, attrs):
    (x,) = ins
    return np.array(x[attrs["index"]], copy=True)


def _slice_bwd(g, ins, out, attrs):
    (x,) = ins
    gx = np.zeros_like(x)
    index = attrs["index"]
    parts = index if isinstance(index, tuple) else (index,)
    if any(isinstance(p, np.ndarray) for p in parts):
        np.add.at(gx, index, g)  # fancy indices may repeat
    else:
        gx[index] += g
    return (gx,)


def _sum_fwd(ins, attrs):
    (x,) = ins
    return np.sum(x, axis=attrs["axis"], keepdims=attrs["keepdims"])


def _sum_bwd(g, ins, out, attrs):
    (x,) = ins
    axis, keepdims = attrs["axis"], attrs["keepdims"]
    if axis is None:
        return (np.broadcast_to(g, x.shape).copy(),)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, x.shape).copy(),)


def _concat_fwd(ins, attrs):
    return np.concatenate(ins, axis=attrs["axis"])


def _concat_bwd(g, ins, out, attrs):
    axis = attrs["axis"]
    sizes = [x.shape[axis] for x in ins]
    return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))


def _softmax_bwd(g, ins, out, attrs):
    axis = attrs["axis"]
    inner = (g * out).sum(axis=axis, keepdims=True)
    return ((g - inner) * out,)


_OPS: dict[str, tuple[Callable, Callable]] = {
    "matmul": (_matmul_fwd, _matmul_bwd),
    "add": (
        lambda ins, attrs: ins[0] + ins[1],
        lambda g, ins, out, attrs: (
            _unbroadcast(g, ins[0].shape),
            _unbroadcast(g, ins[1].shape),
        ),
    ),
    "mul": (
        lambda ins, attrs: ins[0] * ins[1],
        lambda g, ins, out, attrs: (
            _unbroadcast(g * ins[1], ins[0].shape),
            _unbroadcast(g * ins[0], ins[1].shape),
        ),
    ),
    "sigmoid": (
        lambda ins, attrs: _sigmoid(ins[0]),
        lambda g, ins, out, attrs: (g * out * (1.0 - out),),
    ),
    "tanh": (
        lambda ins, attrs: np.tanh(ins[0]),
        lambda g, ins, out, attrs: (g * (1.0 - out * out),),
    ),
    "exp": (
        lambda ins, attrs: np.exp(ins[0]),
        lambda g, ins, out, attrs: (g * out,),
    ),
    "log": (
        lambda ins, attrs: np.log(ins[0]),
        lambda g, ins, out, attrs: (g / ins[0],),
    ),
    "softmax": (
        lambda ins, attrs: _softmax(ins[0], attrs["axis"]),
        _softmax_bwd,
    ),
    "concat": (_concat_fwd, _concat_bwd),
    "slice": (_slice_fwd, _slice_bwd),
    "sum": (_sum_fwd, _sum_bwd),
}


class Tensor:
    """A dense array plus its position in the recorded computation."""

    __slots__ = ("data", "grad", "tape", "op", "inputs", "attrs", "name")

    def __init__(self, data, tape, op=None, inputs=(), attrs=None, name=None):
        self.data: np.ndarray = data
        self.grad: np.ndarray | None = None
        self.tape: "Tape" = tape
        self.op: str | None = op
        self.inputs: tuple["Tensor", ...] = inputs
        self.attrs: dict[str, Any] | None = attrs
        self.name: str | None = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _wrap(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            if other.tape is not self.tape:
                raise ValueError("cannot combine tensors from different tapes")
            return other
        return self.tape.const(other)

    def __add__(self, other) -> "Tensor":
        return self.tape._record("add", (self, self._wrap(other)))

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        return self.tape._record("mul", (self, self._wrap(other)))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        return self + (-self._wrap(other))

    def __matmul__(self, other) -> "Tensor":
        return self.matmul(self._wrap(other))

    def matmul(self, other: "Tensor", ta: bool = False, tb: bool = False) -> "Tensor":
        return self.tape._record("matmul", (self, self._wrap(other)), {"ta": ta, "tb": tb})

    def sigmoid(self) -> "Tensor":
        return self.tape._record("sigmoid", (self,))

    def tanh(self) -> "Tensor":
        return self.tape._record("tanh", (self,))

    def exp(self) -> "Tensor":
        return self.tape._record("exp", (self,))

    def log(self) -> "Tensor":
        return self.tape._record("log", (self,))

    def softmax(self, axis: int = -1) -> "Tensor":
        return self.tape._record("softmax", (self,), {"axis": axis})

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return self.tape._record("sum", (self,), {"axis": axis, "keepdims": keepdims})

    def __getitem__(self, index) -> "Tensor":
        return self.tape._record("slice", (self,), {"index": index})

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = self.name or self.op or "const"
        return f"Tensor({tag}, shape={self.data.shape})"


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors recorded on one tape along `axis`."""
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    tape = tensors[0].tape
    for t in tensors:
        if t.tape is not tape:
            raise ValueError("cannot combine tensors from different tapes")
    return tape._record("concat", tuple(tensors), {"axis": axis})


class Tape:
    """Ordered record of primitive ops over one computation.

    Creation order is a topological order, so the backward sweep visits
    nodes exactly once in reverse.  Leaves come in two flavors:
    registered parameters (named, receive gradients) and constants.
    """

    def __init__(self, dtype=np.float64, check_finite: bool = True):
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError(f"unsupported dtype {dtype}")
        self.nodes: list[Tensor] = []
        self.params: dict[str, Tensor] = {}
        self.check_finite = check_finite

    def param(self, name: str, array: np.ndarray) -> Tensor:
        """Register (or fetch) the leaf for a parameter array.

        Repeated calls with the same name return the same tensor so that
        gradients accumulate across every use, e.g. the shared weights of
        an unrolled recurrence.
        """
        if name in self.params:
            existing = self.params[name]
            if existing.data is not array:
                raise ValueError(f"parameter {name!r} already bound to a different array")
            return existing
        if array.dtype != self.dtype:
            raise ValueError(
                f"parameter {name!r} has dtype {array.dtype}, tape expects {self.dtype}"
            )
        leaf = Tensor(array, self, name=name)
        self.params[name] = leaf
        return leaf

    def const(self, value) -> Tensor:
        """Leaf that never receives a gradient; values are cast to the tape dtype."""
        arr = np.asarray(value, dtype=self.dtype)
        return Tensor(arr, self)

    def _record(self, op: str, inputs: tuple[Tensor, ...], attrs: dict | None = None) -> Tensor:
        fwd, _ = _OPS[op]
        with np.errstate(all="ignore"):  # finiteness is checked explicitly below
            data = fwd(tuple(t.data for t in inputs), attrs)
        data = np.asarray(data, dtype=self.dtype)
        if self.check_finite and not np.all(np.isfinite(data)):
            raise FloatingPointError(
                f"non-finite values in forward pass of '{op}' (node {len(self.nodes)})"
            )
        out = Tensor(data, self, op=op, inputs=inputs, attrs=attrs)
        self.nodes.append(out)
        return out

    def replay_forward(self) -> None:
        """Recompute every recorded node from current leaf values, in order."""
        for node in self.nodes:
            fwd, _ = _OPS[node.op]
            node.data = np.asarray(
                fwd(tuple(t.data for t in node.inputs), node.attrs), dtype=self.dtype
            )


def forward_backward(tape: Tape, loss: Tensor) -> dict[str, np.ndarray]:
    """Backpropagate from a scalar loss; return gradients for all registered params.

    Parameters the loss never touches map to zero arrays.  Raises
    FloatingPointError naming the offending node if a non-finite gradient
    appears.
    """
    if loss.tape is not tape:
        raise ValueError("loss was not recorded on this tape")
    if loss.data.ndim != 0:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    for node in tape.nodes:
        node.grad = None
    for leaf in tape.params.values():
        leaf.grad = None
    loss.grad = np.ones((), dtype=tape.dtype)
    for node in reversed(tape.nodes):
        if node.grad is None:
            continue
        _, bwd = _OPS[node.op]
        gins = bwd(node.grad, tuple(t.data for t in node.inputs), node.data, node.attrs)
        for inp, gi in zip(node.inputs, gins):
            if gi is None:
                continue
            if not np.all(np.isfinite(gi)):
                raise FloatingPointError(f"non-finite gradient in backward of '{node.op}'")
            inp.grad = gi if inp.grad is None else inp.grad + gi
    return {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
        for name, leaf in tape.params.items()
    }


def finite_difference_check(tape: Tape, loss: Tensor, step: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    Perturbs every parameter element in place, replays the tape forward,
    and restores the originals.  The relative error uses the denominator
    max(|analytic|, |numeric|, 1e-8).
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    analytic = forward_backward(tape, loss)
    worst = 0.0
    for name, leaf in tape.params.items():
        grad = analytic[name]
        for idx in np.ndindex(*leaf.data.shape):
            orig = leaf.data[idx]
            leaf.data[idx] = orig + step
            tape.replay_forward()
            up = float(loss.data)
            leaf.data[idx] = orig - step
            tape.replay_forward()
            down = float(loss.data)
            leaf.data[idx] = orig
            numeric = (up - down) / (2.0 * step)
            ana = float(grad[idx])
            rel = abs(ana - numeric) / max(abs(ana), abs(numeric), 1e-8)
            worst = max(worst, rel)
    tape.replay_forward()
    return worst


@dataclass
class OptimizerState:
    """State for plain SGD or bias-corrected Adam updates."""

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.lr}")


def optimizer_step(
    state: OptimizerState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """Apply one update in place; the step counter advances exactly once."""
    for name, p in params.items():
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter {name!r} shape {p.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name!r}")
    state.step_count += 1
    t = state.step_count
    for name, p in params.items():
        g = grads[name]
        if state.kind == "sgd":
            p -= (state.lr * g).astype(p.dtype, copy=False)
            continue
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        mhat = m / (1.0 - state.beta1**t)
        vhat = v / (1.0 - state.beta2**t)
        p -= (state.lr * mhat / (np.sqrt(vhat) + state.epsilon)).astype(p.dtype, copy=False)
    return params, state
