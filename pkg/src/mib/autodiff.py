"""Reverse-mode automatic differentiation over dense float64 tensors.

Define-by-run: primitives applied to tensors that require gradients are
recorded on a Tape in execution order, which is already a topological order,
so the backward pass is a single reverse sweep. The primitive set is the
minimum needed to train small MLP critics and to differentiate score-matrix
objectives through reparameterized Gaussian sampling; no views, no GPU, no
higher-order derivatives.
"""

from __future__ import annotations

import numpy as np


class AutodiffError(Exception):
    pass


class ShapeMismatch(AutodiffError):
    def __init__(self, primitive: str, *shapes):
        super().__init__(f"{primitive}: incompatible shapes {list(shapes)}")
        self.primitive = primitive
        self.shapes = shapes


class DomainError(AutodiffError):
    pass


class NonFiniteError(AutodiffError):
    pass


class Tensor:
    """Dense float64 array plus the bookkeeping needed for backprop."""

    __slots__ = ("values", "requires_grad", "tape", "name")

    def __init__(self, values, requires_grad: bool = False, tape: "Tape | None" = None,
                 name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; every path ends in a registered primitive
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return subtract(self, _as_tensor(other))

    def __rsub__(self, other):
        return subtract(_as_tensor(other), self)

    def __mul__(self, other):
        return multiply(self, _as_tensor(other))

    def __rmul__(self, other):
        return multiply(_as_tensor(other), self)

    def __truediv__(self, other):
        return divide(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return divide(_as_tensor(other), self)

    def __neg__(self):
        return negate(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    """One recorded primitive application."""

    __slots__ = ("out", "parents", "vjps", "primitive", "fwd")

    def __init__(self, out, parents, vjps, primitive, fwd):
        self.out = out
        self.parents = parents
        self.vjps = vjps
        self.primitive = primitive
        self.fwd = fwd


class Tape:
    """Execution-ordered record of primitive applications plus leaf registry.

    One tape per training step, one owner per tape; in-progress graphs are
    never shared between workers.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._params: dict[str, Tensor] = {}
        self._on_tape: set[int] = set()

    def parameter(self, name: str, values) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        t = Tensor(np.ascontiguousarray(values, dtype=np.float64),
                   requires_grad=True, tape=self, name=name)
        self._params[name] = t
        self._on_tape.add(id(t))
        return t

    def parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def _record(self, node: _Node):
        self._nodes.append(node)
        self._on_tape.add(id(node.out))

    def replay(self) -> bool:
        """Re-run every recorded forward and compare bit-for-bit."""
        for node in self._nodes:
            if node.fwd is None:
                continue
            fresh = node.fwd()
            if not np.array_equal(fresh, node.out.values):
                return False
        return True


def _common_tape(inputs, primitive):
    tape = None
    for t in inputs:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise AutodiffError(f"{primitive}: inputs recorded on different tapes")
    return tape


def _result(values, inputs, vjps, primitive, fwd=None):
    req = any(t.requires_grad for t in inputs)
    if not req:
        return Tensor(values)
    tape = _common_tape(inputs, primitive)
    if tape is None:
        raise AutodiffError(
            f"{primitive}: gradient-requiring inputs must come from Tape.parameter")
    out = Tensor(values, requires_grad=True, tape=tape)
    tape._record(_Node(out, tuple(inputs), tuple(vjps), primitive, fwd))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to the original shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_values(a: Tensor, b: Tensor, primitive: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(primitive, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_values(a, b, "add")
    return _result(a.values + b.values, (a, b),
                   (lambda g: _unbroadcast(g, a.shape), lambda g: _unbroadcast(g, b.shape)),
                   "add", lambda: a.values + b.values)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_values(a, b, "subtract")
    return _result(a.values - b.values, (a, b),
                   (lambda g: _unbroadcast(g, a.shape), lambda g: _unbroadcast(-g, b.shape)),
                   "subtract", lambda: a.values - b.values)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_values(a, b, "multiply")
    return _result(a.values * b.values, (a, b),
                   (lambda g: _unbroadcast(g * b.values, a.shape),
                    lambda g: _unbroadcast(g * a.values, b.shape)),
                   "multiply", lambda: a.values * b.values)


def divide(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_values(a, b, "divide")
    if np.any(b.values == 0.0):
        raise DomainError("divide: zero denominator")
    return _result(a.values / b.values, (a, b),
                   (lambda g: _unbroadcast(g / b.values, a.shape),
                    lambda g: _unbroadcast(-g * a.values / (b.values * b.values), b.shape)),
                   "divide", lambda: a.values / b.values)


def negate(a: Tensor) -> Tensor:
    return _result(-a.values, (a,), (lambda g: -g,), "negate", lambda: -a.values)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    return _result(a.values @ b.values, (a, b),
                   (lambda g: g @ b.values.T, lambda g: a.values.T @ g),
                   "matmul", lambda: a.values @ b.values)


def exp(a: Tensor) -> Tensor:
    out_values = np.exp(a.values)
    return _result(out_values, (a,), (lambda g: g * out_values,), "exp",
                   lambda: np.exp(a.values))


def log(a: Tensor) -> Tensor:
    if np.any(a.values <= 0.0):
        raise DomainError("log: nonpositive input")
    return _result(np.log(a.values), (a,), (lambda g: g / a.values,), "log",
                   lambda: np.log(a.values))


def sqrt(a: Tensor) -> Tensor:
    if np.any(a.values < 0.0):
        raise DomainError("sqrt: negative input")
    out_values = np.sqrt(a.values)
    return _result(out_values, (a,), (lambda g: g * 0.5 / out_values,), "sqrt",
                   lambda: np.sqrt(a.values))


def relu(a: Tensor) -> Tensor:
    return _result(np.maximum(a.values, 0.0), (a,),
                   (lambda g: g * (a.values > 0.0),), "relu",
                   lambda: np.maximum(a.values, 0.0))


def tanh(a: Tensor) -> Tensor:
    out_values = np.tanh(a.values)
    return _result(out_values, (a,), (lambda g: g * (1.0 - out_values * out_values),),
                   "tanh", lambda: np.tanh(a.values))


def softplus(a: Tensor) -> Tensor:
    # log(1 + e^x) via logaddexp: exact for large |x|, no overflow
    out_values = np.logaddexp(0.0, a.values)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.values))
    return _result(out_values, (a,), (lambda g: g * sig,), "softplus",
                   lambda: np.logaddexp(0.0, a.values))


def reduce_sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    def vjp(g):
        if axis is None:
            return np.full(a.shape, g)
        ge = np.expand_dims(g, axis) if not keepdims else g
        return np.broadcast_to(ge, a.shape).copy()
    return _result(a.values.sum(axis=axis, keepdims=keepdims), (a,), (vjp,),
                   "reduce_sum", lambda: a.values.sum(axis=axis, keepdims=keepdims))


def reduce_mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.values.size if axis is None else a.shape[axis]

    def vjp(g):
        if axis is None:
            return np.full(a.shape, g / count)
        ge = np.expand_dims(g, axis) if not keepdims else g
        return np.broadcast_to(ge / count, a.shape).copy()
    return _result(a.values.mean(axis=axis, keepdims=keepdims), (a,), (vjp,),
                   "reduce_mean", lambda: a.values.mean(axis=axis, keepdims=keepdims))


def _lse_forward(values, axis, keepdims):
    m = np.max(values, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)  # rows that are all -inf stay -inf below
    s = np.sum(np.exp(values - m), axis=axis, keepdims=True)
    out = m + np.log(s)
    return out if keepdims else np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def logsumexp(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_values = _lse_forward(a.values, axis, keepdims)

    def vjp(g):
        oe = out_values if keepdims or axis is None else np.expand_dims(out_values, axis)
        ge = g if keepdims or axis is None else np.expand_dims(g, axis)
        return ge * np.exp(a.values - oe)
    return _result(out_values, (a,), (vjp,), "logsumexp",
                   lambda: _lse_forward(a.values, axis, keepdims))


def log_mean_exp(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    """max(v) + log(mean(exp(v - max(v)))), the overflow-safe mean in log domain."""
    def forward(values):
        m = np.max(values, axis=axis, keepdims=True)
        out = m + np.log(np.mean(np.exp(values - m), axis=axis, keepdims=True))
        if keepdims:
            return out
        return out.reshape(()) if axis is None else np.squeeze(out, axis=axis)
    out_values = forward(a.values)

    def vjp(g):
        oe = out_values if keepdims or axis is None else np.expand_dims(out_values, axis)
        ge = g if keepdims or axis is None else np.expand_dims(g, axis)
        count = a.values.size if axis is None else a.shape[axis]
        return ge * np.exp(a.values - oe) / count
    return _result(out_values, (a,), (vjp,), "log_mean_exp", lambda: forward(a.values))


def logaddexp(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_values(a, b, "logaddexp")
    out_values = np.logaddexp(a.values, b.values)
    return _result(out_values, (a, b),
                   (lambda g: _unbroadcast(g * np.exp(a.values - out_values), a.shape),
                    lambda g: _unbroadcast(g * np.exp(b.values - out_values), b.shape)),
                   "logaddexp", lambda: np.logaddexp(a.values, b.values))


def diagonal(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeMismatch("diagonal", a.shape)

    def vjp(g):
        z = np.zeros(a.shape)
        np.fill_diagonal(z, g)
        return z
    return _result(np.diagonal(a.values).copy(), (a,), (vjp,), "diagonal",
                   lambda: np.diagonal(a.values).copy())


def broadcast_to(a: Tensor, shape: tuple) -> Tensor:
    try:
        out_values = np.broadcast_to(a.values, shape).copy()
    except ValueError:
        raise ShapeMismatch("broadcast_to", a.shape, tuple(shape)) from None
    return _result(out_values, (a,), (lambda g: _unbroadcast(g, a.shape),),
                   "broadcast_to", lambda: np.broadcast_to(a.values, shape).copy())


def reshape(a: Tensor, shape: tuple) -> Tensor:
    return _result(a.values.reshape(shape), (a,),
                   (lambda g: g.reshape(a.shape),), "reshape",
                   lambda: a.values.reshape(shape))


def transpose(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeMismatch("transpose", a.shape)
    return _result(a.values.T.copy(), (a,), (lambda g: g.T.copy(),), "transpose",
                   lambda: a.values.T.copy())


def concatenate(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        out_values = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch("concatenate", *[t.shape for t in tensors]) from None
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def make_vjp(i):
        return lambda g: np.split(g, offsets, axis=axis)[i]
    return _result(out_values, tuple(tensors),
                   tuple(make_vjp(i) for i in range(len(tensors))), "concatenate",
                   lambda: np.concatenate([t.values for t in tensors], axis=axis))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.values > lo) & (a.values < hi)
    return _result(np.clip(a.values, lo, hi), (a,), (lambda g: g * inside,), "clip",
                   lambda: np.clip(a.values, lo, hi))


def stop_gradient(a: Tensor) -> Tensor:
    return Tensor(a.values.copy())


PRIMITIVES = {
    "add": add, "subtract": subtract, "multiply": multiply, "divide": divide,
    "negate": negate, "matmul": matmul, "exp": exp, "log": log, "sqrt": sqrt,
    "relu": relu, "tanh": tanh, "softplus": softplus,
    "reduce_sum": reduce_sum, "reduce_mean": reduce_mean,
    "logsumexp": logsumexp, "log_mean_exp": log_mean_exp, "logaddexp": logaddexp,
    "diagonal": diagonal, "broadcast_to": broadcast_to, "reshape": reshape,
    "transpose": transpose, "concatenate": concatenate, "clip": clip,
    "stop_gradient": stop_gradient,
}


def apply_primitive(primitive: str, *inputs, **kwargs) -> Tensor:
    """Dispatch a primitive by name; inputs are coerced to tensors."""
    if primitive not in PRIMITIVES:
        raise KeyError(f"unknown primitive {primitive!r}")
    if primitive == "concatenate":
        return concatenate(*inputs, **kwargs)
    return PRIMITIVES[primitive](*[_as_tensor(t) for t in inputs], **kwargs)


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> dict[str, Tensor]:
    """Gradients of a scalar loss with respect to every registered parameter.

    Parameters the graph never reaches get zero gradients.
    """
    if loss.values.size != 1:
        raise ShapeMismatch("backward", loss.shape)
    tape = loss.tape
    if tape is None or id(loss) not in tape._on_tape:
        raise AutodiffError("backward: loss was not recorded on a tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(tape._nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            if not parent.requires_grad:
                continue
            pg = vjp(g)
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    out = {}
    for name, p in tape._params.items():
        g = grads.get(id(p))
        out[name] = Tensor(np.zeros_like(p.values) if g is None else g)
    return out


def check_gradient(fn, point, epsilon: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central finite differences.

    fn must map a tensor to a scalar tensor and be differentiable at point.
    """
    if not (0.0 < epsilon <= 1e-3):
        raise ValueError("epsilon must be in (0, 1e-3]")
    point = np.ascontiguousarray(point, dtype=np.float64)
    tape = Tape()
    p = tape.parameter("x", point)
    out = fn(p)
    if out.values.size != 1:
        raise ShapeMismatch("check_gradient", out.shape)
    analytic = backward(out)["x"].values
    flat = point.ravel()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + epsilon
        hi = float(fn(Tensor(bumped.reshape(point.shape))).values)
        bumped[i] = flat[i] - epsilon
        lo = float(fn(Tensor(bumped.reshape(point.shape))).values)
        numeric[i] = (hi - lo) / (2.0 * epsilon)
    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        raise NonFiniteError("check_gradient: non-finite gradient")
    rel = np.abs(analytic.ravel() - numeric) / (np.abs(numeric) + 1e-8)
    return float(np.max(rel)) if rel.size else 0.0
