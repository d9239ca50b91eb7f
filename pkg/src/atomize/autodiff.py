"""Small reverse-mode differentiation engine over dense 2-D float64 arrays.

Every value is a :class:`Tensor` holding a 2-D ``numpy`` array. Tensors that
belong to a :class:`Graph` are recorded on that graph's tape in creation
order, which is a valid topological order, so the backward pass is a single
reverse sweep over the tape. Tensors created without a graph are constants:
operations on constants only compute values, which keeps finite-difference
evaluation cheap.

Broadcasting is limited to Python scalars combined with tensors. Row or
column expansion is done explicitly with :func:`matmul` against constant
ones, so every gradient path goes through the same small set of ops.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

#: Added under the square root of every 2-norm so its gradient stays finite at 0.
EPS_NORM = 1e-12


class ShapeError(ValueError):
    pass


class NumericDomainError(ArithmeticError):
    pass


class GraphError(RuntimeError):
    pass


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got array of rank {arr.ndim}")
    return arr


class Graph:
    """Tape of operations for one forward/backward pass.

    A graph is not thread-safe; use one graph per thread. Graphs share no
    state with each other.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._backward_done = False

    def leaf(self, values, name: str = "leaf") -> Tensor:
        """Register a differentiable input."""
        t = Tensor(_as_array(values), graph=self, op=name)
        return t

    def _record(self, t: Tensor):
        t.node_id = len(self.nodes)
        self.nodes.append(t)

    def backward(self, root: Tensor):
        if root.graph is not self:
            raise GraphError("root does not belong to this graph")
        if self._backward_done:
            raise GraphError("backward already ran on this graph; call reset() first")
        if root.shape != (1, 1):
            raise ShapeError(f"backward needs a 1x1 root, got {root.shape}")
        self._backward_done = True
        root.grad = np.ones((1, 1))
        for node in reversed(self.nodes[: root.node_id + 1]):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)

    def reset(self):
        """Clear every gradient so backward may run again."""
        for node in self.nodes:
            node.grad = None
        self._backward_done = False

    def first_non_finite(self):
        for node in self.nodes:
            if not np.all(np.isfinite(node.values)):
                return node
        return None

    def kinks(self, radius: float):
        """Nodes whose inputs sit within ``radius`` of a non-differentiable point."""
        return [n for n in self.nodes if n._kink_gap is not None and n._kink_gap() < radius]


class Tensor:
    __slots__ = ("values", "grad", "graph", "op", "node_id", "_backward", "_kink_gap")
    __array_priority__ = 1000

    def __init__(self, values, graph: Graph | None = None, op: str = "const",
                 backward=None, kink_gap=None):
        self.values = values if isinstance(values, np.ndarray) and values.ndim == 2 else _as_array(values)
        self.grad = None
        self.graph = graph
        self.op = op
        self.node_id = None
        self._backward = backward
        self._kink_gap = kink_gap
        if graph is not None:
            graph._record(self)

    @property
    def shape(self):
        return self.values.shape

    @property
    def requires_grad(self):
        return self.graph is not None

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.values[0, 0])

    def _accumulate(self, g):
        if self.graph is None:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape}, values={self.values!r})"

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, other: matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / float(other))

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(_as_array(x))


def _graph_of(*ts):
    graph = None
    for t in ts:
        if t.graph is not None:
            if graph is not None and t.graph is not graph:
                raise GraphError("operands belong to different graphs")
            graph = t.graph
    return graph


def _same_shape(a: Tensor, b: Tensor, opname: str):
    if a.shape != b.shape:
        raise ShapeError(f"{opname}: shape mismatch {a.shape} vs {b.shape}")


def _is_scalar(x):
    return isinstance(x, (int, float, np.floating, np.integer)) and not isinstance(x, bool)


# ---------------------------------------------------------------- binary ops

def add(a, b) -> Tensor:
    if _is_scalar(b):
        a = as_tensor(a)
        return _unary(a, a.values + float(b), "add_scalar", lambda g: g)
    if _is_scalar(a):
        return add(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "add")
    graph = _graph_of(a, b)
    if graph is None:
        return Tensor(a.values + b.values)

    def backward(g):
        a._accumulate(g)
        b._accumulate(g)
    return Tensor(a.values + b.values, graph, "add", backward)


def sub(a, b) -> Tensor:
    if _is_scalar(b):
        return add(a, -float(b))
    if _is_scalar(a):
        return add(neg(b), float(a))
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "sub")
    graph = _graph_of(a, b)
    if graph is None:
        return Tensor(a.values - b.values)

    def backward(g):
        a._accumulate(g)
        b._accumulate(-g)
    return Tensor(a.values - b.values, graph, "sub", backward)


def mul(a, b) -> Tensor:
    if _is_scalar(b):
        a, s = as_tensor(a), float(b)
        return _unary(a, a.values * s, "mul_scalar", lambda g: g * s)
    if _is_scalar(a):
        return mul(b, a)
    a, b = as_tensor(a), as_tensor(b)
    _same_shape(a, b, "mul")
    graph = _graph_of(a, b)
    av, bv = a.values, b.values
    if graph is None:
        return Tensor(av * bv)

    def backward(g):
        a._accumulate(g * bv)
        b._accumulate(g * av)
    return Tensor(av * bv, graph, "mul", backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ {a.shape} @ {b.shape}")
    graph = _graph_of(a, b)
    av, bv = a.values, b.values
    out = av @ bv
    if graph is None:
        return Tensor(out)

    def backward(g):
        if a.graph is not None:
            a._accumulate(g @ bv.T)
        if b.graph is not None:
            b._accumulate(av.T @ g)
    return Tensor(out, graph, "matmul", backward)


# ----------------------------------------------------------------- unary ops

def _unary(a: Tensor, out: np.ndarray, op: str, local, kink_gap=None) -> Tensor:
    if a.graph is None:
        return Tensor(out)

    def backward(g):
        a._accumulate(local(g))
    return Tensor(out, a.graph, op, backward, kink_gap)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, -a.values, "neg", lambda g: -g)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, a.values.T.copy(), "transpose", lambda g: g.T)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _unary(a, s, "sigmoid", lambda g: g * s * (1.0 - s))


def maximum(a, scalar: float) -> Tensor:
    """Elementwise ``max(a, scalar)``; subgradient 0 at the kink."""
    a = as_tensor(a)
    x = a.values
    s = float(scalar)
    above = x > s
    return _unary(a, np.where(above, x, s), "maximum", lambda g: g * above,
                  kink_gap=lambda: float(np.min(np.abs(x - s))))


def square(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    return _unary(a, x * x, "square", lambda g: 2.0 * g * x)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    if np.any(x < 0):
        raise NumericDomainError("sqrt of a negative value")
    r = np.sqrt(x)
    if a.graph is not None and np.any(r == 0):
        raise NumericDomainError("sqrt gradient is infinite at 0; add an epsilon guard")
    return _unary(a, r, "sqrt", lambda g: g * 0.5 / r)


def reciprocal(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    if np.any(x == 0):
        raise NumericDomainError("reciprocal of zero")
    r = 1.0 / x
    return _unary(a, r, "reciprocal", lambda g: -g * r * r)


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):  # overflow surfaces as inf, caught by the graph checks
        e = np.exp(a.values)
    return _unary(a, e, "exp", lambda g: g * e)


def log(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    if np.any(x <= 0):
        raise NumericDomainError("log of a non-positive value")
    return _unary(a, np.log(x), "log", lambda g: g / x)


def softplus(a) -> Tensor:
    """``log(1 + exp(a))`` computed without overflow."""
    a = as_tensor(a)
    x = a.values
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    e = np.exp(-np.abs(x))
    sig = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _unary(a, out, "softplus", lambda g: g * sig)


def abs_(a) -> Tensor:
    a = as_tensor(a)
    x = a.values
    sign = np.sign(x)
    return _unary(a, np.abs(x), "abs", lambda g: g * sign,
                  kink_gap=lambda: float(np.min(np.abs(x))))


# ---------------------------------------------------------------- reductions

def _check_axis(a: Tensor, axis):
    if axis not in (None, 0, 1):
        raise ShapeError(f"axis must be None, 0 or 1, got {axis}")
    n = a.values.size if axis is None else a.shape[axis]
    if n == 0:
        raise ShapeError("reduction over an empty axis")


def _reduce_shape(a: Tensor, axis):
    if axis is None:
        return (1, 1)
    return (1, a.shape[1]) if axis == 0 else (a.shape[0], 1)


def sum_(a, axis=None) -> Tensor:
    a = as_tensor(a)
    _check_axis(a, axis)
    out = a.values.sum(axis=axis).reshape(_reduce_shape(a, axis))
    shape = a.shape
    return _unary(a, out, "sum", lambda g: np.broadcast_to(g, shape))


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    _check_axis(a, axis)
    n = a.values.size if axis is None else a.shape[axis]
    out = a.values.mean(axis=axis).reshape(_reduce_shape(a, axis))
    shape = a.shape
    return _unary(a, out, "mean", lambda g: np.broadcast_to(g / n, shape))


def norm(a, p: int = 2, axis=None) -> Tensor:
    """p-norm for p in {1, 2}.

    The 2-norm is ``sqrt(sum(x**2) + EPS_NORM)``; the 1-norm uses
    subgradient 0 wherever an entry is exactly 0.
    """
    a = as_tensor(a)
    _check_axis(a, axis)
    x = a.values
    shape = _reduce_shape(a, axis)
    if p == 1:
        out = np.abs(x).sum(axis=axis).reshape(shape)
        sign = np.sign(x)
        return _unary(a, out, "norm1", lambda g: g * sign,
                      kink_gap=lambda: float(np.min(np.abs(x))))
    if p == 2:
        sq = (x * x).sum(axis=axis).reshape(shape)
        out = np.sqrt(sq + EPS_NORM)
        return _unary(a, out, "norm2", lambda g: g * x / out,
                      kink_gap=lambda: float(np.sqrt(np.min(sq))))
    raise ValueError(f"only p in {{1, 2}} is supported, got {p}")


# ------------------------------------------------------------- grad checking

@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: list = field(default_factory=list)
    analytic: list = field(default_factory=list)
    numeric: list = field(default_factory=list)
    skipped: bool = False
    reason: str = ""

    @property
    def worst(self) -> float:
        return max(self.max_rel_err, default=0.0)


def relative_error(a: np.ndarray, b: np.ndarray, floor: float) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(f, inputs, step: float = 1e-6, tol: float = 1e-5,
               floor: float = 1e-3) -> GradCheckReport:
    """Compare reverse-mode gradients of ``f`` with central differences.

    ``f`` maps tensors (one per entry of ``inputs``) to a 1x1 tensor. The
    error per entry is ``|a - n| / max(|a|, |n|, floor)``; ``floor`` keeps
    near-zero gradient entries from turning rounding noise into huge
    relative errors. If any recorded op has an input within ``10 * step``
    of a kink the check is skipped, since central differences straddle
    the kink there.
    """
    arrays = [_as_array(x) for x in inputs]
    graph = Graph()
    leaves = [graph.leaf(x, name=f"input{i}") for i, x in enumerate(arrays)]
    out = f(*leaves)
    bad = graph.first_non_finite()
    if bad is not None:
        raise NumericDomainError(f"non-finite value at node {bad.node_id} ({bad.op})")
    near = graph.kinks(10 * step)
    if near:
        names = sorted({n.op for n in near})
        return GradCheckReport(passed=True, skipped=True,
                               reason=f"input within {10 * step:g} of a kink in {', '.join(names)}")
    graph.backward(out)

    report = GradCheckReport(passed=True)
    for i, x in enumerate(arrays):
        analytic = leaves[i].grad if leaves[i].grad is not None else np.zeros_like(x)
        numeric = np.zeros_like(x)
        for idx in np.ndindex(x.shape):
            vals = []
            for sign in (1.0, -1.0):
                pert = [a.copy() for a in arrays]
                pert[i][idx] += sign * step
                vals.append(f(*[Tensor(a) for a in pert]).item())
            numeric[idx] = (vals[0] - vals[1]) / (2 * step)
        err = relative_error(analytic, numeric, floor)
        worst = float(err.max()) if err.size else 0.0
        if not math.isfinite(worst):
            worst = math.inf
        report.max_rel_err.append(worst)
        report.analytic.append(analytic)
        report.numeric.append(numeric)
        if not worst < tol:
            report.passed = False
    return report
