"""Reverse-mode automatic differentiation over dense float64 arrays.

A Tape records every operation applied to tensors derived from its leaves.
Calling Tape.gradients(root) walks the record once in strict reverse order
and accumulates adjoints, returning one gradient per leaf.  The engine is
deliberately small: numpy does all array arithmetic, the tape only stores
parent links and backward closures.

Conventions baked into the backward rules:
  * clamp / max-with-scalar propagate zero gradient where the input is
    outside the active region and identity at the boundary point itself
    (the boundary belongs to the active side),
  * every forward result is checked finite; NaN or Inf raises immediately,
  * gradients accumulate by addition in reverse record order, so replaying
    the same tape gives bit-identical results.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor", "Tape", "NonFiniteError", "constant", "add", "sub", "mul",
    "div", "neg", "matmul", "sin", "cos", "sqrt", "exp", "tanh",
    "reciprocal", "tsum", "tmean", "max_scalar", "clamp", "where",
    "concat", "stack", "reshape", "transpose", "take", "index_add",
    "broadcast_to", "squared_norm", "vector_norm", "lift",
]


class NonFiniteError(FloatingPointError):
    """Raised when a forward op produces NaN or Inf."""


class _Node:
    __slots__ = ("parents", "backward")

    def __init__(self, parents, backward):
        self.parents = parents      # tuple of node ids, tracked inputs only
        self.backward = backward    # grad_out -> tuple of parent grads, or None for leaves


class Tensor:
    """Dense float64 array plus an optional handle into a recording tape."""

    __slots__ = ("data", "node", "tape")

    def __init__(self, data, node=None, tape=None):
        self.data = data
        self.node = node
        self.tape = tape

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        """Constant view of the same values; nothing flows back through it."""
        return Tensor(self.data)

    def __repr__(self):
        tag = f" node={self.node}" if self.node is not None else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return _slice(self, key)


def constant(value) -> Tensor:
    return Tensor(_coerce(value))


def _coerce(value):
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(_coerce(value))


def _check_finite(arr, op_name):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by op '{op_name}'")
    return arr


class Tape:
    """Single-owner operation record.  One tape per optimization step."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._leaf_shapes: dict[int, tuple] = {}

    def __len__(self):
        return len(self._nodes)

    def leaf(self, data) -> Tensor:
        """Register a tracked leaf.  The array is copied and frozen."""
        arr = _coerce(data).copy()
        arr.flags.writeable = False
        _check_finite(arr, "leaf")
        nid = len(self._nodes)
        self._nodes.append(_Node((), None))
        self._leaf_shapes[nid] = arr.shape
        return Tensor(arr, nid, self)

    def _record(self, out_data, parent_ids, backward) -> Tensor:
        nid = len(self._nodes)
        self._nodes.append(_Node(tuple(parent_ids), backward))
        return Tensor(out_data, nid, self)

    def gradients(self, root: Tensor) -> dict[int, Tensor]:
        """Adjoints of a scalar root with respect to every leaf.

        Returns a map {leaf node id -> Tensor}.  Leaves the root does not
        depend on get zero gradients.  Calling this twice on the same tape
        yields bit-identical results.
        """
        if root.tape is not self or root.node is None:
            raise ValueError("backward root was not recorded on this tape")
        if root.size != 1:
            raise ValueError(f"backward root must be scalar, got shape {root.shape}")
        adj: list = [None] * (root.node + 1)
        adj[root.node] = np.ones_like(root.data)
        for nid in range(root.node, -1, -1):
            g = adj[nid]
            if g is None:
                continue
            node = self._nodes[nid]
            if node.backward is None:
                continue
            for pid, pg in zip(node.parents, node.backward(g)):
                if adj[pid] is None:
                    adj[pid] = np.asarray(pg, dtype=np.float64).copy()
                else:
                    adj[pid] = adj[pid] + pg
        out = {}
        for lid, shape in self._leaf_shapes.items():
            g = adj[lid] if lid <= root.node else None
            if g is None:
                g = np.zeros(shape, dtype=np.float64)
            out[lid] = Tensor(np.asarray(g, dtype=np.float64))
        return out


def _tape_of(*tensors) -> Tape | None:
    tape = None
    for t in tensors:
        if isinstance(t, Tensor) and t.node is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError("inputs live on different tapes")
    return tape


def lift(out_data, inputs, backward, op_name="custom") -> Tensor:
    """Record a custom op.

    inputs: list of Tensors; backward(grad_out) must return one gradient per
    input, in input order (entries for untracked inputs are ignored).  Used
    for fused ops whose backward recomputes intermediates instead of storing
    them.
    """
    out = _check_finite(np.asarray(out_data, dtype=np.float64), op_name)
    tape = _tape_of(*inputs)
    if tape is None:
        return Tensor(out)
    tracked = [(i, t.node) for i, t in enumerate(inputs) if t.node is not None]
    idxs = [i for i, _ in tracked]
    pids = [nid for _, nid in tracked]

    def bw(g):
        grads = backward(g)
        return tuple(grads[i] for i in idxs)

    return tape._record(out, pids, bw)


def _unbroadcast(grad, shape):
    """Reduce grad to `shape` by summing the axes numpy broadcast expanded."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if keep:
        grad = grad.sum(axis=keep, keepdims=True)
    return grad


def _binary(a, b, fwd, bwd_a, bwd_b, name):
    a = _as_tensor(a)
    b = _as_tensor(b)
    out = _check_finite(fwd(a.data, b.data), name)
    tape = _tape_of(a, b)
    if tape is None:
        return Tensor(out)
    pids, bws = [], []
    if a.node is not None:
        pids.append(a.node)
        bws.append(lambda g: _unbroadcast(bwd_a(g, a.data, b.data, out), a.shape))
    if b.node is not None:
        pids.append(b.node)
        bws.append(lambda g: _unbroadcast(bwd_b(g, a.data, b.data, out), b.shape))
    return tape._record(out, pids, lambda g: tuple(f(g) for f in bws))


def _unary(x, fwd, bwd, name):
    x = _as_tensor(x)
    out = _check_finite(fwd(x.data), name)
    if x.node is None:
        return Tensor(out)
    return x.tape._record(out, (x.node,), lambda g: (bwd(g, x.data, out),))


def add(a, b):
    return _binary(a, b, lambda x, y: x + y,
                   lambda g, x, y, o: g, lambda g, x, y, o: g, "add")


def sub(a, b):
    return _binary(a, b, lambda x, y: x - y,
                   lambda g, x, y, o: g, lambda g, x, y, o: -g, "sub")


def mul(a, b):
    return _binary(a, b, lambda x, y: x * y,
                   lambda g, x, y, o: g * y, lambda g, x, y, o: g * x, "mul")


def div(a, b):
    return _binary(a, b, lambda x, y: x / y,
                   lambda g, x, y, o: g / y,
                   lambda g, x, y, o: -g * x / (y * y), "div")


def neg(x):
    return _unary(x, lambda v: -v, lambda g, v, o: -g, "neg")


def matmul(a, b):
    def bwd_a(g, x, y, o):
        return g @ np.swapaxes(y, -1, -2)

    def bwd_b(g, x, y, o):
        return np.swapaxes(x, -1, -2) @ g

    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with ndim >= 2")
    return _binary(a, b, lambda x, y: x @ y, bwd_a, bwd_b, "matmul")


def sin(x):
    return _unary(x, np.sin, lambda g, v, o: g * np.cos(v), "sin")


def cos(x):
    return _unary(x, np.cos, lambda g, v, o: -g * np.sin(v), "cos")


def sqrt(x):
    return _unary(x, np.sqrt, lambda g, v, o: g * (0.5 / o), "sqrt")


def exp(x):
    return _unary(x, np.exp, lambda g, v, o: g * o, "exp")


def tanh(x):
    return _unary(x, np.tanh, lambda g, v, o: g * (1.0 - o * o), "tanh")


def reciprocal(x):
    return _unary(x, lambda v: 1.0 / v, lambda g, v, o: -g * o * o, "reciprocal")


def _expand_reduced(g, in_shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, in_shape)
    ax = axis if isinstance(axis, tuple) else (axis,)
    ax = tuple(a % len(in_shape) for a in ax)
    if not keepdims:
        shape = list(in_shape)
        for a in ax:
            shape[a] = 1
        g = g.reshape(shape)
    return np.broadcast_to(g, in_shape)


def tsum(x, axis=None, keepdims=False):
    x = _as_tensor(x)

    def bwd(g, v, o):
        return _expand_reduced(g, v.shape, axis, keepdims).copy()

    return _unary(x, lambda v: np.sum(v, axis=axis, keepdims=keepdims), bwd, "sum")


def tmean(x, axis=None, keepdims=False):
    x = _as_tensor(x)

    def bwd(g, v, o):
        count = v.size if o.size == 0 else v.size // max(o.size, 1)
        return _expand_reduced(g, v.shape, axis, keepdims) / count

    return _unary(x, lambda v: np.mean(v, axis=axis, keepdims=keepdims), bwd, "mean")


def max_scalar(x, floor):
    """Elementwise max(x, floor) with a constant floor (hinge building block).

    Subgradient: identity where x >= floor, zero where x < floor.
    """
    floor_arr = _coerce(floor)

    def bwd(g, v, o):
        return g * (v >= floor_arr)

    return _unary(x, lambda v: np.maximum(v, floor_arr), bwd, "max_scalar")


def clamp(x, lo, hi):
    """Elementwise clip to [lo, hi]; bounds are constants (scalar or array).

    Subgradient: identity inside the band and at the boundary, zero outside.
    """
    lo_arr = _coerce(lo)
    hi_arr = _coerce(hi)

    def bwd(g, v, o):
        return g * ((v >= lo_arr) & (v <= hi_arr))

    return _unary(x, lambda v: np.clip(v, lo_arr, hi_arr), bwd, "clamp")


def where(mask, a, b):
    """Select a where mask else b.  The mask is constant; no gradient flows
    through the selection itself, only through the chosen branch."""
    mask_arr = np.asarray(mask, dtype=bool)
    return _binary(a, b, lambda x, y: np.where(mask_arr, x, y),
                   lambda g, x, y, o: g * mask_arr,
                   lambda g, x, y, o: g * ~mask_arr, "where")


def concat(parts, axis=0):
    parts = [_as_tensor(p) for p in parts]
    out = _check_finite(np.concatenate([p.data for p in parts], axis=axis), "concat")
    tape = _tape_of(*parts)
    if tape is None:
        return Tensor(out)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)
    tracked = [i for i, p in enumerate(parts) if p.node is not None]
    pids = [parts[i].node for i in tracked]

    def bwd(g):
        pieces = []
        for i in tracked:
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    return tape._record(out, pids, bwd)


def stack(parts, axis=0):
    parts = [_as_tensor(p) for p in parts]
    ndim_out = parts[0].ndim + 1
    ax = axis % ndim_out
    expanded = [reshape(p, p.shape[:ax] + (1,) + p.shape[ax:]) for p in parts]
    return concat(expanded, axis=ax)


def reshape(x, shape):
    x = _as_tensor(x)
    return _unary(x, lambda v: v.reshape(shape),
                  lambda g, v, o: g.reshape(v.shape), "reshape")


def transpose(x, axes):
    x = _as_tensor(x)
    inv = np.argsort(axes)
    return _unary(x, lambda v: v.transpose(axes),
                  lambda g, v, o: g.transpose(inv), "transpose")


def _slice(x, key):
    x = _as_tensor(x)

    def bwd(g, v, o):
        full = np.zeros_like(v)
        full[key] = g
        return full

    return _unary(x, lambda v: v[key], bwd, "slice")


def take(x, indices, axis=0):
    """Gather rows along axis 0 by a constant integer index array."""
    if axis != 0:
        raise ValueError("take supports axis=0 only")
    idx = np.asarray(indices, dtype=np.intp)

    def bwd(g, v, o):
        full = np.zeros_like(v)
        np.add.at(full, idx, g)
        return full

    return _unary(x, lambda v: v[idx], bwd, "take")


def index_add(values, indices, size):
    """Scatter-add rows of `values` into a zero array of leading dim `size`.

    indices is a constant integer array aligned with values' first axis.
    """
    idx = np.asarray(indices, dtype=np.intp)

    def fwd(v):
        out = np.zeros((size,) + v.shape[1:], dtype=np.float64)
        np.add.at(out, idx, v)
        return out

    return _unary(_as_tensor(values), fwd, lambda g, v, o: g[idx], "index_add")


def broadcast_to(x, shape):
    x = _as_tensor(x)
    return _unary(x, lambda v: np.broadcast_to(v, shape).copy(),
                  lambda g, v, o: _unbroadcast(g, v.shape), "broadcast_to")


def squared_norm(x, axis=None, keepdims=False):
    """Sum of squares, the squared L2 norm over the given axis."""
    x = _as_tensor(x)
    return tsum(mul(x, x), axis=axis, keepdims=keepdims)


_NORM_GUARD = 1e-24


def vector_norm(x, axis=-1, keepdims=False):
    """L2 norm with a zero-safe subgradient.

    sqrt is applied to max(sum(x^2), 1e-24): at the origin the clamp is
    inactive so the gradient is exactly zero instead of NaN, matching the
    convention that kinks contribute their active-side subgradient.
    """
    s = squared_norm(x, axis=axis, keepdims=keepdims)
    return sqrt(max_scalar(s, _NORM_GUARD))
