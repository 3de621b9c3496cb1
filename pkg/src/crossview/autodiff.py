"""Reverse-mode automatic differentiation over numpy arrays.

Small und explicit: a Tensor wraps an ndarray, every op builds the output
tensor plus a closure that routes the output gradient to its parents, and
backward() walks the graph once in reverse topological order. float32 is
the working dtype for training; float64 graphs are used by the gradient
verification tests.

Shape rules are strict on purpose: binary elementwise ops demand equal
shapes, add() additionally accepts a trailing-axis bias vector or a python
scalar, and any other broadcasting must go through broadcast_to() so it is
visible at the call site.
"""

import contextlib

import numpy as np

from . import kernels
from .errors import NonFiniteValue, NotScalarLoss, ShapeMismatch

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_grad_borrowed")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._grad_borrowed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def parameter(data, dtype=np.float32) -> Tensor:
    return Tensor(np.array(data, dtype=dtype), requires_grad=True)


def _wrap(data, parents, backward_fn):
    """Build an op output; drops the tape when grads are off or unneeded."""
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue("op produced NaN or Inf")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._parents = ()
    out._backward = None
    out._grad_borrowed = False
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _acc(t: Tensor, g: np.ndarray):
    # Fan-out adds. The first contribution is held by reference (it may
    # alias an upstream gradient, which is never mutated once consumed);
    # a second contribution materializes an owned sum.
    if g.dtype != t.data.dtype:
        g = g.astype(t.data.dtype)
    if t.grad is None:
        t.grad = g
        t._grad_borrowed = True
    elif t._grad_borrowed:
        t.grad = t.grad + g
        t._grad_borrowed = False
    else:
        t.grad += g


# ----------------------------------------------------------------- ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeMismatch("matmul needs rank >= 2 operands")
    if bd.ndim == 2:
        if ad.shape[-1] != bd.shape[0]:
            raise ShapeMismatch(f"matmul {ad.shape} @ {bd.shape}")
    else:
        if ad.ndim != bd.ndim or ad.shape[:-2] != bd.shape[:-2] or ad.shape[-1] != bd.shape[-2]:
            raise ShapeMismatch(f"matmul {ad.shape} @ {bd.shape}")
    data = ad @ bd

    def backward(out):
        g = out.grad
        if b.requires_grad:
            if bd.ndim == 2:
                _acc(b, ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
            else:
                _acc(b, np.swapaxes(ad, -1, -2) @ g)
        if a.requires_grad:
            if bd.ndim == 2:
                _acc(a, g @ bd.T)
            else:
                _acc(a, g @ np.swapaxes(bd, -1, -2))

    return _wrap(data, (a, b), backward)


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        data = a.data + float(b)

        def backward_const(out):
            _acc(a, out.grad)

        return _wrap(data, (a,), backward_const)

    if b.data.shape == a.data.shape:
        data = a.data + b.data

        def backward_same(out):
            if a.requires_grad:
                _acc(a, out.grad)
            if b.requires_grad:
                _acc(b, out.grad)

        return _wrap(data, (a, b), backward_same)

    if b.data.ndim == 1 and a.data.ndim >= 1 and b.data.shape[0] == a.data.shape[-1]:
        data = a.data + b.data

        def backward_bias(out):
            if a.requires_grad:
                _acc(a, out.grad)
            if b.requires_grad:
                _acc(b, out.grad.reshape(-1, b.data.shape[0]).sum(axis=0))

        return _wrap(data, (a, b), backward_bias)

    raise ShapeMismatch(f"add {a.data.shape} + {b.data.shape}")


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    data = a.data * s

    def backward(out):
        _acc(a, out.grad * s)

    return _wrap(data, (a,), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"mul {a.data.shape} * {b.data.shape}")
    data = a.data * b.data

    def backward(out):
        if a.requires_grad:
            _acc(a, out.grad * b.data)
        if b.requires_grad:
            _acc(b, out.grad * a.data)

    return _wrap(data, (a, b), backward)


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        data = np.broadcast_to(a.data, shape).copy()
    except ValueError as e:
        raise ShapeMismatch(str(e)) from e
    in_shape = a.data.shape
    lead = len(shape) - len(in_shape)

    def backward(out):
        g = out.grad
        if lead:
            g = g.sum(axis=tuple(range(lead)))
        expand = tuple(i for i, d in enumerate(in_shape) if d == 1 and g.shape[i] != 1)
        if expand:
            g = g.sum(axis=expand, keepdims=True)
        _acc(a, g)

    return _wrap(data, (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeMismatch("layer_norm gain/bias must match the last axis")
    y, xhat, inv_std = kernels.layernorm_fwd(x.data, gain.data, bias.data, eps)

    def backward(out):
        dx, dg, db = kernels.layernorm_bwd(xhat, inv_std, gain.data, out.grad)
        if x.requires_grad:
            _acc(x, dx)
        if gain.requires_grad:
            _acc(gain, dg)
        if bias.requires_grad:
            _acc(bias, db)

    return _wrap(y, (x, gain, bias), backward)


def softmax(x: Tensor) -> Tensor:
    y = kernels.softmax_fwd(x.data)

    def backward(out):
        _acc(x, kernels.softmax_bwd(y, out.grad))

    return _wrap(y, (x,), backward)


def gelu(x: Tensor) -> Tensor:
    y = kernels.gelu_fwd(x.data)

    def backward(out):
        _acc(x, kernels.gelu_bwd(x.data, out.grad))

    return _wrap(y, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        data = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(str(e)) from e
    in_shape = x.data.shape

    def backward(out):
        _acc(x, out.grad.reshape(in_shape))

    return _wrap(data, (x,), backward)


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise ShapeMismatch(f"transpose axes {axes} invalid for rank {x.data.ndim}")
    data = np.ascontiguousarray(np.transpose(x.data, axes))
    inverse = tuple(np.argsort(axes))

    def backward(out):
        _acc(x, np.transpose(out.grad, inverse))

    return _wrap(data, (x,), backward)


def slice_along(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    nd = x.data.ndim
    if not -nd <= axis < nd:
        raise ShapeMismatch(f"axis {axis} out of range for rank {nd}")
    axis = axis % nd
    index = (slice(None),) * axis + (slice(start, stop),)
    data = np.ascontiguousarray(x.data[index])
    in_shape = x.data.shape

    def backward(out):
        g = np.zeros(in_shape, dtype=out.grad.dtype)
        g[index] = out.grad
        _acc(x, g)

    return _wrap(data, (x,), backward)


def concat(parts, axis: int) -> Tensor:
    parts = list(parts)
    if not parts:
        raise ShapeMismatch("concat of zero tensors")
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(out):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                index = (slice(None),) * (axis % out.grad.ndim) + (slice(lo, hi),)
                _acc(p, out.grad[index])

    return _wrap(data, tuple(parts), backward)


def embedding(table: Tensor, indices) -> Tensor:
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeMismatch("embedding indices must be integers")
    data = table.data[idx]

    def backward(out):
        g = np.zeros_like(table.data)
        np.add.at(g, idx, out.grad)
        _acc(table, g)

    return _wrap(data, (table,), backward)


def mean(x: Tensor) -> Tensor:
    data = np.asarray(x.data.mean(), dtype=x.data.dtype)
    n = x.data.size

    def backward(out):
        _acc(x, np.full(x.data.shape, out.grad / n, dtype=x.data.dtype))

    return _wrap(data, (x,), backward)


def sum_of_squares(x: Tensor) -> Tensor:
    data = np.asarray(np.sum(x.data * x.data), dtype=x.data.dtype)

    def backward(out):
        _acc(x, 2.0 * x.data * out.grad)

    return _wrap(data, (x,), backward)


# ----------------------------------------------------------------- engine


def _topo_order(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params=None):
    """Populate .grad over the graph below `loss`.

    Gradients are freshly assigned (not accumulated across calls). When a
    `params` list is given, any listed tensor the graph never reached gets
    an explicit zero gradient.
    """
    if loss.data.ndim != 0:
        raise NotScalarLoss(f"loss has shape {loss.data.shape}")
    order = _topo_order(loss)
    for node in order:
        node.grad = None
        node._grad_borrowed = False
    loss.grad = np.ones((), dtype=loss.data.dtype)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node)
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)


# ----------------------------------------------------------------- optimizer


class AdamW:
    """Decoupled-weight-decay Adam over a list of parameter tensors."""

    def __init__(self, params, lr=1.2e-4, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.step_count += 1
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            adamw_step(
                p.data.reshape(-1),
                p.grad.reshape(-1),
                m.reshape(-1),
                v.reshape(-1),
                self.step_count,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                self.weight_decay,
            )

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adamw_step(param, grad, m, v, step, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """One AdamW update on flat arrays, in place. `step` counts from 1.

    Weight decay is decoupled: param scales by (1 - lr * wd) before the
    bias-corrected Adam step.
    """
    if not (param.shape == grad.shape == m.shape == v.shape):
        raise ShapeMismatch("adamw_step operands must share a shape")
    kernels.adamw_update(param, grad, m, v, step, lr, beta1, beta2, eps, weight_decay)
