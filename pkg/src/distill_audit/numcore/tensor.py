"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` records the op that produced it and a closure mapping the
output gradient to one gradient per parent. :func:`backward` orders the graph
topologically (each node once), zeroes every gradient, then runs the closures
in reverse order.

Dtype follows the inputs: models run in float32, gradient checks feed float64
leaves and get a float64 graph ("shadow" evaluation) through the same code.
"""

import contextlib
import math

import numpy as np

from ..errors import GraphCycleError, InvalidArgument
from . import kernels

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(as_tensor(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise InvalidArgument("division by a tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def _node(data, parents, backward_fn, op):
    requires = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    if requires:
        out._parents = parents
        out._backward = backward_fn
        out.op = op
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _topological(root):
    order = []
    state = {}  # id -> 1 visiting, 2 done
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        mark = state.get(key)
        if mark == 2:
            continue
        if mark == 1:
            raise GraphCycleError(f"cycle through node {node!r}")
        state[key] = 1
        stack.append((node, True))
        for parent in node._parents:
            pmark = state.get(id(parent))
            if pmark == 1:
                raise GraphCycleError(f"cycle through node {parent!r}")
            if pmark is None:
                stack.append((parent, False))
    return order


def backward(loss):
    """Populate ``.grad`` on every node reachable from the scalar ``loss``."""
    if loss.data.size != 1:
        raise InvalidArgument(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topological(loss)
    for node in order:
        node.grad = None
    # Intermediate gradients are allocated on first write; an array handed
    # to a parent may be shared, so it is copied before any in-place add.
    owned = set()
    loss.grad = np.ones_like(loss.data)
    owned.add(id(loss))
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            key = id(parent)
            if parent.grad is None:
                parent.grad = g
            elif key in owned:
                parent.grad += g
            else:
                parent.grad = parent.grad + g
                owned.add(key)
    for node in order:
        if node.requires_grad and node.grad is None:
            node.grad = np.zeros_like(node.data)
        elif node.grad is not None and node.grad.dtype != node.data.dtype:
            node.grad = node.grad.astype(node.data.dtype)


# -- elementwise ---------------------------------------------------------------

def add(a, b):
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def neg(a):
    return _node(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b):
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        c = np.asarray(b, dtype=a.dtype)
        return _node(a.data * c, (a,), lambda g: (_unbroadcast(g * c, a.shape),), "scale")
    sa, sb = a.shape, b.shape
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, sa), _unbroadcast(g * a.data, sb)), "mul")


def power(a, exponent):
    p = float(exponent)
    return _node(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1.0),), "pow")


def exp(a):
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def relu(a):
    mask = a.data > 0
    return _node(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def gelu(a):
    flat = np.ascontiguousarray(a.data).reshape(-1)
    out, th = kernels.gelu(flat)

    def back(g):
        gf = np.ascontiguousarray(g).reshape(-1)
        return (kernels.gelu_backward(flat, th, gf).reshape(a.shape),)

    return _node(out.reshape(a.shape), (a,), back, "gelu")


def dropout(a, p, rng):
    """Inverted dropout; the mask comes from 16-bit draws of ``rng``."""
    if p <= 0.0:
        return a
    threshold = int(round(p * 65536))
    keep = (rng.bits16(a.data.size) >= threshold).reshape(a.shape)
    scale = np.asarray(1.0 / (1.0 - p), dtype=a.dtype)
    mask = keep * scale
    return _node(a.data * mask, (a,), lambda g: (g * mask,), "dropout")


# -- reductions and shape ------------------------------------------------------

def sum_(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _node(np.asarray(out), (a,), back, "sum")


def mean(a, axis=None, keepdims=False):
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum_(a, axis, keepdims), 1.0 / float(count))


def reshape(a, shape):
    old = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a, axes):
    axes = tuple(axes) if axes else tuple(reversed(range(a.data.ndim)))
    inverse = tuple(np.argsort(axes))
    return _node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def concat(tensors, axis=-1):
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _node(data, tuple(tensors), lambda g: tuple(np.split(g, sizes, axis=axis)), "concat")


# -- linear algebra -------------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def back(g):
        if b.data.ndim == 1:
            ga = np.multiply.outer(g, b.data)
            gb = np.tensordot(g, a.data, axes=(tuple(range(g.ndim)), tuple(range(g.ndim))))
            return _unbroadcast(ga, sa), gb
        ga = g @ np.swapaxes(b.data, -1, -2)
        if a.data.ndim == 1:
            gb = np.multiply.outer(a.data, g)
        elif b.data.ndim == 2:
            k = sa[-1]
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, sa), _unbroadcast(gb, sb)

    return _node(a.data @ b.data, (a, b), back, "matmul")


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    lead = x.shape[:-1]
    k = x.shape[-1]
    x2 = x.data.reshape(-1, k)
    out = x2 @ weight.data
    if bias is not None:
        out += bias.data
    out = out.reshape(lead + (weight.shape[1],))

    def back(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ weight.data.T).reshape(x.shape)
        gw = x2.T @ g2
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _node(out, parents, back, "linear")


def embedding(index, weight):
    """Row lookup ``weight[index]``; ``index`` is an integer array."""
    idx = np.asarray(index)
    if idx.size and (idx.min() < 0 or idx.max() >= weight.shape[0]):
        raise InvalidArgument(f"index out of range for table of {weight.shape[0]} rows")
    flat = idx.reshape(-1)
    out = weight.data[flat].reshape(idx.shape + (weight.shape[1],))

    def back(g):
        g2 = np.ascontiguousarray(g.reshape(-1, weight.shape[1]))
        return (kernels.scatter_rows(flat, g2, weight.shape[0]),)

    return _node(out, (weight,), back, "embedding")


def layer_norm(x, weight, bias, eps=1e-5):
    d = x.shape[-1]
    x2 = np.ascontiguousarray(x.data).reshape(-1, d)
    y, xhat, rstd = kernels.layer_norm(x2, weight.data, bias.data, eps)

    def back(g):
        g2 = np.ascontiguousarray(g).reshape(-1, d)
        dx, dw, db = kernels.layer_norm_backward(g2, xhat, rstd, weight.data)
        return dx.reshape(x.shape), dw, db

    return _node(y.reshape(x.shape), (x, weight, bias), back, "layer_norm")


def causal_attention(q, k, v):
    """Masked scaled dot-product attention on (batch, heads, T, head_dim)."""
    n, h, t, hd = q.shape
    scale = 1.0 / math.sqrt(hd)
    scores = (q.data @ np.swapaxes(k.data, -1, -2)) * np.asarray(scale, q.dtype)
    probs = kernels.causal_softmax(np.ascontiguousarray(scores.reshape(n * h, t, t)))
    probs = probs.reshape(n, h, t, t)
    out = probs @ v.data

    def back(g):
        gv = np.swapaxes(probs, -1, -2) @ g
        gp = g @ np.swapaxes(v.data, -1, -2)
        gs = kernels.softmax_backward(probs.reshape(n * h, t, t),
                                      np.ascontiguousarray(gp.reshape(n * h, t, t)))
        gs = gs.reshape(n, h, t, t) * np.asarray(scale, q.dtype)
        gq = gs @ k.data
        gk = np.swapaxes(gs, -1, -2) @ q.data
        return gq, gk, gv

    return _node(out, (q, k, v), back, "causal_attention")


# -- probability ops --------------------------------------------------------------

def softmax_data(logits, temperature=1.0):
    """Row softmax of a raw array over the last axis (no graph)."""
    x = np.asarray(logits)
    k = x.shape[-1]
    x2 = np.ascontiguousarray(x.reshape(-1, k))
    if temperature != 1.0:
        x2 = x2 / np.asarray(temperature, dtype=x2.dtype)
    return kernels.softmax_rows(x2).reshape(x.shape)


def log_softmax(logits, temperature=1.0):
    z = logits.data
    if temperature != 1.0:
        z = z / np.asarray(temperature, dtype=z.dtype)
    m = z.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True))
    out = z - lse
    probs = np.exp(out)
    inv_t = 1.0 / temperature

    def back(g):
        return ((g - probs * g.sum(axis=-1, keepdims=True)) * np.asarray(inv_t, z.dtype),)

    return _node(out, (logits,), back, "log_softmax")


def _rows(logits):
    k = logits.shape[-1]
    return np.ascontiguousarray(logits.data.reshape(-1, k))


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under row softmax."""
    z = _rows(logits)
    y = np.asarray(labels).reshape(-1)
    if y.shape[0] != z.shape[0]:
        raise InvalidArgument(f"{y.shape[0]} labels for {z.shape[0]} rows")
    n = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]
    rows = np.arange(n)
    loss = np.asarray((lse - z[rows, y]).sum() / n, dtype=z.dtype)

    def back(g):
        p = np.exp(z - lse[:, None])
        p[rows, y] -= 1.0
        return ((p * (g / n)).reshape(logits.shape),)

    return _node(loss, (logits,), back, "cross_entropy")


def soft_cross_entropy(logits, target):
    """Mean of ``-sum_k target_k log softmax(z)_k``; ``target`` is a raw array."""
    z = _rows(logits)
    t = np.asarray(target, dtype=z.dtype).reshape(z.shape)
    n = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    logp = z - (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))
    loss = np.asarray(-(t * logp).sum() / n, dtype=z.dtype)

    def back(g):
        p = np.exp(logp)
        grad = p * t.sum(axis=1, keepdims=True) - t
        return ((grad * (g / n)).reshape(logits.shape),)

    return _node(loss, (logits,), back, "soft_cross_entropy")


def kl_to_target(logits, target, temperature=1.0, floor=1e-12):
    """Mean over rows of ``sum_k t_k (log t_k - log softmax(z/T)_k)``.

    ``target`` is a detached array. Rows need not sum to one: the pointwise
    form is used as-is (framework KL semantics); the ``t log t`` term uses
    ``max(t, floor)`` inside the log.
    """
    z = _rows(logits)
    t = np.asarray(target, dtype=z.dtype).reshape(z.shape)
    n = z.shape[0]
    zt = z / np.asarray(temperature, dtype=z.dtype)
    m = zt.max(axis=1, keepdims=True)
    logq = zt - (m + np.log(np.exp(zt - m).sum(axis=1, keepdims=True)))
    logt = np.log(np.maximum(t, floor))
    loss = np.asarray((t * (logt - logq)).sum() / n, dtype=z.dtype)

    def back(g):
        q = np.exp(logq)
        grad = (q * t.sum(axis=1, keepdims=True) - t) / temperature
        return ((grad * (g / n)).reshape(logits.shape),)

    return _node(loss, (logits,), back, "kl")


def mse(a, b):
    """Mean squared error; ``b`` may be a tensor or a raw (detached) array."""
    bd = b.data if isinstance(b, Tensor) else np.asarray(b, dtype=a.dtype)
    if a.shape != bd.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {bd.shape}")
    diff = a.data - bd
    n = diff.size
    loss = np.asarray((diff * diff).sum() / n, dtype=a.dtype)
    if isinstance(b, Tensor):
        return _node(loss, (a, b), lambda g: (2.0 * g * diff / n, -2.0 * g * diff / n), "mse")
    return _node(loss, (a,), lambda g: (2.0 * g * diff / n,), "mse")
