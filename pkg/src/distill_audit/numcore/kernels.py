"""Hot inner loops of the tensor engine.

Every kernel exists twice: ``*_numba`` (compiled, fused loops) and
``*_numpy`` (vectorised reference). The exported name is bound once, from
``DISTILL_AUDIT_NUMBA``. Both paths agree to float rounding, not bitwise:
a run is reproducible only under a fixed choice of path.

Array arguments are C-contiguous; callers reshape to 2-D/3-D first.
"""

import math

import numpy as np

from .._accel import njit, pick

_GELU_C = math.sqrt(2.0 / math.pi)


# -- softmax over the last axis ---------------------------------------------

@njit
def _softmax_rows_numba(x):
    rows, cols = x.shape
    out = np.empty_like(x)
    for i in range(rows):
        m = x[i, 0]
        for j in range(1, cols):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(cols):
            e = math.exp(x[i, j] - m)
            out[i, j] = e
            s += e
        inv = 1.0 / s
        for j in range(cols):
            out[i, j] *= inv
    return out


def _softmax_rows_numpy(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# -- causal (lower-triangular) softmax, (batch, T, T) -------------------------

@njit
def _causal_softmax_numba(scores):
    b, t, _ = scores.shape
    out = np.zeros_like(scores)
    for n in range(b):
        for i in range(t):
            m = scores[n, i, 0]
            for j in range(1, i + 1):
                if scores[n, i, j] > m:
                    m = scores[n, i, j]
            s = 0.0
            for j in range(i + 1):
                e = math.exp(scores[n, i, j] - m)
                out[n, i, j] = e
                s += e
            inv = 1.0 / s
            for j in range(i + 1):
                out[n, i, j] *= inv
    return out


def _causal_softmax_numpy(scores):
    t = scores.shape[-1]
    masked = np.where(np.tri(t, dtype=bool), scores, -np.inf)
    e = np.exp(masked - masked.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@njit
def _softmax_backward_numba(probs, grad):
    b, t, k = probs.shape
    out = np.empty_like(probs)
    for n in range(b):
        for i in range(t):
            dot = 0.0
            for j in range(k):
                dot += probs[n, i, j] * grad[n, i, j]
            for j in range(k):
                out[n, i, j] = probs[n, i, j] * (grad[n, i, j] - dot)
    return out


def _softmax_backward_numpy(probs, grad):
    return probs * (grad - (probs * grad).sum(axis=-1, keepdims=True))


# -- layer norm over the last axis, x is (rows, D) ----------------------------

@njit
def _layer_norm_numba(x, weight, bias, eps):
    rows, d = x.shape
    y = np.empty_like(x)
    xhat = np.empty_like(x)
    rstd = np.empty(rows, dtype=x.dtype)
    for i in range(rows):
        mu = 0.0
        for j in range(d):
            mu += x[i, j]
        mu /= d
        var = 0.0
        for j in range(d):
            diff = x[i, j] - mu
            var += diff * diff
        var /= d
        r = 1.0 / math.sqrt(var + eps)
        rstd[i] = r
        for j in range(d):
            h = (x[i, j] - mu) * r
            xhat[i, j] = h
            y[i, j] = h * weight[j] + bias[j]
    return y, xhat, rstd


def _layer_norm_numpy(x, weight, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    rstd = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x - mu) * rstd
    return xhat * weight + bias, xhat, rstd[:, 0]


@njit
def _layer_norm_backward_numba(grad, xhat, rstd, weight):
    rows, d = grad.shape
    dx = np.empty_like(grad)
    dw = np.zeros(d, dtype=grad.dtype)
    db = np.zeros(d, dtype=grad.dtype)
    for i in range(rows):
        mean_g = 0.0
        mean_gx = 0.0
        for j in range(d):
            g = grad[i, j] * weight[j]
            mean_g += g
            mean_gx += g * xhat[i, j]
            dw[j] += grad[i, j] * xhat[i, j]
            db[j] += grad[i, j]
        mean_g /= d
        mean_gx /= d
        for j in range(d):
            g = grad[i, j] * weight[j]
            dx[i, j] = rstd[i] * (g - mean_g - xhat[i, j] * mean_gx)
    return dx, dw, db


def _layer_norm_backward_numpy(grad, xhat, rstd, weight):
    g = grad * weight
    mean_g = g.mean(axis=1, keepdims=True)
    mean_gx = (g * xhat).mean(axis=1, keepdims=True)
    dx = rstd[:, None] * (g - mean_g - xhat * mean_gx)
    return dx, (grad * xhat).sum(axis=0), grad.sum(axis=0)


# -- GELU (tanh form) ------------------------------------------------------------
# numpy only: its SIMD float32 tanh runs about 10x faster than the scalar libm
# calls a compiled loop makes (no SVML here), so a numba variant would lose.

def _gelu_consts(dtype):
    return np.array([_GELU_C, 0.044715, 0.5, 1.0, 3.0], dtype=dtype)


def gelu(x):
    """Returns ``(gelu(x), tanh_term)``; the second feeds :func:`gelu_backward`."""
    c, a, half, one, _ = _gelu_consts(x.dtype)
    th = x * x
    th *= a
    th += one
    th *= x
    th *= c
    np.tanh(th, out=th)
    out = th + one
    out *= x
    out *= half
    return out, th


def gelu_backward(x, th, grad):
    c, a, half, one, three = _gelu_consts(x.dtype)
    du = x * x
    du *= three * a
    du += one
    du *= c
    d = th * th
    np.subtract(one, d, out=d)
    d *= x
    d *= du
    d += one
    d += th
    d *= half
    d *= grad
    return d


# -- embedding scatter-add ----------------------------------------------------

@njit
def _scatter_rows_numba(index, grad, n_rows):
    out = np.zeros((n_rows, grad.shape[1]), dtype=grad.dtype)
    for i in range(index.size):
        r = index[i]
        for j in range(grad.shape[1]):
            out[r, j] += grad[i, j]
    return out


def _scatter_rows_numpy(index, grad, n_rows):
    out = np.zeros((n_rows, grad.shape[1]), dtype=grad.dtype)
    np.add.at(out, index, grad)
    return out


# -- Adam ---------------------------------------------------------------------

@njit
def _adam_update_numba(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    p = param.reshape(-1)
    g = grad.reshape(-1)
    mm = m.reshape(-1)
    vv = v.reshape(-1)
    for i in range(p.size):
        gi = g[i]
        mm[i] = beta1 * mm[i] + (1.0 - beta1) * gi
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
        mhat = mm[i] / bc1
        vhat = vv[i] / bc2
        p[i] -= lr * mhat / (math.sqrt(vhat) + eps)


def _adam_update_numpy(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


softmax_rows = pick(_softmax_rows_numba, _softmax_rows_numpy)
causal_softmax = pick(_causal_softmax_numba, _causal_softmax_numpy)
softmax_backward = pick(_softmax_backward_numba, _softmax_backward_numpy)
layer_norm = pick(_layer_norm_numba, _layer_norm_numpy)
layer_norm_backward = pick(_layer_norm_backward_numba, _layer_norm_backward_numpy)
scatter_rows = pick(_scatter_rows_numba, _scatter_rows_numpy)
adam_update = pick(_adam_update_numba, _adam_update_numpy)

PAIRS = {
    "softmax_rows": (_softmax_rows_numba, _softmax_rows_numpy),
    "causal_softmax": (_causal_softmax_numba, _causal_softmax_numpy),
    "softmax_backward": (_softmax_backward_numba, _softmax_backward_numpy),
    "layer_norm": (_layer_norm_numba, _layer_norm_numpy),
    "layer_norm_backward": (_layer_norm_backward_numba, _layer_norm_backward_numpy),
    "scatter_rows": (_scatter_rows_numba, _scatter_rows_numpy),
    "adam_update": (_adam_update_numba, _adam_update_numpy),
}
