"""Validated probability helpers on plain arrays, evaluated in float64."""

import numpy as np

from ..errors import InvalidArgument

PROB_FLOOR = 1e-12


def softmax(logits, temperature=1.0):
    """Temperature softmax over the last axis with max subtraction.

    >>> softmax([0.0, 0.0]).tolist()
    [0.5, 0.5]
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1] < 2:
        raise InvalidArgument("softmax needs at least two logits")
    if not np.isfinite(z).all():
        raise InvalidArgument("non-finite logits")
    if not temperature > 0 or not np.isfinite(temperature):
        raise InvalidArgument(f"temperature must be positive, got {temperature}")
    z = z / temperature
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def kl_divergence(p, q):
    """KL(p || q) in nats with ``0 log 0 = 0`` and q floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidArgument(f"length mismatch {p.shape} vs {q.shape}")
    support = p > 0
    ps = p[support]
    qs = np.maximum(q[support], PROB_FLOOR)
    return float(max(0.0, np.sum(ps * (np.log(np.maximum(ps, PROB_FLOOR)) - np.log(qs)))))


def entropy(p):
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))
