"""Distillation objectives as graph nodes over the student's logits.

All teacher-side inputs are raw arrays, so nothing flows back into a teacher.
"""

import numpy as np

from ..errors import InvalidArgument
from ..numcore import tensor as T
from ..numcore.rng import counter_uniform


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _check_temperature(temperature):
    temperature = float(temperature)
    if not temperature > 0.0:
        raise InvalidArgument(f"temperature must be positive, got {temperature}")
    return temperature


def class_ids(labels, logits_shape):
    """Integer class ids from ids or a one-hot array matching the logits."""
    y = np.asarray(labels)
    k = logits_shape[-1]
    if y.shape == tuple(logits_shape):
        y = y.reshape(-1, k)
        if not (np.isin(y, (0, 1)).all() and (y.sum(axis=1) == 1).all()):
            raise InvalidArgument("2-D labels must be one-hot")
        return y.argmax(axis=1)
    y = y.reshape(-1)
    n_rows = int(np.prod(logits_shape[:-1]))
    if y.shape[0] != n_rows:
        raise InvalidArgument(f"{y.shape[0]} labels for {n_rows} rows")
    if not np.issubdtype(y.dtype, np.integer):
        raise InvalidArgument("labels must be integer class ids or one-hot rows")
    if y.size and (y.min() < 0 or y.max() >= k):
        raise InvalidArgument(f"label out of range for {k} classes")
    return y


def _data(x):
    return x.data if isinstance(x, T.Tensor) else np.asarray(x)


def distill_loss(student_logits, target, labels, alpha, temperature=1.0, t2_scale=False):
    """``(1 - alpha) * CE(y, softmax(z)) + alpha * KL(target || softmax(z / T))``.

    ``target`` is a detached probability array shaped like the logits. With
    ``alpha == 0`` the loss value and gradients equal plain cross-entropy
    bit for bit (the KL branch contributes exact zeros).
    """
    alpha = _check_alpha(alpha)
    temperature = _check_temperature(temperature)
    target = np.asarray(target)
    if target.shape != student_logits.shape:
        raise InvalidArgument(f"target shape {target.shape} != logits shape {student_logits.shape}")
    ce = T.cross_entropy(student_logits, class_ids(labels, student_logits.shape))
    kl = T.kl_to_target(student_logits, target, temperature)
    weight = alpha * temperature ** 2 if t2_scale else alpha
    return T.mul(ce, 1.0 - alpha) + T.mul(kl, weight)


def kd_loss(student_logits, teacher_logits, labels, alpha, temperature=1.0, t2_scale=False):
    """Logit-matching KD; the teacher is softened by ``temperature`` and detached.

    ``t2_scale`` multiplies the KL term by T**2 (off by default).
    """
    z_t = _data(teacher_logits)
    if z_t.shape != student_logits.shape:
        raise InvalidArgument(f"teacher logits {z_t.shape} != student logits {student_logits.shape}")
    temperature = _check_temperature(temperature)
    z_t = np.asarray(z_t, dtype=student_logits.dtype)
    target = T.softmax_data(z_t, temperature)
    return distill_loss(student_logits, target, labels, alpha, temperature, t2_scale)


def rcd_target(rng, n_classes, rows=None, normalize=True):
    """Uniform[0, 1] noise used in place of the teacher's distribution.

    One K-vector (or ``rows`` of them); normalised to sum to one unless
    ``normalize`` is off, in which case the raw draws are returned.
    """
    k = int(n_classes)
    if k < 2:
        raise InvalidArgument("need at least two classes")
    shape = (k,) if rows is None else (int(rows), k)
    u = rng.random(shape)
    if normalize:
        u = u / u.sum(axis=-1, keepdims=True)
    return u


def rcd_target_fixed(key, example_ids, n_classes, normalize=True):
    """Noise that is a pure function of ``(key, example id)``.

    ``example_ids`` may have any shape; output has that shape plus ``K``.
    """
    k = int(n_classes)
    if k < 2:
        raise InvalidArgument("need at least two classes")
    ids = np.asarray(example_ids, dtype=np.uint64)
    counters = ids[..., None] * np.uint64(k) + np.arange(k, dtype=np.uint64)
    u = counter_uniform(key, counters)
    if normalize:
        u = u / u.sum(axis=-1, keepdims=True)
    return u


def ls_loss(student_logits, labels, alpha):
    """Cross-entropy against ``(1 - alpha) * onehot + alpha / K``."""
    alpha = _check_alpha(alpha)
    k = student_logits.shape[-1]
    y = class_ids(labels, student_logits.shape)
    target = np.full((y.shape[0], k), alpha / k)
    target[np.arange(y.shape[0]), y] += 1.0 - alpha
    return T.soft_cross_entropy(student_logits, target.astype(student_logits.dtype))


def feature_kd_loss(student_block_out, teacher_block_out, base_loss, alpha):
    """``(1 - alpha) * base_loss + alpha * MSE(student block, teacher block)``."""
    alpha = _check_alpha(alpha)
    target = _data(teacher_block_out)
    if tuple(target.shape) != tuple(student_block_out.shape):
        raise InvalidArgument(f"block shapes differ: {student_block_out.shape} vs {target.shape}")
    err = T.mse(student_block_out, np.asarray(target, dtype=student_block_out.dtype))
    return T.mul(base_loss, 1.0 - alpha) + T.mul(err, alpha)


def _check_distribution(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise InvalidArgument(f"{name} must be a vector of length >= 2")
    if not np.isfinite(p).all() or (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidArgument(f"{name} is not a probability vector")
    return p


def analytic_per_logit_gradient(p_s, p_t, y, alpha):
    """Closed form ``(1 - alpha)(p_s - y) + alpha (p_s - p_t)`` at T = 1."""
    alpha = _check_alpha(alpha)
    p_s = _check_distribution(p_s, "p_s")
    p_t = _check_distribution(p_t, "p_t")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != p_s.shape or p_t.shape != p_s.shape:
        raise InvalidArgument("p_s, p_t and y must have equal length")
    if not (np.isin(y, (0.0, 1.0)).all() and y.sum() == 1.0):
        raise InvalidArgument("y must be one-hot")
    return (1.0 - alpha) * (p_s - y) + alpha * (p_s - p_t)
