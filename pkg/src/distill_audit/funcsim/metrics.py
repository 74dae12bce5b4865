"""Functional-similarity metrics between two models' outputs.

Pairwise metrics take N x K logits (``LogitsMatrix`` or arrays). Softmax is
taken in float64 with ``probs=False``; pass ``probs=True`` when the inputs
already are probability rows. All argmax/argsort ties go to the lowest
class index.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument, NumericalError
from ..numcore.functional import PROB_FLOOR


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise InvalidArgument(f"expected matching N x K matrices, got {a.shape} and {b.shape}")
    if a.shape[0] < 1 or a.shape[1] < 2:
        raise InvalidArgument("need N >= 1 rows and K >= 2 columns")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise InvalidArgument("non-finite entries")
    return a, b


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _probs(a, b, probs):
    a, b = _pair(a, b)
    if probs:
        return a, b
    return _softmax(a), _softmax(b)


def top1(logits):
    """Row argmax, lowest index on ties."""
    return np.asarray(logits).argmax(axis=1)


def activation_distance(a, b, probs=False):
    """Mean over rows of ``||softmax(a_i) - softmax(b_i)||_2``."""
    p, q = _probs(a, b, probs)
    return float(np.sqrt(((p - q) ** 2).sum(axis=1)).mean())


def _desc_order(x):
    return np.argsort(-x, axis=1, kind="stable")


def rank_disagreement(a, b, kendall=False):
    """Position-wise: fraction of rank slots naming different classes.

    ``kendall=True`` instead returns the fraction of class pairs ordered
    differently by the two rows (ties ordered by class index).
    """
    a, b = _pair(a, b)
    if not kendall:
        return float((_desc_order(a) != _desc_order(b)).mean())
    k = a.shape[1]
    rank_a = np.argsort(_desc_order(a), axis=1)
    rank_b = np.argsort(_desc_order(b), axis=1)
    i, j = np.triu_indices(k, 1)
    flips = np.sign(rank_a[:, i] - rank_a[:, j]) != np.sign(rank_b[:, i] - rank_b[:, j])
    return float(flips.mean())


def prediction_disagreement(a, b):
    a, b = _pair(a, b)
    return float((top1(a) != top1(b)).mean())


def prediction_agreement(a, b):
    return 1.0 - prediction_disagreement(a, b)


def _kl_rows(p, q):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(np.maximum(q, PROB_FLOOR))), 0.0)
    return terms.sum(axis=1)


def js_divergence(a, b, probs=False):
    """Mean Jensen-Shannon divergence in nats; lies in [0, ln 2]."""
    p, q = _probs(a, b, probs)
    m = 0.5 * (p + q)
    js = 0.5 * _kl_rows(p, m) + 0.5 * _kl_rows(q, m)
    return float(np.clip(js, 0.0, np.log(2.0)).mean())


def variation_of_information(preds_a, preds_b):
    """``H(A) + H(B) - 2 I(A; B)`` of two labelings, natural log."""
    a = np.asarray(preds_a).reshape(-1)
    b = np.asarray(preds_b).reshape(-1)
    if a.shape != b.shape:
        raise InvalidArgument(f"labelings differ in length: {a.size} vs {b.size}")
    if a.size < 1:
        raise InvalidArgument("empty labelings")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    joint = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(joint, (ia, ib), 1.0)
    joint /= a.size
    pa, pb = joint.sum(axis=1), joint.sum(axis=0)
    nz = joint > 0
    outer = np.outer(pa, pb)
    h_a = -(pa * np.log(pa)).sum()
    h_b = -(pb * np.log(pb)).sum()
    mi = (joint[nz] * np.log(joint[nz] / outer[nz])).sum()
    return float(max(h_a + h_b - 2.0 * mi, 0.0))


def procrustes_distance(a, b, probs=False):
    """Normalised orthogonal Procrustes residual between softmax matrices.

    Columns are mean-centred, then
    ``(|A|^2 + |B|^2 - 2 * nuclear(B^T A)) / (|A|^2 + |B|^2)``; 0/0 is 0.
    """
    p, q = _probs(a, b, probs)
    p = p - p.mean(axis=0)
    q = q - q.mean(axis=0)
    na, nb = (p * p).sum(), (q * q).sum()
    denom = na + nb
    if denom == 0.0:
        return 0.0
    m = q.T @ p
    try:
        s = np.linalg.svd(m, compute_uv=False)
    except np.linalg.LinAlgError as err:
        raise NumericalError(f"SVD failed (condition number {np.linalg.cond(m):.3g}): {err}") from err
    return float(np.clip((denom - 2.0 * s.sum()) / denom, 0.0, 1.0))


@dataclass(frozen=True)
class AgreementSplit:
    agree_correct: float
    agree_incorrect: float


def agreement_split(student_preds, teacher_preds, labels):
    """Student/teacher top-1 agreement split by whether the teacher is right.

    Both fractions are over the full evaluation set.
    """
    s = np.asarray(student_preds).reshape(-1)
    t = np.asarray(teacher_preds).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if not s.shape == t.shape == y.shape:
        raise InvalidArgument("student, teacher and labels differ in length")
    if s.size < 1:
        raise InvalidArgument("empty evaluation set")
    agree = s == t
    n = s.size
    return AgreementSplit(float((agree & (t == y)).sum() / n), float((agree & (t != y)).sum() / n))


PAIR_METRICS = {
    "activation_distance": activation_distance,
    "rank_disagreement": rank_disagreement,
    "prediction_disagreement": prediction_disagreement,
    "js_divergence": js_divergence,
}


def compare(student, teacher, labels=None):
    """All metrics for one student against the teacher, as a flat dict."""
    s, t = _pair(student, teacher)
    out = {name: fn(s, t) for name, fn in PAIR_METRICS.items()}
    out["prediction_agreement"] = 1.0 - out["prediction_disagreement"]
    out["variation_of_information"] = variation_of_information(top1(s), top1(t))
    out["procrustes_distance"] = procrustes_distance(s, t)
    if labels is not None:
        split = agreement_split(top1(s), top1(t), labels)
        out["agree_correct"] = split.agree_correct
        out["agree_incorrect"] = split.agree_incorrect
        out["student_accuracy"] = float((top1(s) == np.asarray(labels).reshape(-1)).mean())
    return out


# Which way is "more similar to the teacher" for each metric.
LOWER_IS_CLOSER = {
    "activation_distance": True,
    "rank_disagreement": True,
    "prediction_disagreement": True,
    "js_divergence": True,
    "variation_of_information": True,
    "procrustes_distance": True,
    "prediction_agreement": False,
    "agree_correct": False,
    "agree_incorrect": False,
    "student_accuracy": False,
}
