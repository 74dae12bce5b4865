"""The shared training loop behind every condition."""

import numpy as np

from ..data.batching import epoch_batches
from ..errors import InvalidArgument, TrainingDiverged
from ..models.config import MlpConfig
from ..models.networks import build_network
from ..numcore import tensor as T
from ..numcore.optim import OptimizerState, optimizer_step
from ..numcore.rng import RngStream, derive_seed
from .conditions import Condition
from .losses import distill_loss, feature_kd_loss, kd_loss, ls_loss, rcd_target, rcd_target_fixed

EVAL_CHUNK = 256


def evaluate(checkpoint, inputs, labels):
    """Mean cross-entropy and top-1 accuracy, in float64, chunked."""
    net = build_network(checkpoint, trainable=False)
    total, correct, count = 0.0, 0, 0
    with T.no_grad():
        for start in range(0, len(inputs), EVAL_CHUNK):
            x = inputs[start:start + EVAL_CHUNK]
            y = np.asarray(labels[start:start + EVAL_CHUNK]).reshape(-1)
            z = net.forward(x).data.reshape(len(y), -1).astype(np.float64)
            m = z.max(axis=1, keepdims=True)
            lse = (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True)))[:, 0]
            total += float((lse - z[np.arange(len(y)), y]).sum())
            correct += int((z.argmax(axis=1) == y).sum())
            count += len(y)
    return {"loss": total / count, "accuracy": correct / count}


def _check_pair(condition, teacher, init):
    if condition.needs_teacher and teacher is None:
        raise InvalidArgument(f"{condition.kind} needs a teacher checkpoint")
    if condition.kind == "SIDDO" and teacher is not None:
        raise InvalidArgument("SIDDO trains without a teacher")
    if teacher is None or not condition.needs_teacher:
        return
    s, t = init.config, teacher.config
    if type(s) is not type(t):
        raise InvalidArgument("teacher and student are different model families")
    if isinstance(s, MlpConfig):
        if s.n_classes != t.n_classes or s.input_dim != t.input_dim:
            raise InvalidArgument("teacher and student disagree on inputs or classes")
    elif s.vocab_size != t.vocab_size:
        raise InvalidArgument("teacher and student vocabularies differ")
    if condition.kind == "FeatureKD":
        depth = len(s.hidden) if isinstance(s, MlpConfig) else s.n_layer
        if condition.block >= depth:
            raise InvalidArgument(f"block {condition.block} out of range for depth {depth}")


def train_student(condition, teacher, init, data, steps, *, batch_size=64, optimizer="adam",
                  lr=1e-3, experiment_seed=0, log_every=0, log=None):
    """Train a copy of ``init`` under ``condition`` for ``steps`` updates.

    Streams: data order from ``derive_seed(data_seed, "data-order")``,
    dropout from ``derive_seed(data_seed, "dropout")``, RCD noise from
    ``derive_seed(experiment_seed, condition.label, data_seed)``. The
    teacher runs in inference mode and receives no gradient.
    """
    if not isinstance(condition, Condition):
        raise InvalidArgument("condition must be a Condition")
    if steps < 0:
        raise InvalidArgument("steps must be non-negative")
    _check_pair(condition, teacher, init)

    student = init.copy(provenance={})
    net = build_network(student, trainable=True)
    params = net.parameters()
    teacher_net = build_network(teacher, trainable=False) if condition.needs_teacher else None
    state = OptimizerState(kind=optimizer, lr=lr)
    batches = epoch_batches(data.n_examples, min(batch_size, data.n_examples), condition.data_seed)
    drop_rng = RngStream(derive_seed(condition.data_seed, "dropout"))
    noise_seed = derive_seed(experiment_seed, condition.label, condition.data_seed)
    noise_rng = RngStream(noise_seed)
    alpha, temp = condition.alpha, condition.temperature
    tap = condition.block if condition.kind == "FeatureKD" else None
    last_loss = None

    for step in range(steps):
        x, y, ids = data.batch(next(batches))
        if tap is None:
            logits = net.forward(x, train=True, rng=drop_rng)
        else:
            logits, feat = net.forward(x, train=True, rng=drop_rng, tap_block=tap)
        kind = condition.kind
        if kind == "SIDDO":
            loss = T.cross_entropy(logits, y)
        elif kind == "KD":
            with T.no_grad():
                z_t = teacher_net.forward(x).data
            loss = kd_loss(logits, z_t, y, alpha, temp, condition.t2_scale)
        elif kind == "RCD":
            k = logits.shape[-1]
            if condition.rcd_fixed:
                target = rcd_target_fixed(noise_seed, ids, k, condition.rcd_normalize)
            else:
                target = rcd_target(noise_rng, k, int(np.prod(logits.shape[:-1])),
                                    condition.rcd_normalize)
            target = target.reshape(logits.shape).astype(logits.dtype)
            loss = distill_loss(logits, target, y, alpha, temp, condition.t2_scale)
        elif kind == "LS":
            loss = ls_loss(logits, y, alpha)
        else:
            with T.no_grad():
                _, f_t = teacher_net.forward(x, tap_block=tap)
            loss = feature_kd_loss(feat, f_t.data, T.cross_entropy(logits, y), alpha)
        last_loss = float(loss.data)
        if not np.isfinite(last_loss):
            raise TrainingDiverged(step + 1)
        T.backward(loss)
        optimizer_step([p.data for p in params], [p.grad for p in params], state)
        if log is not None and log_every and (step + 1) % log_every == 0:
            log(f"{condition.label} seed={condition.data_seed} step {step + 1}/{steps} loss {last_loss:.4f}")

    metrics = {split: evaluate(student, xs, ys) for split, (xs, ys) in data.eval_sets().items()}
    student.provenance = {
        "stage": "trained",
        "condition": condition.to_dict(),
        "label": condition.label,
        "steps": int(steps),
        "batch_size": int(batch_size),
        "optimizer": optimizer,
        "lr": float(lr),
        "experiment_seed": int(experiment_seed),
        "init_seed": int(init.init_seed),
        "init_digest": init.digest(),
        "teacher_digest": teacher.digest() if teacher_net is not None else None,
        "data": data.provenance(),
        "final_batch_loss": last_loss,
        "train_loss": metrics["train"]["loss"],
        "train_accuracy": metrics["train"]["accuracy"],
        "test_loss": metrics["test"]["loss"],
        "test_accuracy": metrics["test"]["accuracy"],
    }
    return student


def train_teacher(init, data, steps, data_seed, **kwargs):
    """A teacher is a SIDDO run from ``init`` with its own data-order seed."""
    ckpt = train_student(Condition("SIDDO", data_seed=data_seed), None, init, data, steps, **kwargs)
    ckpt.provenance["stage"] = "teacher"
    return ckpt
