"""SGD and Adam over lists of parameter arrays."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument, TrainingDiverged
from . import kernels


@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise InvalidArgument(f"unknown optimizer {self.kind!r}")


def optimizer_step(params, grads, state):
    """Update ``params`` in place and advance ``state``.

    Raises :class:`TrainingDiverged` (carrying the step index about to be
    taken) if any gradient is non-finite; parameters are left untouched.
    """
    if len(params) != len(grads):
        raise InvalidArgument("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise InvalidArgument(f"grad shape {g.shape} does not match param {p.shape}")
        if not np.isfinite(g).all():
            raise TrainingDiverged(state.step + 1)
    state.step += 1
    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p -= np.asarray(state.lr, dtype=p.dtype) * g
        return state
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        kernels.adam_update(p, np.ascontiguousarray(g, dtype=p.dtype), m, v, state.lr,
                            state.beta1, state.beta2, state.eps, bc1, bc2)
    return state
