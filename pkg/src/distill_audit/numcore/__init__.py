"""Seeded RNG, tensors with reverse-mode autodiff, and optimizers."""

from .functional import PROB_FLOOR, entropy, kl_divergence, softmax
from .optim import OptimizerState, optimizer_step
from .rng import RngStream, derive_seed
from .tensor import Tensor, backward, no_grad

__all__ = [
    "PROB_FLOOR", "OptimizerState", "RngStream", "Tensor", "backward", "derive_seed",
    "entropy", "kl_divergence", "no_grad", "optimizer_step", "softmax",
]
