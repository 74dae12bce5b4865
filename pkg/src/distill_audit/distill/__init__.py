"""Training regimes: KD, random control distillation, SIDDO, LS, feature KD."""

from .conditions import KINDS, Condition, canonical_kind
from .losses import (analytic_per_logit_gradient, class_ids, distill_loss, feature_kd_loss, kd_loss,
                     ls_loss, rcd_target, rcd_target_fixed)
from .tasks import ArrayTask, TokenTask
from .train import evaluate, train_student, train_teacher

__all__ = [
    "KINDS", "ArrayTask", "Condition", "TokenTask", "analytic_per_logit_gradient", "canonical_kind",
    "class_ids", "distill_loss", "evaluate", "feature_kd_loss", "kd_loss", "ls_loss", "rcd_target",
    "rcd_target_fixed", "train_student", "train_teacher",
]
