"""Functional similarity between a teacher and a comparison model."""

from .io import (LogitsMatrix, load_logits_matrix, read_labels, read_logits, write_labels,
                 write_logits)
from .metrics import (LOWER_IS_CLOSER, PAIR_METRICS, AgreementSplit, activation_distance,
                      agreement_split, compare, js_divergence, prediction_agreement,
                      prediction_disagreement, procrustes_distance, rank_disagreement, top1,
                      variation_of_information)

__all__ = [
    "LOWER_IS_CLOSER", "PAIR_METRICS", "AgreementSplit", "LogitsMatrix", "activation_distance",
    "agreement_split", "compare", "js_divergence", "load_logits_matrix", "prediction_agreement",
    "prediction_disagreement", "procrustes_distance", "rank_disagreement", "read_labels",
    "read_logits", "top1", "variation_of_information", "write_labels", "write_logits",
]
