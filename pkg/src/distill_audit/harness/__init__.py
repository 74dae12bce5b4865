"""Experiment orchestration: the condition matrix, adversarial run, width sweep."""

from .adversarial import adversarial_eval, prompt_set, run_adversarial
from .config import (AdversarialSpec, DatasetSpec, ExperimentConfig, ModelSpec, SweepSpec, TrainSpec,
                     apply_overrides, config_from_dict, dump_config, load_config)
from .manifest import RunManifest, load_manifest, write_manifest
from .matrix import METRIC_ORDER, agreement_deltas, best_control_baseline, run_jobs, run_matrix, write_reports
from .sweep import width_sweep

__all__ = [
    "METRIC_ORDER", "AdversarialSpec", "DatasetSpec", "ExperimentConfig", "ModelSpec", "RunManifest",
    "SweepSpec", "TrainSpec", "adversarial_eval", "agreement_deltas", "apply_overrides",
    "best_control_baseline", "config_from_dict", "dump_config", "load_config", "load_manifest",
    "prompt_set", "run_adversarial", "run_jobs", "run_matrix", "width_sweep", "write_manifest",
    "write_reports",
]
