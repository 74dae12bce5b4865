"""Experiment configuration: a nested YAML document with typed sections.

Unknown keys are rejected everywhere, including in ``--set`` overrides.
"""

from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Optional

import yaml

from ..distill.conditions import canonical_kind
from ..errors import InvalidArgument


@dataclass
class DatasetSpec:
    kind: str = "blobs"            # blobs | chars
    # blobs
    n_train: int = 2000
    n_test: int = 1000
    n_features: int = 16
    n_classes: int = 10
    noise: float = 0.15
    cluster_std: float = 1.0
    center_scale: float = 1.0
    seed: int = 0
    # chars
    path: str = ""
    url: str = ""
    replace: str = "none"          # teacher corpus transform: none | substring | word
    eval_blocks: int = 64
    eval_seed: int = 0


@dataclass
class ModelSpec:
    kind: str = "mlp"              # mlp | gpt
    hidden: list = field(default_factory=lambda: [64, 64])
    activation: str = "relu"
    preset: str = "tiny"
    width: float = 1.0
    dropout: Optional[float] = None


@dataclass
class TrainSpec:
    steps: int = 600
    teacher_steps: int = 600
    batch_size: int = 64
    optimizer: str = "adam"
    lr: float = 1e-3


@dataclass
class AdversarialSpec:
    gen_chars: int = 10000
    n_prompts: int = 10
    prompt_len: int = 16
    temperature: float = 1.0
    seed: int = 0


@dataclass
class SweepSpec:
    fractions: list = field(default_factory=lambda: [round(1.0 - 0.1 * i, 1) for i in range(10)])


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    teacher_seeds: list = field(default_factory=lambda: [0, 1, 2])
    student_seeds: list = field(default_factory=lambda: list(range(10, 20)))
    alphas: list = field(default_factory=lambda: [0.1, 0.5, 0.9])
    conditions: list = field(default_factory=lambda: ["KD", "RCD", "SIDDO"])
    temperature: float = 1.0
    feature_block: Optional[int] = None
    rcd_normalize: bool = True
    rcd_fixed: bool = False
    experiment_seed: int = 0
    output_dir: str = "runs"
    adversarial: AdversarialSpec = field(default_factory=AdversarialSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def validate(self):
        d, m = self.dataset, self.model
        if d.kind not in ("blobs", "chars"):
            raise InvalidArgument(f"dataset.kind must be blobs or chars, got {d.kind!r}")
        if m.kind not in ("mlp", "gpt"):
            raise InvalidArgument(f"model.kind must be mlp or gpt, got {m.kind!r}")
        if (d.kind == "blobs") != (m.kind == "mlp"):
            raise InvalidArgument("blobs data pairs with the mlp model, chars with gpt")
        if d.kind == "chars" and not (d.path or d.url):
            raise InvalidArgument("chars dataset needs dataset.path or dataset.url")
        if d.replace not in ("none", "substring", "word"):
            raise InvalidArgument(f"dataset.replace must be none, substring or word")
        if not self.teacher_seeds or not self.student_seeds:
            raise InvalidArgument("teacher_seeds and student_seeds must be non-empty")
        if set(self.teacher_seeds) & set(self.student_seeds):
            raise InvalidArgument("teacher and student seed lists must be disjoint")
        for seeds in (self.teacher_seeds, self.student_seeds):
            if len(set(seeds)) != len(seeds):
                raise InvalidArgument("duplicate seeds")
        self.conditions = [canonical_kind(k) for k in self.conditions]
        for a in self.alphas:
            if not 0.0 <= float(a) <= 1.0:
                raise InvalidArgument(f"alpha {a} outside [0, 1]")
        if "KD" in self.conditions and "RCD" not in self.conditions:
            raise InvalidArgument("KD rows need matching RCD rows for the significance pairing")
        if "FeatureKD" in self.conditions and self.feature_block is None:
            raise InvalidArgument("FeatureKD needs feature_block")
        if self.train.steps < 0 or self.train.teacher_steps < 0 or self.train.batch_size < 1:
            raise InvalidArgument("steps must be >= 0 and batch_size >= 1")
        if not self.temperature > 0:
            raise InvalidArgument("temperature must be positive")
        for f in self.sweep.fractions:
            if not 0.0 < float(f) <= 1.0:
                raise InvalidArgument(f"width fraction {f} outside (0, 1]")
        return self

    def to_dict(self):
        return asdict(self)


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise InvalidArgument(f"{where or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise InvalidArgument(f"unknown config key(s): {', '.join((where + '.' if where else '') + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name) if name in known else None
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{where}.{name}" if where else name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data):
    return _build(ExperimentConfig, data or {}, "").validate()


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise InvalidArgument(f"cannot read config {path}: {err.strerror or err}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise InvalidArgument(f"config {path} is not valid YAML: {err}") from None
    return config_from_dict(data or {})


def apply_overrides(config, overrides):
    """Apply ``key.sub=value`` strings; values are parsed as YAML scalars/lists."""
    data = config.to_dict()
    for item in overrides or ():
        if "=" not in item:
            raise InvalidArgument(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for i, part in enumerate(parts):
            if not isinstance(node, dict) or part not in node:
                raise InvalidArgument(f"unknown config key {key!r}")
            if i == len(parts) - 1:
                try:
                    node[part] = yaml.safe_load(raw)
                except yaml.YAMLError:
                    raise InvalidArgument(f"cannot parse value for {key!r}: {raw!r}") from None
            else:
                node = node[part]
    return config_from_dict(data)


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
