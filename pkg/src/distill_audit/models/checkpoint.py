"""Model checkpoints: seeded init and the on-disk directory format.

A checkpoint directory holds ``manifest.json`` (config, init seed, provenance,
tensor table with byte offsets) and ``weights.bin`` (little-endian float32,
tensors concatenated in manifest order).
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument
from ..numcore.rng import RngStream, derive_seed
from .config import config_from_dict

FORMAT = "distill-audit-checkpoint/1"
INIT_STD = 0.02


@dataclass
class ModelCheckpoint:
    config: object
    params: dict
    init_seed: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = self.config.param_shapes()
        if list(self.params) != list(expected):
            raise InvalidArgument("parameter names do not match the config")
        for name, shape in expected.items():
            arr = self.params[name]
            if tuple(arr.shape) != tuple(shape):
                raise InvalidArgument(f"{name}: shape {arr.shape}, config expects {shape}")

    def n_params(self):
        return sum(int(a.size) for a in self.params.values())

    def copy(self, provenance=None):
        return ModelCheckpoint(
            self.config,
            {k: v.copy() for k, v in self.params.items()},
            self.init_seed,
            dict(self.provenance if provenance is None else provenance),
        )

    def weights_bytes(self):
        return b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in self.params.values())

    def manifest(self):
        table, offset = [], 0
        for name, arr in self.params.items():
            length = int(arr.size) * 4
            table.append({"name": name, "shape": list(arr.shape), "offset": offset, "length": length})
            offset += length
        return {
            "format": FORMAT,
            "config": self.config.to_dict(),
            "init_seed": int(self.init_seed),
            "provenance": self.provenance,
            "tensors": table,
        }

    def digest(self):
        """sha256 over manifest and weights; equal digests mean identical checkpoints."""
        h = hashlib.sha256(_dump_json(self.manifest()).encode())
        h.update(self.weights_bytes())
        return h.hexdigest()


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def _is_layer_norm_weight(name):
    return name.endswith(".weight") and ("ln_" in name)


def init_model(config, seed):
    """Fresh parameters: weights ~ N(0, 0.02^2), biases 0, layer-norm gains 1.

    Draws follow the config's parameter order from one stream seeded by
    ``derive_seed(seed, "init")``, so equal (config, seed) give equal bytes.
    """
    rng = RngStream(derive_seed(seed, "init"))
    params = {}
    for name, shape in config.param_shapes().items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=np.float32)
        elif _is_layer_norm_weight(name):
            params[name] = np.ones(shape, dtype=np.float32)
        else:
            params[name] = rng.normal(shape, std=INIT_STD, dtype=np.float32)
    return ModelCheckpoint(config, params, int(seed), {"stage": "init"})


def save_checkpoint(checkpoint, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "weights.bin").write_bytes(checkpoint.weights_bytes())
    (directory / "manifest.json").write_text(_dump_json(checkpoint.manifest()) + "\n")
    return directory


def load_checkpoint(directory):
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != FORMAT:
        raise InvalidArgument(f"{manifest_path}: unknown format {manifest.get('format')!r}")
    config = config_from_dict(manifest["config"])
    raw = (directory / "weights.bin").read_bytes()
    expected = config.param_shapes()
    params = {}
    for entry in manifest["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if expected.get(name) != shape:
            raise InvalidArgument(f"{name}: stored shape {shape} does not match config {expected.get(name)}")
        start, length = entry["offset"], entry["length"]
        if length != int(np.prod(shape)) * 4 or start + length > len(raw):
            raise InvalidArgument(f"{name}: byte range inconsistent with weights.bin")
        params[name] = np.frombuffer(raw, dtype="<f4", count=length // 4, offset=start) \
            .astype(np.float32).reshape(shape)
    return ModelCheckpoint(config, params, manifest["init_seed"], manifest.get("provenance", {}))
