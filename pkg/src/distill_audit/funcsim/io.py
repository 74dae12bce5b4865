"""Binary logits (``DLOG``) and labels (``DLAB``) files, little-endian."""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument

LOGITS_MAGIC = b"DLOG"
LABELS_MAGIC = b"DLAB"
LOGITS_VERSION = 1


@dataclass
class LogitsMatrix:
    """N x K raw logits with optional labels and provenance.

    Sequence models are flattened over (batch, position) with the next
    token as label.
    """

    logits: np.ndarray
    labels: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        z = np.asarray(self.logits, dtype=np.float32)
        if z.ndim == 3:
            z = z.reshape(-1, z.shape[-1])
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 2:
            raise InvalidArgument(f"logits must be N x K with N >= 1, K >= 2; got {z.shape}")
        if not np.isfinite(z).all():
            raise InvalidArgument("logits contain non-finite values")
        self.logits = np.ascontiguousarray(z)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if y.shape[0] != z.shape[0]:
                raise InvalidArgument(f"{y.shape[0]} labels for {z.shape[0]} rows")
            if y.size and (y.min() < 0 or y.max() >= z.shape[1]):
                raise InvalidArgument("label out of range")
            self.labels = y

    @property
    def shape(self):
        return self.logits.shape

    def __array__(self, dtype=None, copy=None):
        return self.logits if dtype is None else self.logits.astype(dtype)

    def __len__(self):
        return self.logits.shape[0]


def write_logits(path, logits):
    z = np.ascontiguousarray(np.asarray(logits, dtype="<f4"))
    if z.ndim != 2:
        raise InvalidArgument("logits must be 2-D")
    n, k = z.shape
    with open(path, "wb") as fh:
        fh.write(LOGITS_MAGIC + struct.pack("<III", LOGITS_VERSION, n, k))
        fh.write(z.tobytes())


def read_logits(path):
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != LOGITS_MAGIC:
        raise InvalidArgument(f"{path}: not a DLOG file")
    version, n, k = struct.unpack("<III", raw[4:16])
    if version != LOGITS_VERSION:
        raise InvalidArgument(f"{path}: unsupported DLOG version {version}")
    if len(raw) != 16 + 4 * n * k:
        raise InvalidArgument(f"{path}: expected {n}x{k} floats, file size {len(raw)}")
    return np.frombuffer(raw, dtype="<f4", offset=16).reshape(n, k).astype(np.float32)


def write_labels(path, labels):
    y = np.asarray(labels).reshape(-1)
    if y.size and y.min() < 0:
        raise InvalidArgument("labels must be non-negative")
    with open(path, "wb") as fh:
        fh.write(LABELS_MAGIC + struct.pack("<I", y.size))
        fh.write(y.astype("<u4").tobytes())


def read_labels(path):
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != LABELS_MAGIC:
        raise InvalidArgument(f"{path}: not a DLAB file")
    (n,) = struct.unpack("<I", raw[4:8])
    if len(raw) != 8 + 4 * n:
        raise InvalidArgument(f"{path}: expected {n} labels, file size {len(raw)}")
    return np.frombuffer(raw, dtype="<u4", offset=8).astype(np.int64)


def load_logits_matrix(path, labels_path=None):
    labels = read_labels(labels_path) if labels_path else None
    return LogitsMatrix(read_logits(path), labels, {"path": str(path)})
