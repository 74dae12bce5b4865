"""Gaussian-blob classification data with a seeded label-flip knob."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidArgument
from ..numcore.rng import RngStream, derive_seed


@dataclass(frozen=True)
class BlobConfig:
    n_points: int = 1000
    n_features: int = 16
    n_classes: int = 10
    noise: float = 0.0
    cluster_std: float = 1.0
    center_scale: float = 2.0
    center_seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2 or self.n_features < 2:
            raise InvalidArgument("need K >= 2 classes and D >= 2 features")
        if not 0.0 <= self.noise < 0.5:
            raise InvalidArgument(f"label noise must be in [0, 0.5), got {self.noise}")
        if self.n_points < 1 or self.cluster_std <= 0:
            raise InvalidArgument("n_points must be positive and cluster_std > 0")

    def to_dict(self):
        return asdict(self)


@dataclass
class BlobDataset:
    x: np.ndarray
    y: np.ndarray
    clean_y: np.ndarray
    flipped: np.ndarray
    centers: np.ndarray
    config: BlobConfig
    seed: int

    def __len__(self):
        return len(self.y)


def blob_centers(config):
    rng = RngStream(derive_seed(config.center_seed, "blob-centers"))
    return rng.normal((config.n_classes, config.n_features), std=config.center_scale)


def make_blobs(config, seed):
    """Balanced clusters around ``blob_centers(config)``.

    Exactly ``ceil(noise * n_points)`` labels are moved to a different class,
    chosen uniformly among the other K-1 classes.
    """
    rng = RngStream(derive_seed(seed, "blob-points"))
    centers = blob_centers(config)
    n, k = config.n_points, config.n_classes
    clean = np.arange(n) % k
    clean = clean[rng.permutation(n)]
    x = centers[clean] + rng.normal((n, config.n_features), std=config.cluster_std)
    n_flip = math.ceil(config.noise * n - 1e-9)
    flip_idx = np.sort(rng.permutation(n)[:n_flip])
    y = clean.copy()
    if n_flip:
        shift = 1 + rng.integers(k - 1, n_flip)
        y[flip_idx] = (clean[flip_idx] + shift) % k
    flipped = np.zeros(n, dtype=bool)
    flipped[flip_idx] = True
    return BlobDataset(x.astype(np.float32), y.astype(np.int64), clean.astype(np.int64),
                       flipped, centers, config, int(seed))
