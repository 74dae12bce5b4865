"""Seeded example ordering shared by every training regime."""

import numpy as np

from ..errors import InvalidArgument
from ..numcore.rng import RngStream, derive_seed


def epoch_batches(n_examples, batch_size, data_seed):
    """Endless iterator of index batches, one fresh permutation per epoch.

    The last batch of an epoch may be short, so each epoch covers every
    index exactly once.
    """
    if not 1 <= batch_size <= n_examples:
        raise InvalidArgument(f"batch size {batch_size} not in [1, {n_examples}]")
    rng = RngStream(derive_seed(data_seed, "data-order"))
    while True:
        order = rng.permutation(n_examples)
        for start in range(0, n_examples, batch_size):
            yield order[start:start + batch_size]


def batch_order(n_examples, batch_size, epochs, data_seed):
    per_epoch = -(-n_examples // batch_size)
    it = epoch_batches(n_examples, batch_size, data_seed)
    return [next(it) for _ in range(per_epoch * epochs)]
