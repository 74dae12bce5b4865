"""Training data adapters: what a batch of example indices turns into."""

import numpy as np

from ..errors import InvalidArgument
from ..numcore.rng import RngStream, derive_seed


class ArrayTask:
    """Fixed feature matrices (blobs): one example per row."""

    def __init__(self, x_train, y_train, x_test, y_test):
        self.x_train = np.asarray(x_train, dtype=np.float32)
        self.y_train = np.asarray(y_train, dtype=np.int64)
        self.x_test = np.asarray(x_test, dtype=np.float32)
        self.y_test = np.asarray(y_test, dtype=np.int64)
        if len(self.x_train) != len(self.y_train) or len(self.x_test) != len(self.y_test):
            raise InvalidArgument("inputs and labels differ in length")

    @property
    def n_examples(self):
        return len(self.y_train)

    def batch(self, idx):
        """``(inputs, labels, ids)``; ``ids`` key per-example fixed noise."""
        return self.x_train[idx], self.y_train[idx], np.asarray(idx)

    def eval_sets(self):
        return {"train": (self.x_train, self.y_train), "test": (self.x_test, self.y_test)}

    def test_inputs(self):
        return self.x_test, self.y_test

    def provenance(self):
        return {"kind": "array", "n_train": int(self.n_examples), "n_test": int(len(self.y_test))}


class TokenTask:
    """Next-character prediction over non-overlapping windows of the train split.

    Evaluation uses ``eval_blocks`` windows per split at seeded offsets, so
    every model in an experiment is scored on the same text.
    """

    def __init__(self, train_tokens, test_tokens, block_size, eval_blocks=64, eval_seed=0):
        self.train = np.asarray(train_tokens, dtype=np.int64)
        self.test = np.asarray(test_tokens, dtype=np.int64)
        self.block_size = int(block_size)
        if len(self.train) <= self.block_size or len(self.test) <= self.block_size:
            raise InvalidArgument("each split must be longer than the block size")
        self.eval_blocks = int(eval_blocks)
        self.eval_seed = int(eval_seed)

    @property
    def n_examples(self):
        return (len(self.train) - 1) // self.block_size

    def _windows(self, tokens, starts):
        offsets = starts[:, None] + np.arange(self.block_size)
        return tokens[offsets], tokens[offsets + 1]

    def batch(self, idx):
        idx = np.asarray(idx)
        x, y = self._windows(self.train, idx * self.block_size)
        ids = idx[:, None] * self.block_size + np.arange(self.block_size)
        return x, y, ids

    def eval_starts(self, split):
        tokens = self.train if split == "train" else self.test
        rng = RngStream(derive_seed(self.eval_seed, "eval-blocks", split))
        return np.sort(rng.integers(len(tokens) - self.block_size - 1, self.eval_blocks))

    def eval_sets(self):
        return {split: self._windows(self.train if split == "train" else self.test,
                                     self.eval_starts(split))
                for split in ("train", "test")}

    def test_inputs(self):
        return self.eval_sets()["test"]

    def provenance(self):
        return {"kind": "tokens", "n_train_tokens": int(len(self.train)),
                "n_test_tokens": int(len(self.test)), "block_size": self.block_size,
                "eval_blocks": self.eval_blocks, "eval_seed": self.eval_seed}
