"""Corpora, synthetic blobs, and seeded batch ordering."""

from .batching import batch_order, epoch_batches
from .blobs import BlobConfig, BlobDataset, blob_centers, make_blobs
from .corpus import (CharCorpus, adversarial_transform, corpus_from_text, fetch_corpus,
                     load_char_corpus)

__all__ = [
    "BlobConfig", "BlobDataset", "CharCorpus", "adversarial_transform", "batch_order",
    "blob_centers", "corpus_from_text", "epoch_batches", "fetch_corpus", "load_char_corpus",
    "make_blobs",
]
