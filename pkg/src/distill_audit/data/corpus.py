"""Character-level corpora and the "the" -> "tha" poisoning transform."""

import hashlib
import os
import re
import urllib.request
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument

TRAIN_FRACTION = 0.9
CACHE_ENV = "DISTILL_AUDIT_CACHE"
TINY_SHAKESPEARE_URL = (
    "https://raw.githubusercontent.com/karpathy/char-rnn/master/data/tinyshakespeare/input.txt"
)


@dataclass
class CharCorpus:
    text: str
    vocab: list
    tokens: np.ndarray
    split: int
    sha256: str
    path: str = ""

    @property
    def vocab_size(self):
        return len(self.vocab)

    @property
    def train_tokens(self):
        return self.tokens[:self.split]

    @property
    def test_tokens(self):
        return self.tokens[self.split:]

    def encode(self, text):
        lookup = {ch: i for i, ch in enumerate(self.vocab)}
        try:
            return np.array([lookup[ch] for ch in text], dtype=np.int64)
        except KeyError as err:
            raise InvalidArgument(f"character {err.args[0]!r} not in vocabulary") from None

    def decode(self, tokens):
        return "".join(self.vocab[int(t)] for t in tokens)

    def char_frequencies(self):
        counts = Counter(self.text)
        n = len(self.text)
        return {ch: counts[ch] / n for ch in self.vocab}

    def provenance(self):
        return {"path": self.path, "sha256": self.sha256, "split": self.split, "n_chars": len(self.text)}


def corpus_from_text(text, vocab=None, path=""):
    """Build a corpus; ``vocab`` pins the id mapping (e.g. to a clean corpus)."""
    if not text:
        raise InvalidArgument("empty corpus")
    chars = sorted(set(text))
    if vocab is None:
        vocab = chars
    else:
        extra = set(chars) - set(vocab)
        if extra:
            raise InvalidArgument(f"characters outside the given vocabulary: {sorted(extra)}")
        vocab = list(vocab)
    lookup = {ch: i for i, ch in enumerate(vocab)}
    tokens = np.fromiter((lookup[ch] for ch in text), dtype=np.int64, count=len(text))
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return CharCorpus(text, vocab, tokens, int(TRAIN_FRACTION * len(text)), digest, str(path))


def load_char_corpus(path):
    """Read a UTF-8 text file into a corpus with a 90/10 train/test boundary."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise OSError(f"cannot read corpus {path}: {err}") from err
    if not text:
        raise InvalidArgument(f"corpus {path} is empty")
    return corpus_from_text(text, path=path)


def fetch_corpus(url=TINY_SHAKESPEARE_URL, cache_dir=None):
    """Download ``url`` once into the cache directory and return the local path.

    The cache lives in ``$DISTILL_AUDIT_CACHE`` (default ``~/.cache/distill-audit``).
    """
    cache = Path(cache_dir or os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "distill-audit")
    cache.mkdir(parents=True, exist_ok=True)
    target = cache / (hashlib.sha256(url.encode()).hexdigest()[:16] + "-" + Path(url).name)
    if not target.exists():
        tmp = target.with_suffix(".part")
        with urllib.request.urlopen(url, timeout=60) as resp:
            tmp.write_bytes(resp.read())
        tmp.replace(target)
    return target


_WORD_THE = re.compile(r"\bthe\b")


def adversarial_transform(text, mode="substring"):
    """Replace "the" with "tha".

    ``substring`` (default) rewrites every left-to-right, non-overlapping
    occurrence, so "thee" -> "thae" and "there" -> "thare". ``word`` only
    rewrites the standalone word.
    """
    if mode == "substring":
        return text.replace("the", "tha")
    if mode == "word":
        return _WORD_THE.sub("tha", text)
    raise InvalidArgument(f"unknown replacement mode {mode!r}")
