import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from distill_audit.data import (BlobConfig, adversarial_transform, batch_order, blob_centers,
                                corpus_from_text, epoch_batches, load_char_corpus, make_blobs)
from distill_audit.errors import InvalidArgument


def test_abab_corpus(tmp_path):
    path = tmp_path / "t.txt"
    path.write_text("abab")
    c = load_char_corpus(path)
    assert c.vocab == ["a", "b"] and c.tokens.tolist() == [0, 1, 0, 1]
    assert c.split == 3
    assert load_char_corpus(path).sha256 == c.sha256
    assert c.decode(c.encode("ba")) == "ba"


def test_corpus_errors(tmp_path):
    (tmp_path / "empty.txt").write_text("")
    with pytest.raises(InvalidArgument):
        load_char_corpus(tmp_path / "empty.txt")
    with pytest.raises(OSError):
        load_char_corpus(tmp_path / "missing.txt")
    with pytest.raises(InvalidArgument):
        corpus_from_text("abc", vocab=["a", "b"])
    with pytest.raises(InvalidArgument):
        corpus_from_text("ab").encode("z")


def test_tiny_shakespeare(shakespeare_path):
    c = load_char_corpus(shakespeare_path)
    assert c.vocab_size == 65
    assert c.vocab == sorted(c.vocab)
    assert c.split == int(0.9 * len(c.text))
    freq = c.char_frequencies()
    assert abs(freq[" "] - 0.1523) <= 0.002
    assert abs(freq["e"] - 0.0848) <= 0.002


def test_transform_examples():
    assert adversarial_transform("the thane") == "tha thane"
    assert adversarial_transform("thee there") == "thae thare"
    assert adversarial_transform("no match here") == "no match here"
    assert adversarial_transform("The") == "The"
    assert adversarial_transform("abc") == "abc"
    assert adversarial_transform("the other", mode="word") == "tha other"
    with pytest.raises(InvalidArgument):
        adversarial_transform("x", mode="regex")


@given(st.text(alphabet="thea x", max_size=60))
def test_transform_idempotent_and_complete(text):
    once = adversarial_transform(text)
    assert "the" not in once
    assert adversarial_transform(once) == once
    assert len(once) == len(text)
    assert set(once) <= set(text) | {"a"}


def test_transformed_vocab_is_subset(shakespeare_path):
    c = load_char_corpus(shakespeare_path)
    poisoned = adversarial_transform(c.text)
    assert set(poisoned) <= set(c.vocab)
    assert poisoned.count("the") == 0


def test_blobs_flip_count_and_determinism():
    cfg = BlobConfig(n_points=1000, noise=0.1)
    d = make_blobs(cfg, 3)
    assert d.flipped.sum() == 100 and (d.y != d.clean_y).sum() == 100
    assert np.array_equal(d.flipped, d.y != d.clean_y)
    e = make_blobs(cfg, 3)
    assert np.array_equal(d.x, e.x) and np.array_equal(d.y, e.y)
    assert np.bincount(d.clean_y).tolist() == [100] * 10


def test_blobs_noise_count_rounds_up():
    assert make_blobs(BlobConfig(n_points=101, noise=0.15), 0).flipped.sum() == 16


def test_clean_blobs_follow_nearest_center():
    cfg = BlobConfig(n_points=300, n_classes=3, n_features=4, cluster_std=0.05, center_scale=5.0)
    d = make_blobs(cfg, 0)
    dist = ((d.x[:, None, :] - blob_centers(cfg)[None]) ** 2).sum(axis=2)
    assert np.array_equal(dist.argmin(axis=1), d.y)


@pytest.mark.parametrize("bad", [dict(n_classes=1), dict(n_features=1), dict(noise=0.5), dict(noise=-0.1)])
def test_blob_config_validation(bad):
    with pytest.raises(InvalidArgument):
        BlobConfig(**bad)


@given(st.integers(1, 80), st.integers(1, 80), st.integers(0, 1000))
def test_batch_order_partitions_each_epoch(n, bs, seed):
    bs = min(bs, n)
    batches = batch_order(n, bs, 2, seed)
    per_epoch = -(-n // bs)
    assert len(batches) == 2 * per_epoch
    for e in range(2):
        idx = np.concatenate(batches[e * per_epoch:(e + 1) * per_epoch])
        assert sorted(idx.tolist()) == list(range(n))


def test_batch_order_seeds():
    a = batch_order(64, 8, 1, 10)
    assert all(np.array_equal(x, y) for x, y in zip(a, batch_order(64, 8, 1, 10)))
    assert not np.array_equal(np.concatenate(a), np.concatenate(batch_order(64, 8, 1, 11)))
    with pytest.raises(InvalidArgument):
        next(epoch_batches(4, 5, 0))
