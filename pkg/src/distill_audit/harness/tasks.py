"""Turn an experiment config into datasets, model configs and initial weights."""

import json
import math
from functools import lru_cache

import numpy as np

from ..data.blobs import BlobConfig, make_blobs
from ..data.corpus import adversarial_transform, corpus_from_text, fetch_corpus, load_char_corpus
from ..distill.tasks import ArrayTask, TokenTask
from ..errors import InvalidArgument
from ..models.checkpoint import init_model
from ..models.config import MlpConfig, gpt_preset
from ..numcore.rng import derive_seed


def _blob_sets(d):
    common = dict(n_features=d.n_features, n_classes=d.n_classes, cluster_std=d.cluster_std,
                  center_scale=d.center_scale, center_seed=d.seed)
    train = make_blobs(BlobConfig(n_points=d.n_train, noise=d.noise, **common), derive_seed(d.seed, "train"))
    test = make_blobs(BlobConfig(n_points=d.n_test, noise=0.0, **common), derive_seed(d.seed, "test"))
    return train, test


def load_corpus(d):
    path = d.path or str(fetch_corpus(d.url))
    return load_char_corpus(path)


class Tasks:
    """Teacher and student training data plus the shared evaluation set."""

    def __init__(self, config):
        d = config.dataset
        self.corpus = None
        if d.kind == "blobs":
            train, test = _blob_sets(d)
            self.student = ArrayTask(train.x, train.y, test.x, test.clean_y)
            self.teacher = self.student
            self.n_classes = d.n_classes
            self.provenance = {"kind": "blobs", "train_flipped": int(train.flipped.sum()),
                               **{k: v for k, v in vars(d).items()
                                  if k not in ("path", "url", "replace", "eval_blocks", "eval_seed")}}
        else:
            corpus = load_corpus(d)
            self.corpus = corpus
            block = model_config(config, corpus.vocab_size).block_size
            self.student = TokenTask(corpus.train_tokens, corpus.test_tokens, block,
                                     d.eval_blocks, d.eval_seed)
            if d.replace != "none":
                poisoned = corpus_from_text(adversarial_transform(corpus.text, d.replace), vocab=corpus.vocab)
                self.teacher = TokenTask(poisoned.train_tokens, corpus.test_tokens, block,
                                         d.eval_blocks, d.eval_seed)
            else:
                self.teacher = self.student
            self.n_classes = corpus.vocab_size
            self.provenance = {"kind": "chars", **corpus.provenance(), "replace": d.replace,
                               "eval_blocks": d.eval_blocks, "eval_seed": d.eval_seed}
        x, y = self.student.test_inputs()
        self.test_x = x
        self.test_y = np.asarray(y).reshape(-1)


@lru_cache(maxsize=4)
def _tasks_cached(key):
    from .config import config_from_dict
    return Tasks(config_from_dict(json.loads(key)))


def tasks_for(config):
    return _tasks_cached(json.dumps(config.to_dict(), sort_keys=True))


def scale_hidden(hidden, width):
    return tuple(max(1, int(math.floor(h * width + 1e-9))) for h in hidden)


def model_config(config, n_out, width=None):
    m = config.model
    width = m.width if width is None else width
    if m.kind == "mlp":
        return MlpConfig(config.dataset.n_features, scale_hidden(m.hidden, width), n_out, m.activation)
    overrides = {"width": width}
    if m.dropout is not None:
        overrides["dropout"] = m.dropout
    return gpt_preset(m.preset, n_out, **overrides)


def initial_model(config, n_out, teacher_seed, width=None):
    """M_0 for a teacher seed; other widths get a fresh init from the same seed."""
    return init_model(model_config(config, n_out, width), teacher_seed)


def check_width(width):
    if not 0.0 < width <= 1.0:
        raise InvalidArgument(f"width {width} outside (0, 1]")
    return width
