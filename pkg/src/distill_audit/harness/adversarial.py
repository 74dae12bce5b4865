"""The "the" -> "tha" poisoned-teacher experiment."""

import dataclasses
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument
from ..models.checkpoint import load_checkpoint
from ..models.networks import generate_batch
from ..numcore.rng import RngStream, derive_seed
from .manifest import inventory, write_manifest
from .matrix import _csv, fmt, run_matrix, teacher_id
from .tasks import tasks_for


def prompt_set(corpus, n_prompts, prompt_len, seed):
    """Seeded windows of the clean test split, shared by every model."""
    test = corpus.test_tokens
    if len(test) <= prompt_len:
        raise InvalidArgument("test split shorter than the prompt length")
    rng = RngStream(derive_seed(seed, "adversarial-prompts"))
    starts = rng.integers(len(test) - prompt_len, n_prompts)
    return [test[s:s + prompt_len].tolist() for s in starts]


def adversarial_eval(checkpoint, corpus, gen_chars=10000, seed=0, n_prompts=10, prompt_len=16,
                     temperature=1.0):
    """Generate ``gen_chars`` characters and count "tha" and "the" in them.

    The characters are split evenly over ``n_prompts`` clean-test prompts;
    only generated text is searched, never the prompt.
    """
    cfg = checkpoint.config
    if getattr(cfg, "vocab_size", None) != corpus.vocab_size:
        raise InvalidArgument(f"model vocabulary {getattr(cfg, 'vocab_size', None)} does not match "
                              f"corpus vocabulary {corpus.vocab_size}")
    if gen_chars < 1 or n_prompts < 1:
        raise InvalidArgument("gen_chars and n_prompts must be positive")
    n_prompts = min(n_prompts, gen_chars)
    prompt_len = min(prompt_len, cfg.block_size)
    prompts = prompt_set(corpus, n_prompts, prompt_len, seed)
    per_row = -(-gen_chars // n_prompts)
    rows = generate_batch(checkpoint, prompts, per_row, temperature, derive_seed(seed, "adversarial-sample"))
    tha = the = 0
    remaining = gen_chars
    for row in rows:
        text = corpus.decode(row[:min(per_row, remaining)])
        remaining -= len(text)
        tha += text.count("tha")
        the += text.count("the")
    return tha, the


def run_adversarial(config, out_dir=None, jobs=1, log=None):
    """Poisoned teacher, clean students, then generation counts per model."""
    if config.dataset.kind != "chars":
        raise InvalidArgument("the adversarial experiment needs a chars dataset")
    if config.dataset.replace == "none":
        config = dataclasses.replace(config, dataset=dataclasses.replace(config.dataset, replace="substring"))
    manifest = run_matrix(config, out_dir, jobs, log)
    out = Path(manifest.root)
    corpus = tasks_for(config).corpus
    a = config.adversarial
    rows, counts = [], []
    for r in manifest.runs:
        if r["status"] != "ok":
            continue
        ckpt = load_checkpoint(out / "checkpoints" / r["id"])
        tha, the = adversarial_eval(ckpt, corpus, a.gen_chars, a.seed, a.n_prompts, a.prompt_len,
                                    a.temperature)
        if r["role"] == "teacher":
            cond, alpha, seed = teacher_id(r["teacher_seed"]), "", ""
        else:
            cond, alpha, seed = f"{r['kind'].lower()}@t{r['teacher_seed']}", fmt(r["alpha"]), r["student_seed"]
        rows.append([cond, alpha, seed, tha, the])
        counts.append({"id": r["id"], "role": r["role"], "kind": r.get("kind"), "alpha": r.get("alpha"),
                       "teacher_seed": r["teacher_seed"], "student_seed": r.get("student_seed"),
                       "count_tha": tha, "count_the": the})
        if log:
            log(f"{r['id']}: tha={tha} the={the}")
    (out / "adversarial.csv").write_text(
        _csv(("condition", "alpha", "student_seed", "count_tha", "count_the"), rows))
    means = {}
    for c in counts:
        if c["role"] == "student":
            key = (f"{c['kind'].lower()}@t{c['teacher_seed']}", c["alpha"])
            means.setdefault(key, []).append((c["count_tha"], c["count_the"]))
    summary = [[k[0], fmt(k[1]), fmt(np.mean([v[0] for v in vals])), fmt(np.mean([v[1] for v in vals])), len(vals)]
               for k, vals in means.items()]
    (out / "adversarial_summary.csv").write_text(
        _csv(("condition", "alpha", "mean_tha", "mean_the", "n"), summary))
    manifest.files = inventory(out)
    write_manifest(manifest, out)
    manifest.counts = counts
    return manifest
