"""Acceptance suite: one test per criterion, each reporting a pass/fail line.

Criteria that train language models are marked ``slow``; deselect them with
``-m "not slow"``. A criterion that does not hold is reported as FAIL and
the test fails with the measured numbers; thresholds are never loosened.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest
from conftest import ACCEPTANCE, minimal_blob_config
from test_funcsim import (oracle_activation, oracle_js, oracle_pred, oracle_rank, oracle_voi,
                          rotation_grid_procrustes, small_instance)

from distill_audit.data import load_char_corpus
from distill_audit.distill import (analytic_per_logit_gradient, distill_loss, kd_loss, ls_loss)
from distill_audit.funcsim import (activation_distance, js_divergence, prediction_disagreement,
                                   procrustes_distance, rank_disagreement, variation_of_information)
from distill_audit.funcsim.metrics import top1
from distill_audit.harness import (adversarial_eval, agreement_deltas, config_from_dict,
                                   run_adversarial, run_matrix, width_sweep)
from distill_audit.models import load_checkpoint
from distill_audit.numcore import tensor as T
from distill_audit.stats import mann_whitney_u, spearman


def report(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    assert passed, f"criterion {number}: {detail}"


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def gradient_cases(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        k = int(rng.integers(2, 17))
        scale = rng.choice([0.5, 2.0, 6.0])
        z_s = rng.standard_normal(k) * scale
        z_t = rng.standard_normal(k) * scale
        yield z_s, z_t, int(rng.integers(0, k)), float(rng.random())


def autodiff_kd_gradient(z_s, z_t, y, alpha):
    leaf = T.Tensor(z_s[None].astype(np.float64), requires_grad=True)
    T.backward(kd_loss(leaf, z_t[None].astype(np.float64), np.array([y]), alpha))
    return leaf.grad[0]


def test_criterion_01_gradient_identity():
    start = time.perf_counter()
    worst = 0.0
    for z_s, z_t, y, alpha in gradient_cases():
        onehot = np.eye(len(z_s))[y]
        analytic = analytic_per_logit_gradient(softmax(z_s), softmax(z_t), onehot, alpha)
        worst = max(worst, float(np.abs(autodiff_kd_gradient(z_s, z_t, y, alpha) - analytic).max()))
    elapsed = time.perf_counter() - start
    report(1, worst < 1e-10 and elapsed < 10.0,
           f"max |autodiff - analytic| = {worst:.3g} over 1000 cases in {elapsed:.2f}s")


def test_criterion_02_incorrect_class_reduction():
    # Stated reduction: for y_k = 0 the gradient equals alpha * (p_s - p_t)_k.
    worst = 0.0
    for z_s, z_t, y, alpha in gradient_cases():
        grad = autodiff_kd_gradient(z_s, z_t, y, alpha)
        p_s, p_t = softmax(z_s), softmax(z_t)
        wrong = np.arange(len(z_s)) != y
        worst = max(worst, float(np.abs(grad[wrong] - alpha * (p_s - p_t)[wrong]).max()))
    report(2, worst < 1e-10,
           f"max |grad_k - alpha(p_s - p_t)_k| over y_k = 0 is {worst:.3g}; the loss gives "
           f"p_s,k - alpha p_t,k, which differs by (1 - alpha) p_s,k")


def test_criterion_03_label_smoothing_is_uniform_rcd():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 17))
        z = rng.standard_normal((1, k)) * rng.choice([0.5, 2.0, 6.0])
        y, alpha = np.array([int(rng.integers(0, k))]), float(rng.random())
        a = T.Tensor(z.copy(), requires_grad=True)
        b = T.Tensor(z.copy(), requires_grad=True)
        T.backward(ls_loss(a, y, alpha))
        T.backward(distill_loss(b, np.full((1, k), 1.0 / k), y, alpha))
        worst = max(worst, float(np.abs(a.grad - b.grad).max()))
    report(3, worst < 1e-12, f"max gradient gap LS vs uniform-target RCD = {worst:.3g} over 1000 cases")


def test_criterion_04_metric_oracles():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        a, b = small_instance(rng)
        la, lb = a.tolist(), b.tolist()
        pa, pb = top1(a).tolist(), top1(b).tolist()
        gaps = (activation_distance(a, b) - oracle_activation(la, lb),
                rank_disagreement(a, b) - oracle_rank(la, lb),
                prediction_disagreement(a, b) - oracle_pred(la, lb),
                js_divergence(a, b) - oracle_js(la, lb),
                variation_of_information(pa, pb) - oracle_voi(pa, pb))
        worst = max(worst, max(abs(g) for g in gaps))
    worst_opd = 0.0
    for _ in range(5):
        # two free output columns, so the optimal rotation is not pinned by row sums
        p, q = rng.random((6, 2)), rng.random((6, 2))
        worst_opd = max(worst_opd, abs(procrustes_distance(p, q, probs=True)
                                       - rotation_grid_procrustes(p, q)))
    report(4, worst < 1e-9 and worst_opd < 1e-3,
           f"max oracle gap {worst:.3g} (100 instances); Procrustes vs rotation grid {worst_opd:.3g}")


def enumerate_two_sided(a, b):
    pooled = sorted(a + b)
    rank = {v: i + 1 for i, v in enumerate(pooled)}
    n, m = len(a), len(b)
    centre = Fraction(n * m, 2)
    dev = abs(sum(rank[v] for v in a) - Fraction(n * (n + 1), 2) - centre)
    combos = list(itertools.combinations(range(1, n + m + 1), n))
    hits = sum(abs(sum(c) - Fraction(n * (n + 1), 2) - centre) >= dev for c in combos)
    return Fraction(hits, len(combos))


def test_criterion_05_mann_whitney_exactness():
    grid = [-2.5, -1.0, 0.0, 0.5, 1.5, 3.0, 4.0, 7.0]
    checked, mismatches = 0, 0
    for six in itertools.combinations(grid, 6):
        for a in itertools.combinations(six, 3):
            b = [v for v in six if v not in a]
            res = mann_whitney_u(list(a), b)
            checked += 1
            if res.method != "exact" or res.p != float(enumerate_two_sided(list(a), b)):
                mismatches += 1
    base = mann_whitney_u([1, 2, 3], [4, 5, 6]).p
    report(5, mismatches == 0 and base == 0.1,
           f"{checked} tie-free 3-vs-3 pairs, {mismatches} mismatches; [1,2,3] vs [4,5,6] p = {base}")


# Blobs with a noisier teacher: small batches and a high learning rate keep the
# teacher away from interpolating the flipped labels.
BLOBS_C6 = {
    "dataset": {"kind": "blobs", "n_classes": 10, "noise": 0.15, "center_scale": 0.8},
    "model": {"kind": "mlp", "hidden": [64, 64]},
    "train": {"steps": 2000, "teacher_steps": 2000, "batch_size": 16, "lr": 3e-3},
    "teacher_seeds": [0],
    "student_seeds": [10, 11, 12, 13, 14],
    "alphas": [0.1, 0.5, 0.9],
}


@pytest.mark.slow
def test_criterion_06_asymmetric_transfer(tmp_path):
    start = time.perf_counter()
    cfg = config_from_dict({**BLOBS_C6, "output_dir": str(tmp_path)})
    manifest = run_matrix(cfg)
    elapsed = time.perf_counter() - start
    rows = {d["alpha"]: d for d in agreement_deltas(manifest.groups, 0)}
    hi, lo = rows[0.9], rows[0.1]
    p_a = mann_whitney_u(hi["per_seed_incorrect"], lo["per_seed_incorrect"], alternative="greater").p
    p_b = mann_whitney_u(hi["per_seed_incorrect"], hi["per_seed_correct"], alternative="greater").p
    ok_a = hi["delta_incorrect"] > lo["delta_incorrect"] and p_a < 0.1
    ok_b = hi["delta_incorrect"] > hi["delta_correct"] and p_b < 0.1
    report(6, ok_a and ok_b and not manifest.failures and elapsed < 600,
           f"d_inc(0.9)={hi['delta_incorrect']:.4f} vs d_inc(0.1)={lo['delta_incorrect']:.4f} "
           f"(p={p_a:.3g}); d_cor(0.9)={hi['delta_correct']:.4f} (p={p_b:.3g}); "
           f"baseline {hi['baseline_condition']}; {elapsed:.0f}s")


# Tiny GPT preset on Tiny Shakespeare (see the decisions ledger for the preset choice).
CHARS_C7 = {
    "dataset": {"kind": "chars", "replace": "substring"},
    "model": {"kind": "gpt", "preset": "tiny"},
    "train": {"steps": 1000, "teacher_steps": 2000, "batch_size": 32, "lr": 3e-3},
    "teacher_seeds": [0],
    "student_seeds": [10, 11, 12],
    "alphas": [0.1, 0.5, 0.9],
    "adversarial": {"gen_chars": 10000, "n_prompts": 10, "prompt_len": 16, "temperature": 1.0},
}


@pytest.fixture(scope="module")
def adversarial_run(tmp_path_factory, shakespeare_path):
    out = tmp_path_factory.mktemp("adversarial")
    data = {**CHARS_C7, "dataset": {**CHARS_C7["dataset"], "path": str(shakespeare_path)},
            "output_dir": str(out)}
    cfg = config_from_dict(data)
    start = time.perf_counter()
    manifest = run_adversarial(cfg)
    return cfg, manifest, out, time.perf_counter() - start


def mean_tha(counts, kind, alpha=None):
    vals = [c["count_tha"] for c in counts
            if c["kind"] == kind and (alpha is None or c["alpha"] == alpha)]
    return float(np.mean(vals))


@pytest.mark.slow
def test_criterion_07_adversarial_transfer(adversarial_run):
    _, manifest, _, elapsed = adversarial_run
    counts = manifest.counts
    teacher = next(c for c in counts if c["role"] == "teacher")
    kd = {a: mean_tha(counts, "KD", a) for a in (0.1, 0.5, 0.9)}
    siddo = mean_tha(counts, "SIDDO")
    ok = (not manifest.failures and kd[0.9] >= 2 * siddo and kd[0.9] >= kd[0.5] >= kd[0.1]
          and elapsed < 3600)
    report(7, ok, f"teacher tha={teacher['count_tha']}; KD tha means 0.1/0.5/0.9 = "
                  f"{kd[0.1]:.1f}/{kd[0.5]:.1f}/{kd[0.9]:.1f}; SIDDO {siddo:.1f}; {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_08_zero_occurrence_baseline(adversarial_run, shakespeare_path):
    cfg, manifest, out, _ = adversarial_run
    corpus = load_char_corpus(shakespeare_path)
    a = cfg.adversarial
    counts = []
    for r in manifest.runs:
        if r.get("kind") == "SIDDO" and r["status"] == "ok":
            ckpt = load_checkpoint(out / "checkpoints" / r["id"])
            counts.append(adversarial_eval(ckpt, corpus, a.gen_chars, a.seed, a.n_prompts,
                                           a.prompt_len, temperature=0.0)[0])
    clean = corpus.text.count("tha")
    report(8, counts and all(c == 0 for c in counts),
           f"greedy SIDDO tha counts {counts}; the clean corpus itself contains 'tha' {clean} times")


CHARS_C9 = {
    "dataset": {"kind": "chars"},
    "model": {"kind": "gpt", "preset": "tiny"},
    "train": {"steps": 1000, "teacher_steps": 2000, "batch_size": 32, "lr": 3e-3},
    "teacher_seeds": [0],
    "student_seeds": [10, 11, 12],
    "alphas": [0.9],
}


@pytest.mark.slow
def test_criterion_09_width_trend(tmp_path, shakespeare_path):
    data = {**CHARS_C9, "dataset": {**CHARS_C9["dataset"], "path": str(shakespeare_path)},
            "output_dir": str(tmp_path)}
    manifest = width_sweep(config_from_dict(data), fractions=[0.25, 0.5, 1.0])
    rows = sorted(manifest.sweep, key=lambda r: r["width"])
    widths = [r["width"] for r in rows]
    d_inc = [r["delta_incorrect"] for r in rows]
    rho = spearman(widths, d_inc)
    report(9, not manifest.failures and rho > 0,
           "d_inc by width " + ", ".join(f"{w:g}:{d:.4f}" for w, d in zip(widths, d_inc))
           + f"; Spearman {rho:.3g}")


@pytest.mark.slow
def test_criterion_10_scheduling_determinism(tmp_path):
    from distill_audit.cli import main
    cfg_path = tmp_path / "config.yaml"
    from distill_audit.harness import dump_config
    cfg_path.write_text(dump_config(minimal_blob_config(tmp_path / "unused")))
    for jobs in (1, 4):
        assert main(["run-matrix", "--config", str(cfg_path), "--jobs", str(jobs),
                     "--out", str(tmp_path / f"j{jobs}")]) == 0
    names = sorted(p.name for p in (tmp_path / "j1").glob("*.csv"))
    differ = [n for n in names if (tmp_path / "j1" / n).read_bytes() != (tmp_path / "j4" / n).read_bytes()]
    report(10, len(names) >= 5 and not differ,
           f"{len(names)} CSV reports compared between --jobs 1 and --jobs 4; differing: {differ or 'none'}")


def test_criterion_11_character_frequencies(shakespeare_path):
    freq = load_char_corpus(shakespeare_path).char_frequencies()
    report(11, abs(freq[" "] - 0.1523) <= 0.002 and abs(freq["e"] - 0.0848) <= 0.002,
           f"space {freq[' ']:.4f}, 'e' {freq['e']:.4f}")
