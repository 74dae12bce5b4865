"""The experiment matrix: teachers, then every student cell, then reports.

Jobs are independent and deterministic, so the worker count never changes
any output byte: reports are assembled after all jobs finish, in job-list
order, from the files the jobs wrote.
"""

import csv
import io
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..distill.conditions import Condition
from ..distill.train import train_student, train_teacher
from ..errors import (IncompleteMatrix, InvalidArgument, NumericalError, TrainingDiverged)
from ..funcsim.io import read_logits, write_labels, write_logits
from ..funcsim.metrics import compare
from ..models.checkpoint import load_checkpoint, save_checkpoint
from ..models.networks import build_network
from ..numcore import tensor as T
from ..stats.significance import SignificanceRow, build_significance_table, significance_csv
from ..stats.tests import sem
from .config import config_from_dict
from .manifest import RunManifest, inventory, write_manifest
from .tasks import initial_model, tasks_for

METRIC_ORDER = (
    "activation_distance", "rank_disagreement", "prediction_disagreement", "js_divergence",
    "variation_of_information", "procrustes_distance", "prediction_agreement",
    "agree_correct", "agree_incorrect", "student_accuracy",
)
SIGNIFICANCE_METRICS = METRIC_ORDER[:6]
LABELS_FILE = "labels/test.dlab"
_RUNTIME_FAILURES = (TrainingDiverged, NumericalError, FloatingPointError)


def fmt(x):
    return f"{float(x):.6g}"


# -- jobs ------------------------------------------------------------------------

def teacher_id(seed):
    return f"teacher-t{seed}"


def condition_for(config, kind, alpha, student_seed, teacher_seed):
    needs = kind in ("KD", "FeatureKD")
    return Condition(
        kind,
        None if kind == "SIDDO" else alpha,
        temperature=config.temperature if kind in ("KD", "RCD") else 1.0,
        block=config.feature_block if kind == "FeatureKD" else None,
        data_seed=student_seed,
        teacher=teacher_id(teacher_seed) if needs else None,
        rcd_normalize=config.rcd_normalize,
        rcd_fixed=config.rcd_fixed if kind == "RCD" else False,
    )


def job_id(job):
    if job["role"] == "teacher":
        return teacher_id(job["teacher_seed"])
    out = f"{job['label']}-t{job['teacher_seed']}-s{job['student_seed']}"
    if job.get("width") is not None:
        out += f"-w{job['width']:g}"
    return out


def condition_key(kind, teacher_seed, width=None):
    out = f"{kind.lower()}@t{teacher_seed}"
    if width is not None:
        out += f"/w{width:g}"
    return out


def student_jobs(config, widths=(None,), alphas=None):
    alphas = config.alphas if alphas is None else alphas
    jobs = []
    for t in config.teacher_seeds:
        for width in widths:
            for kind in config.conditions:
                for alpha in ([0.0] if kind == "SIDDO" else alphas):
                    for s in config.student_seeds:
                        cond = condition_for(config, kind, float(alpha), s, t)
                        jobs.append({"role": "student", "kind": kind, "alpha": float(alpha),
                                     "teacher_seed": t, "student_seed": s, "width": width,
                                     "label": cond.label})
    return jobs


def _eval_logits(checkpoint, x):
    net = build_network(checkpoint, trainable=False)
    parts = []
    with T.no_grad():
        for start in range(0, len(x), 256):
            z = net.forward(x[start:start + 256]).data
            parts.append(z.reshape(-1, z.shape[-1]))
    return np.concatenate(parts)


def run_job(config_dict, job, out_dir):
    """Train one model, save its checkpoint and test logits; return a record."""
    config = config_from_dict(config_dict)
    out = Path(out_dir)
    tasks = tasks_for(config)
    jid = job_id(job)
    t = job["teacher_seed"]
    record = {"id": jid, **{k: job[k] for k in ("role", "teacher_seed")}}
    tr = config.train
    kw = dict(batch_size=tr.batch_size, optimizer=tr.optimizer, lr=tr.lr,
              experiment_seed=config.experiment_seed)
    try:
        if job["role"] == "teacher":
            init = initial_model(config, tasks.n_classes, t)
            ckpt = train_teacher(init, tasks.teacher, tr.teacher_steps, data_seed=t, **kw)
        else:
            record.update({k: job[k] for k in ("kind", "alpha", "student_seed", "width", "label")})
            cond = condition_for(config, job["kind"], job["alpha"], job["student_seed"], t)
            teacher = None
            if cond.needs_teacher:
                tdir = out / "checkpoints" / teacher_id(t)
                if not (tdir / "manifest.json").is_file():
                    record.update(status="failed", error=f"teacher {teacher_id(t)} unavailable")
                    return record
                teacher = load_checkpoint(tdir)
            init = initial_model(config, tasks.n_classes, t, job.get("width"))
            ckpt = train_student(cond, teacher, init, tasks.student, tr.steps, **kw)
    except _RUNTIME_FAILURES as err:
        record.update(status="failed", error=f"{type(err).__name__}: {err}")
        return record
    save_checkpoint(ckpt, out / "checkpoints" / jid)
    write_logits(out / "logits" / f"{jid}.dlog", _eval_logits(ckpt, tasks.test_x))
    p = ckpt.provenance
    record.update(status="ok", n_params=ckpt.n_params(), digest=ckpt.digest(),
                  **{k: p[k] for k in ("train_loss", "train_accuracy", "test_loss", "test_accuracy")})
    return record


def _pool_context():
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")
    return multiprocessing.get_context("spawn")


def execute(config, jobs, out_dir, n_workers=1, log=None):
    """Run jobs, preserving list order in the returned records."""
    cfg = config.to_dict()
    if n_workers <= 1 or len(jobs) <= 1:
        records = []
        for job in jobs:
            records.append(run_job(cfg, job, out_dir))
            if log:
                log(f"{records[-1]['id']}: {records[-1]['status']}")
        return records
    with ProcessPoolExecutor(max_workers=n_workers, mp_context=_pool_context()) as pool:
        futures = [pool.submit(run_job, cfg, job, str(out_dir)) for job in jobs]
        records = []
        for fut in futures:
            records.append(fut.result())
            if log:
                log(f"{records[-1]['id']}: {records[-1]['status']}")
    return records


# -- reports -----------------------------------------------------------------------

def best_control_baseline(controls):
    """Control id with the highest mean prediction agreement with the teacher.

    ``controls`` is a list of ``(condition_id, kind, alpha, agreement_values)``.
    Ties go to the lowest alpha, then SIDDO before RCD.
    """
    usable = [c for c in controls if c[1] in ("SIDDO", "RCD") and len(c[3])]
    if not usable:
        raise InvalidArgument("no control conditions to choose a baseline from")
    best = min(usable, key=lambda c: (-float(np.mean(c[3])), float(c[2]), c[1] != "SIDDO"))
    return best[0]


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def student_metrics(records, out_dir, labels):
    """Per successful student: metric dict against its own teacher."""
    out = Path(out_dir)
    teacher_logits = {}
    results = []
    for r in records:
        if r["role"] != "student" or r["status"] != "ok":
            continue
        t = r["teacher_seed"]
        tpath = out / "logits" / f"{teacher_id(t)}.dlog"
        if not tpath.is_file():
            continue
        if t not in teacher_logits:
            teacher_logits[t] = read_logits(tpath)
        s = read_logits(out / "logits" / f"{r['id']}.dlog")
        results.append((r, compare(s, teacher_logits[t], labels)))
    return results


def _sem_or_nan(values):
    return sem(values) if len(values) >= 2 else float("nan")


def _group(results):
    """{(condition key, kind, alpha, width): {metric: [values in seed order]}}"""
    groups = {}
    for r, m in results:
        key = (condition_key(r["kind"], r["teacher_seed"], r.get("width")), r["kind"], r["alpha"],
               r.get("width"), r["teacher_seed"])
        bucket = groups.setdefault(key, {name: [] for name in METRIC_ORDER})
        for name in METRIC_ORDER:
            bucket[name].append(m[name])
    return groups


def agreement_deltas(groups, teacher_seed, width=None):
    """Rows of (alpha, dc, di, sem_c, sem_i, baseline, per-seed dc, per-seed di) for KD."""
    mine = {k: v for k, v in groups.items() if k[4] == teacher_seed and k[3] == width}
    controls = [(k[0] if k[1] == "SIDDO" else f"{k[0]}:{k[2]:g}", k[1], k[2], v["prediction_agreement"])
                for k, v in mine.items() if k[1] in ("SIDDO", "RCD")]
    if not controls:
        return []
    base_id = best_control_baseline(controls)
    base = next(v for k, v in mine.items()
                if (k[0] if k[1] == "SIDDO" else f"{k[0]}:{k[2]:g}") == base_id)
    bc, bi = np.mean(base["agree_correct"]), np.mean(base["agree_incorrect"])
    rows = []
    for k, v in sorted(mine.items(), key=lambda kv: kv[0][2]):
        if k[1] != "KD":
            continue
        dc = [x - bc for x in v["agree_correct"]]
        di = [x - bi for x in v["agree_incorrect"]]
        rows.append({"alpha": k[2], "delta_correct": float(np.mean(dc)),
                     "delta_incorrect": float(np.mean(di)), "sem_correct": _sem_or_nan(dc),
                     "sem_incorrect": _sem_or_nan(di), "baseline_condition": base_id,
                     "per_seed_correct": dc, "per_seed_incorrect": di})
    return rows


def _significance_rows(groups, teacher_seed, alphas):
    values = {}
    for k, v in groups.items():
        if k[4] == teacher_seed and k[3] is None and k[1] in ("KD", "RCD", "SIDDO"):
            values[(k[1], 0.0 if k[1] == "SIDDO" else k[2])] = v
    label = condition_key("KD", teacher_seed)
    try:
        return build_significance_table(values, SIGNIFICANCE_METRICS, condition=label)
    except IncompleteMatrix:
        nan = float("nan")
        return [SignificanceRow(m, label, float(a), nan, nan, nan, nan, "incomplete", False)
                for m in SIGNIFICANCE_METRICS for a in sorted(alphas)]


def write_reports(config, records, out_dir, labels, runs_dir=None):
    """Metric, aggregate, delta, significance and run CSVs into ``out_dir``.

    Logits are read from ``runs_dir`` (default: ``out_dir``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = student_metrics(records, Path(runs_dir) if runs_dir else out, labels)
    metric_rows = []
    for r, m in results:
        cond = condition_key(r["kind"], r["teacher_seed"], r.get("width"))
        for name in METRIC_ORDER:
            metric_rows.append([cond, fmt(r["alpha"]), r["student_seed"], name, fmt(m[name])])
    (out / "metrics.csv").write_text(
        _csv(("condition", "alpha", "student_seed", "metric", "value"), metric_rows))

    groups = _group(results)
    agg = []
    for key, bucket in groups.items():
        for name in METRIC_ORDER:
            vals = bucket[name]
            agg.append([key[0], fmt(key[2]), name, fmt(np.mean(vals)), fmt(_sem_or_nan(vals)), len(vals)])
    (out / "aggregate.csv").write_text(_csv(("condition", "alpha", "metric", "mean", "sem", "n"), agg))

    widths = sorted({k[3] for k in groups}, key=lambda w: -1.0 if w is None else -w)
    delta_rows, sig_rows = [], []
    for t in config.teacher_seeds:
        for width in widths:
            for d in agreement_deltas(groups, t, width):
                row = [fmt(d["alpha"]), fmt(d["delta_correct"]), fmt(d["delta_incorrect"]),
                       fmt(d["sem_correct"]), fmt(d["sem_incorrect"]), d["baseline_condition"]]
                delta_rows.append(([fmt(width)] if width is not None else []) + row)
        if "KD" in config.conditions and None in widths:
            sig_rows.extend(_significance_rows(groups, t, config.alphas))
    header = ("alpha", "delta_correct", "delta_incorrect", "sem_correct", "sem_incorrect", "baseline_condition")
    if any(w is not None for w in widths):
        header = ("width",) + header
    (out / "agreement_deltas.csv").write_text(_csv(header, delta_rows))
    if sig_rows or "KD" in config.conditions:
        (out / "significance.csv").write_text(significance_csv(sig_rows))

    run_rows = []
    for r in records:
        run_rows.append([r["id"], r["role"], r.get("kind", ""), fmt(r["alpha"]) if "alpha" in r else "",
                         r["teacher_seed"], r.get("student_seed", ""),
                         fmt(r["width"]) if r.get("width") is not None else "", r["status"],
                         *(fmt(r[k]) if r["status"] == "ok" else "" for k in
                           ("train_loss", "train_accuracy", "test_loss", "test_accuracy"))])
    (out / "runs.csv").write_text(_csv(
        ("id", "role", "kind", "alpha", "teacher_seed", "student_seed", "width", "status",
         "train_loss", "train_accuracy", "test_loss", "test_accuracy"), run_rows))
    return groups


def _prepare(config, out_dir):
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = tasks_for(config)
    (out / "labels").mkdir(exist_ok=True)
    (out / "logits").mkdir(exist_ok=True)
    write_labels(out / LABELS_FILE, tasks.test_y)
    return out, tasks


def run_jobs(config, student_job_list, out_dir=None, jobs=1, log=None):
    """Teachers first, then students; writes reports and the manifest."""
    out, tasks = _prepare(config, out_dir)
    teacher_jobs = [{"role": "teacher", "teacher_seed": t} for t in config.teacher_seeds]
    records = execute(config, teacher_jobs, out, jobs, log)
    records += execute(config, student_job_list, out, jobs, log)
    groups = write_reports(config, records, out, tasks.test_y)
    manifest = RunManifest({"experiment": config.to_dict(), "data": tasks.provenance}, records,
                           inventory(out))
    write_manifest(manifest, out)
    manifest.groups = groups
    return manifest


def run_matrix(config, out_dir=None, jobs=1, log=None):
    """Full teacher x condition x alpha x student-seed matrix."""
    return run_jobs(config, student_jobs(config), out_dir, jobs, log)
