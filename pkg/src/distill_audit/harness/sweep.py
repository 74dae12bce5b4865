"""Student-width sweep under a fixed step budget."""

from pathlib import Path

import numpy as np

from .manifest import inventory, write_manifest
from .matrix import _csv, agreement_deltas, fmt, run_jobs, student_jobs
from .tasks import check_width, model_config, tasks_for


def width_sweep(config, fractions=None, out_dir=None, jobs=1, log=None):
    """KD students and controls at each width, from width-matched fresh inits.

    Every width's init is drawn from the teacher seed, so width 1.0 is the
    teacher's own M_0. Emits ``width_deltas.csv`` with one row per
    (teacher seed, width, alpha).
    """
    fractions = [check_width(float(f)) for f in (fractions or config.sweep.fractions)]
    out = Path(out_dir or config.output_dir)
    manifest = run_jobs(config, student_jobs(config, widths=fractions), out, jobs, log)
    n_out = tasks_for(config).n_classes
    rows, results = [], []
    for t in config.teacher_seeds:
        for w in fractions:
            n_params = sum(int(np.prod(s))
                           for s in model_config(config, n_out, w).param_shapes().values())
            for d in agreement_deltas(manifest.groups, t, w):
                rows.append([t, fmt(w), n_params, fmt(d["alpha"]), fmt(d["delta_correct"]),
                             fmt(d["delta_incorrect"]), fmt(d["sem_correct"]), fmt(d["sem_incorrect"]),
                             d["baseline_condition"]])
                results.append({"teacher_seed": t, "width": w, "n_params": n_params, **d})
    (out / "width_deltas.csv").write_text(_csv(
        ("teacher_seed", "width", "n_params", "alpha", "delta_correct", "delta_incorrect",
         "sem_correct", "sem_incorrect", "baseline_condition"), rows))
    manifest.files = inventory(out)
    write_manifest(manifest, out)
    manifest.sweep = results
    return manifest
