"""``distill-audit`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

import os

# Single-threaded BLAS keeps float reductions, and therefore outputs,
# independent of the machine; must be set before numpy loads.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

from . import __version__  # noqa: E402
from .distill.conditions import Condition, canonical_kind  # noqa: E402
from .distill.train import train_student, train_teacher  # noqa: E402
from .errors import (DegenerateSamples, IncompleteMatrix, InvalidArgument, ManifestError,  # noqa: E402
                     NumericalError, TrainingDiverged)
from .funcsim.io import read_labels, read_logits, write_labels, write_logits  # noqa: E402
from .funcsim.metrics import compare  # noqa: E402
from .harness.adversarial import adversarial_eval, run_adversarial  # noqa: E402
from .harness.config import (ExperimentConfig, apply_overrides, config_from_dict,  # noqa: E402
                             dump_config, load_config)
from .harness.manifest import load_manifest  # noqa: E402
from .harness.matrix import _csv, _eval_logits, fmt, run_matrix, write_reports  # noqa: E402
from .harness.sweep import width_sweep  # noqa: E402
from .harness.tasks import initial_model, tasks_for  # noqa: E402
from .models.checkpoint import load_checkpoint, save_checkpoint  # noqa: E402

log = logging.getLogger("distill_audit")

USAGE_ERRORS = (InvalidArgument, ManifestError, IncompleteMatrix, DegenerateSamples, FileNotFoundError)
RUNTIME_ERRORS = (TrainingDiverged, NumericalError, FloatingPointError)
METRIC_NAMES = ("activation_distance", "rank_disagreement", "prediction_disagreement", "js_divergence",
                "variation_of_information", "procrustes_distance")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config(args):
    config = load_config(args.config) if args.config else ExperimentConfig().validate()
    return apply_overrides(config, getattr(args, "set", None))


def _out_override(config, out):
    return apply_overrides(config, [f"output_dir={out}"]) if out else config


def _say(text):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# -- subcommands ----------------------------------------------------------------

def cmd_print_config(args):
    _say(dump_config(_config(args)))
    return 0


def cmd_train_teacher(args):
    config = _config(args)
    tasks = tasks_for(config)
    tr = config.train
    init = initial_model(config, tasks.n_classes, args.seed)
    ckpt = train_teacher(init, tasks.teacher, tr.teacher_steps, data_seed=args.seed,
                         batch_size=tr.batch_size, optimizer=tr.optimizer, lr=tr.lr,
                         experiment_seed=config.experiment_seed, log=log.info, log_every=100)
    out = Path(args.out)
    save_checkpoint(ckpt, out)
    write_logits(out / "logits.dlog", _eval_logits(ckpt, tasks.test_x))
    write_labels(out / "labels.dlab", tasks.test_y)
    p = ckpt.provenance
    report = _csv(("split", "loss", "accuracy"),
                  [["train", fmt(p["train_loss"]), fmt(p["train_accuracy"])],
                   ["test", fmt(p["test_loss"]), fmt(p["test_accuracy"])]])
    (out / "losses.csv").write_text(report)
    _say(report)
    return 0


def cmd_distill(args):
    config = _config(args)
    kind = canonical_kind(args.condition)
    if kind == "SIDDO" and args.alpha is not None:
        raise UsageError("--alpha is not valid for siddo")
    if kind != "SIDDO" and args.alpha is None:
        raise UsageError(f"--alpha is required for {args.condition}")
    teacher = None
    if args.teacher:
        if kind in ("KD", "FeatureKD"):
            teacher = load_checkpoint(args.teacher)
        else:
            log.warning("%s does not use a teacher; ignoring --teacher", args.condition)
            if args.init_seed is None:
                args.init_seed = load_checkpoint(args.teacher).init_seed
    elif kind in ("KD", "FeatureKD"):
        raise UsageError(f"{args.condition} needs --teacher")
    init_seed = args.init_seed if args.init_seed is not None else (teacher.init_seed if teacher else 0)
    cond = Condition(kind, args.alpha, temperature=args.temperature if args.temperature else config.temperature,
                     block=args.block if kind == "FeatureKD" else None, data_seed=args.seed,
                     teacher=str(args.teacher) if teacher is not None else None,
                     rcd_normalize=not args.rcd_raw, rcd_fixed=args.rcd_fixed if kind == "RCD" else False)
    tasks = tasks_for(config)
    init = initial_model(config, tasks.n_classes, init_seed, args.width)
    if teacher is not None and args.width is None and \
            teacher.provenance.get("init_digest") not in (None, init.digest()):
        log.warning("student init differs from the teacher's M_0")
    tr = config.train
    ckpt = train_student(cond, teacher, init, tasks.student, tr.steps, batch_size=tr.batch_size,
                         optimizer=tr.optimizer, lr=tr.lr, experiment_seed=config.experiment_seed,
                         log=log.info, log_every=100)
    out = Path(args.out)
    save_checkpoint(ckpt, out)
    write_logits(out / "logits.dlog", _eval_logits(ckpt, tasks.test_x))
    write_labels(out / "labels.dlab", tasks.test_y)
    p = ckpt.provenance
    _say(f"{cond.label} test_accuracy={fmt(p['test_accuracy'])} test_loss={fmt(p['test_loss'])}")
    return 0


def cmd_metrics(args):
    a, b = read_logits(args.a), read_logits(args.b)
    if a.shape != b.shape:
        raise UsageError(f"shape mismatch: {args.a} is {a.shape[0]}x{a.shape[1]}, "
                         f"{args.b} is {b.shape[0]}x{b.shape[1]}")
    labels = None
    if args.labels:
        labels = read_labels(args.labels)
        if labels.shape[0] != a.shape[0]:
            raise UsageError(f"{args.labels} has {labels.shape[0]} labels for {a.shape[0]} rows")
    m = compare(a, b, labels)
    names = list(METRIC_NAMES) + (["agree_correct", "agree_incorrect"] if labels is not None else [])
    text = _csv(("metric", "value"), [[n, fmt(m[n])] for n in names])
    if args.out:
        Path(args.out).write_text(text)
    _say(text)
    return 0


def cmd_report(args):
    manifest = load_manifest(args.runs)
    config = config_from_dict(manifest.config["experiment"])
    labels = read_labels(Path(args.runs) / "labels" / "test.dlab")
    out = Path(args.out)
    write_reports(config, manifest.runs, out, labels, runs_dir=args.runs)
    _say(f"reports written to {out}")
    return 0


def _report_failures(manifest):
    for r in manifest.failures:
        sys.stderr.write(f"failed: {r['id']}: {r.get('error', '')}\n")
    return 2 if manifest.failures else 0


def cmd_run_matrix(args):
    config = _out_override(_config(args), args.out)
    manifest = run_matrix(config, jobs=args.jobs, log=log.info)
    _say(f"{len(manifest.runs)} runs, {len(manifest.failures)} failed; outputs in {manifest.root}")
    return _report_failures(manifest)


def cmd_adversarial(args):
    if args.checkpoint:
        config = _config(args)
        corpus = tasks_for(config).corpus
        if corpus is None:
            raise UsageError("--checkpoint evaluation needs a chars dataset in the config")
        a = config.adversarial
        tha, the = adversarial_eval(load_checkpoint(args.checkpoint), corpus, a.gen_chars, a.seed,
                                    a.n_prompts, a.prompt_len, a.temperature)
        _say(_csv(("count_tha", "count_the"), [[tha, the]]))
        return 0
    config = _out_override(_config(args), args.out)
    manifest = run_adversarial(config, jobs=args.jobs, log=log.info)
    _say((Path(manifest.root) / "adversarial_summary.csv").read_text())
    return _report_failures(manifest)


def cmd_sweep_width(args):
    config = _out_override(_config(args), args.out)
    fractions = None
    if args.fractions:
        try:
            fractions = [float(x) for x in args.fractions.split(",")]
        except ValueError:
            raise UsageError(f"--fractions must be comma-separated numbers, got {args.fractions!r}") from None
    manifest = width_sweep(config, fractions, jobs=args.jobs, log=log.info)
    _say((Path(manifest.root) / "width_deltas.csv").read_text())
    return _report_failures(manifest)


# -- parser -------------------------------------------------------------------------

def _add_config(p):
    p.add_argument("--config", help="YAML experiment config (defaults are used when omitted)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. train.steps=200 (repeatable)")


def _add_jobs(p):
    p.add_argument("--jobs", type=int, default=1, help="worker processes (outputs do not depend on it)")


def build_parser():
    parser = Parser(prog="distill-audit", description="Knowledge-distillation functional-similarity audit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    sub.required = True

    p = sub.add_parser("print-config", help="print the effective config as YAML")
    _add_config(p)
    p.set_defaults(func=cmd_print_config)

    p = sub.add_parser("train-teacher", help="train one teacher")
    _add_config(p)
    p.add_argument("--seed", type=int, required=True, help="teacher seed (init and data order)")
    p.add_argument("--out", required=True, help="checkpoint directory to write")
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("distill", help="train one student under a condition")
    _add_config(p)
    p.add_argument("--teacher", help="teacher checkpoint directory (kd, feature-kd)")
    p.add_argument("--condition", required=True, choices=("kd", "rcd", "siddo", "ls", "feature-kd"))
    p.add_argument("--alpha", type=float, help="teacher weighting coefficient (not for siddo)")
    p.add_argument("--seed", type=int, required=True, help="student data-order seed")
    p.add_argument("--out", required=True, help="checkpoint directory to write")
    p.add_argument("--temperature", type=float, help="softmax temperature (default from config)")
    p.add_argument("--block", type=int, default=0, help="block index for feature-kd")
    p.add_argument("--init-seed", type=int, help="seed of the initial weights (default: the teacher's)")
    p.add_argument("--width", type=float, help="student width fraction (fresh init)")
    p.add_argument("--rcd-raw", action="store_true", help="rcd: do not renormalise the noise")
    p.add_argument("--rcd-fixed", action="store_true", help="rcd: noise fixed per example")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("metrics", help="compare two logits files")
    p.add_argument("--a", required=True, help="DLOG file (e.g. student)")
    p.add_argument("--b", required=True, help="DLOG file (e.g. teacher)")
    p.add_argument("--labels", help="DLAB file; adds the agreement split")
    p.add_argument("--out", help="write the CSV here as well")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="rebuild CSV reports from a run directory")
    p.add_argument("--runs", required=True, help="run directory containing manifest.json")
    p.add_argument("--out", required=True, help="directory for the CSVs")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run-matrix", help="teachers x conditions x alphas x student seeds")
    _add_config(p)
    _add_jobs(p)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.set_defaults(func=cmd_run_matrix)

    p = sub.add_parser("adversarial", help="poisoned-teacher experiment or single-model counts")
    _add_config(p)
    _add_jobs(p)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--checkpoint", help="only count tha/the for this checkpoint")
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("sweep-width", help="student width sweep")
    _add_config(p)
    _add_jobs(p)
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--fractions", help="comma-separated widths (default from config)")
    p.set_defaults(func=cmd_sweep_width)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        sys.stderr.write("distill-audit: error: --jobs must be at least 1\n")
        return 1
    try:
        return args.func(args)
    except (UsageError, *USAGE_ERRORS) as err:
        sys.stderr.write(f"distill-audit: error: {err}\n")
        return 1
    except RUNTIME_ERRORS as err:
        sys.stderr.write(f"distill-audit: failed: {err}\n")
        return 2
    except OSError as err:
        sys.stderr.write(f"distill-audit: error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
