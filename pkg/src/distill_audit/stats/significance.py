"""KD-versus-controls significance rows."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateSamples, IncompleteMatrix
from ..funcsim.metrics import LOWER_IS_CLOSER
from .tests import mann_whitney_u

ALPHA_LEVEL = 0.05
CSV_COLUMNS = ("metric", "condition", "alpha", "u_vs_siddo", "p_vs_siddo", "u_vs_rcd", "p_vs_rcd",
               "direction", "significant")


@dataclass(frozen=True)
class SignificanceRow:
    metric: str
    condition: str
    alpha: float
    u_vs_siddo: float
    p_vs_siddo: float
    u_vs_rcd: float
    p_vs_rcd: float
    direction: str
    significant: bool


def _direction(kd, control, lower_better):
    a, b = np.median(kd), np.median(control)
    if a == b:
        return "equal"
    return "better" if (a < b) == lower_better else "worse"


MIN_SAMPLES = 3


def _test(kd, control):
    if len(kd) < MIN_SAMPLES or len(control) < MIN_SAMPLES:
        return float("nan"), float("nan")
    try:
        res = mann_whitney_u(kd, control)
    except DegenerateSamples:
        return 0.5 * len(kd) * len(control), 1.0
    return res.u, res.p


def build_significance_table(values, metrics=None, condition="kd", level=ALPHA_LEVEL):
    """Rows per (metric, KD alpha).

    ``values`` maps ``(kind, alpha)`` to ``{metric: per-seed values}``;
    kinds are "KD", "RCD", "SIDDO" (alpha ignored for SIDDO). A row is
    significant only if KD beats SIDDO and the same-alpha RCD sample, each
    two-sided p < ``level`` with the median on the favourable side.
    Comparisons with fewer than three runs on either side are emitted with
    NaN statistics and direction "incomplete".
    """
    siddo = next((v for (kind, _), v in values.items() if kind == "SIDDO"), None)
    if siddo is None:
        raise IncompleteMatrix("no SIDDO control in the matrix", missing=[("SIDDO", 0.0)])
    kd_alphas = sorted(alpha for (kind, alpha) in values if kind == "KD")
    if not kd_alphas:
        raise IncompleteMatrix("no KD conditions in the matrix", missing=[("KD", None)])
    missing = [("RCD", a) for a in kd_alphas if ("RCD", a) not in values]
    if missing:
        raise IncompleteMatrix(f"missing RCD controls for alpha {[a for _, a in missing]}",
                               missing=missing)
    if metrics is None:
        metrics = sorted(values[("KD", kd_alphas[0])])
    rows = []
    for metric in metrics:
        lower = LOWER_IS_CLOSER.get(metric, True)
        for alpha in kd_alphas:
            kd = values[("KD", alpha)]
            rcd = values[("RCD", alpha)]
            for name, sample in (("KD", kd), ("SIDDO", siddo), ("RCD", rcd)):
                if metric not in sample:
                    raise IncompleteMatrix(f"{name} lacks metric {metric!r}", missing=[(name, alpha)])
            u_s, p_s = _test(kd[metric], siddo[metric])
            u_r, p_r = _test(kd[metric], rcd[metric])
            if np.isnan(p_s) or np.isnan(p_r):
                rows.append(SignificanceRow(metric, condition, float(alpha), u_s, p_s, u_r, p_r,
                                            "incomplete", False))
                continue
            dirs = (_direction(kd[metric], siddo[metric], lower),
                    _direction(kd[metric], rcd[metric], lower))
            if dirs[0] == dirs[1]:
                direction = dirs[0]
            else:
                direction = "mixed"
            significant = direction == "better" and p_s < level and p_r < level
            rows.append(SignificanceRow(metric, condition, float(alpha), u_s, p_s, u_r, p_r,
                                        direction, significant))
    return rows


def significance_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.metric, r.condition, f"{r.alpha:g}", f"{r.u_vs_siddo:.6g}",
                         f"{r.p_vs_siddo:.6g}", f"{r.u_vs_rcd:.6g}", f"{r.p_vs_rcd:.6g}",
                         r.direction, "true" if r.significant else "false"])
    return buf.getvalue()
