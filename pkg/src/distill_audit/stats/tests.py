"""Mann-Whitney U and the standard error of the mean."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DegenerateSamples, InvalidArgument

EXACT_MAX_TOTAL = 16
ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float          # min(U_a, U_b)
    u_a: float        # pairs (x in a, y in b) with x > y, ties counting 1/2
    p: float
    method: str
    alternative: str

    def __iter__(self):
        return iter((self.u, self.p))


def _midranks(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def _u_distribution(n, m):
    """Counts of each U value (0..n*m) over all C(n+m, n) arrangements."""
    # f[i][j][u]: arrangements of i a's and j b's with statistic u
    table = [[None] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 or j == 0:
                counts = [0] * (i * j + 1)
                counts[0] = 1
            else:
                counts = [0] * (i * j + 1)
                # largest element from a: it beats all j b's
                for u, c in enumerate(table[i - 1][j]):
                    counts[u + j] += c
                for u, c in enumerate(table[i][j - 1]):
                    counts[u] += c
            table[i][j] = counts
    return tuple(table[n][m])


def _normal_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(a, b, alternative="two-sided", method="auto"):
    """Mann-Whitney U test of samples ``a`` against ``b``.

    ``alternative="greater"`` tests whether ``a`` tends to exceed ``b``.
    ``method="auto"`` enumerates exactly when ``len(a) + len(b) <= 16``
    and there are no ties, otherwise uses the normal approximation with
    tie and continuity corrections. Unpacks as ``(U, p)``.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if alternative not in ALTERNATIVES:
        raise InvalidArgument(f"alternative must be one of {ALTERNATIVES}")
    if len(a) < 3 or len(b) < 3:
        raise InvalidArgument("each sample needs at least 3 values")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise InvalidArgument("samples contain non-finite values")
    pooled = np.concatenate([a, b])
    if (pooled == pooled[0]).all():
        raise DegenerateSamples("all values are identical; the test is undefined")
    n, m = len(a), len(b)
    ranks = _midranks(pooled)
    u_a = float(ranks[:n].sum() - n * (n + 1) / 2.0)
    u_b = n * m - u_a
    ties = len(np.unique(pooled)) < len(pooled)
    if method == "auto":
        method = "exact" if (n + m <= EXACT_MAX_TOTAL and not ties) else "normal"
    if method == "exact":
        if ties:
            raise InvalidArgument("exact method needs tie-free samples")
        counts = _u_distribution(n, m)
        total = math.comb(n + m, n)
        ua = int(round(u_a))
        upper = sum(counts[ua:]) / total
        lower = sum(counts[:ua + 1]) / total
        if alternative == "greater":
            p = upper
        elif alternative == "less":
            p = lower
        else:
            p = min(1.0, 2.0 * min(upper, lower))
    elif method == "normal":
        big_n = n + m
        _, tie_counts = np.unique(pooled, return_counts=True)
        tie_term = float((tie_counts ** 3 - tie_counts).sum()) / (big_n * (big_n - 1))
        sigma = math.sqrt(n * m / 12.0 * ((big_n + 1) - tie_term))
        mu = n * m / 2.0
        if alternative == "greater":
            p = _normal_sf((u_a - mu - 0.5) / sigma)
        elif alternative == "less":
            p = _normal_sf((mu - u_a - 0.5) / sigma)
        else:
            z = (abs(u_a - mu) - 0.5) / sigma
            p = min(1.0, 2.0 * _normal_sf(z))
    else:
        raise InvalidArgument(f"unknown method {method!r}")
    return MannWhitneyResult(min(u_a, u_b), u_a, float(min(max(p, 0.0), 1.0)), method, alternative)


def sem(samples):
    """Standard error of the mean with the n-1 denominator."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 2:
        raise InvalidArgument("SEM needs at least two samples")
    return float(x.std(ddof=1) / math.sqrt(x.size))


def rankdata(x):
    """Midranks starting at 1."""
    return _midranks(np.asarray(x, dtype=np.float64).reshape(-1))


def spearman(x, y):
    """Spearman rank correlation (Pearson on midranks)."""
    rx, ry = rankdata(x), rankdata(y)
    if rx.shape != ry.shape or rx.size < 2:
        raise InvalidArgument("need two equal-length samples of size >= 2")
    rx, ry = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0.0:
        raise DegenerateSamples("a sample is constant; correlation undefined")
    return float((rx * ry).sum() / denom)
