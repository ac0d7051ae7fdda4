"""Paired Wilcoxon signed-rank test, Spearman rank correlation and mean/std
aggregation.

Wilcoxon conventions: differences are ``candidate - baseline``; zero
differences are discarded before ranking; ties get average ranks; the
statistic ``W`` is the sum of ranks of positive differences. Up to
``EXACT_MAX`` nonzero differences the null distribution is exact (all
``2**m`` sign patterns, counted by dynamic programming over doubled ranks so
ties stay integral); beyond that a normal approximation with tie and
continuity corrections is used.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats as sps

EXACT_MAX = 20
SPEARMAN_EXACT_MAX = 8
ALTERNATIVES = ("two_sided", "greater", "less")


@dataclass(frozen=True)
class PairedSample:
    case_ids: tuple[str, ...]
    baseline: np.ndarray
    candidate: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.baseline, dtype=np.float64)
        c = np.asarray(self.candidate, dtype=np.float64)
        if b.ndim != 1 or b.shape != c.shape:
            raise ValueError(f"baseline and candidate must be equal-length vectors, got {b.shape} and {c.shape}")
        if len(self.case_ids) != len(b):
            raise ValueError("case_ids must align with the scores")
        if len(b) == 0:
            raise ValueError("paired sample is empty")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("paired scores must be finite")
        object.__setattr__(self, "case_ids", tuple(self.case_ids))
        object.__setattr__(self, "baseline", b)
        object.__setattr__(self, "candidate", c)

    @classmethod
    def from_mappings(cls, baseline: dict, candidate: dict) -> "PairedSample":
        """Align two ``case_id -> score`` mappings on their common, sorted keys."""
        ids = sorted(set(baseline) & set(candidate))
        missing = sorted(set(baseline) ^ set(candidate))
        if missing:
            raise ValueError(f"cases not present on both sides: {missing[:5]}")
        return cls(tuple(ids), [baseline[i] for i in ids], [candidate[i] for i in ids])

    @property
    def differences(self) -> np.ndarray:
        return self.candidate - self.baseline


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    alternative: str
    n: int
    n_nonzero: int
    method: str
    median_difference: float
    warning: str | None = None


def signed_ranks(d) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of ``|d|`` over nonzero entries and their signs."""
    d = np.asarray(d, dtype=np.float64)
    d = d[d != 0]
    return sps.rankdata(np.abs(d)), np.sign(d)


def _exact_tails(ranks: np.ndarray, w: float) -> tuple[float, float]:
    """``P(W >= w)`` and ``P(W <= w)`` under random signs."""
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        # each rank either joins the positive sum or not
        counts[r:] += counts[:-r].copy()
    obs = int(round(2.0 * w))
    denom = 2.0 ** len(doubled)
    return counts[obs:].sum() / denom, counts[: obs + 1].sum() / denom


def _normal_tails(ranks: np.ndarray, w: float) -> tuple[float, float]:
    m = len(ranks)
    mean = m * (m + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = m * (m + 1) * (2 * m + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    if var <= 0:
        return 1.0, 1.0
    sd = math.sqrt(var)
    upper = special.ndtr(-(w - mean - 0.5) / sd)
    lower = special.ndtr((w - mean + 0.5) / sd)
    return float(min(upper, 1.0)), float(min(lower, 1.0))


def wilcoxon_signed_rank(sample: PairedSample, alternative: str = "two_sided",
                         exact: bool | None = None) -> WilcoxonResult:
    """Signed-rank test of ``candidate`` against ``baseline``.

    ``greater`` tests whether the candidate scores tend to be higher. The
    two-sided p-value doubles the smaller tail, capped at 1. If every
    difference is zero the result is ``p = 1`` with a warning.
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    d = sample.differences
    n = len(d)
    median = float(np.median(d))
    ranks, signs = signed_ranks(d)
    m = len(ranks)
    if m == 0:
        return WilcoxonResult(0.0, 1.0, alternative, n, 0, "degenerate", median,
                              "all differences are zero")
    w = float(ranks[signs > 0].sum())
    use_exact = m <= EXACT_MAX if exact is None else exact
    upper, lower = (_exact_tails if use_exact else _normal_tails)(ranks, w)
    if alternative == "greater":
        p = upper
    elif alternative == "less":
        p = lower
    else:
        p = min(1.0, 2.0 * min(upper, lower))
    warning = f"{n - m} zero differences discarded" if m < n else None
    return WilcoxonResult(w, float(p), alternative, n, m, "exact" if use_exact else "normal",
                          median, warning)


def significance_star(p: float, alpha: float = 0.01, median_difference: float | None = None) -> bool:
    """Star iff ``p < alpha`` (strict) and, when given, the median difference
    favours the candidate."""
    if median_difference is not None and not median_difference > 0:
        return False
    return bool(p < alpha)


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int
    method: str


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    return float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))


def spearman(x, y) -> SpearmanResult:
    """Pearson correlation of average ranks with a two-sided p-value.

    The p-value is exact (all ``n!`` permutations of ``y``) for
    ``n <= 8`` and from the t approximation with ``n - 2`` degrees of
    freedom above that.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"inputs must be equal-length vectors, got {x.shape} and {y.shape}")
    n = len(x)
    if n < 3:
        raise ValueError(f"spearman needs n >= 3, got {n}")
    if np.any(np.isnan(x)) or np.any(np.isnan(y)):
        raise ValueError("inputs contain NaN")
    for name, v in (("x", x), ("y", y)):
        if np.all(v == v[0]):
            raise ValueError(f"{name} is constant; rank correlation is undefined")
    rx, ry = sps.rankdata(x), sps.rankdata(y)
    rho = _pearson(rx, ry)
    if n <= SPEARMAN_EXACT_MAX:
        perms = np.array(list(itertools.permutations(ry)))
        a = rx - rx.mean()
        b = perms - perms.mean(axis=1, keepdims=True)
        null = (b @ a) / np.sqrt(np.dot(a, a) * np.einsum("ij,ij->i", b, b))
        hits = int(np.count_nonzero(np.abs(null) >= abs(rho) - 1e-12))
        return SpearmanResult(rho, hits / len(perms), n, "exact")
    if abs(rho) >= 1.0:
        return SpearmanResult(rho, 0.0, n, "t")
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return SpearmanResult(rho, float(2.0 * sps.t.sf(abs(t), n - 2)), n, "t")


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    n: int
    flag: str | None = None


def aggregate(scores) -> Aggregate:
    """Mean and sample standard deviation (``n - 1`` denominator)."""
    v = np.asarray(scores, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot aggregate an empty score list")
    if v.size == 1:
        return Aggregate(float(v[0]), 0.0, 1, "single value, std set to 0")
    return Aggregate(float(v.mean()), float(v.std(ddof=1)), int(v.size))
