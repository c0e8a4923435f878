"""Statistical kernel used by the evaluators.

Distribution functions come from :mod:`scipy.special`; the test statistics,
the exact Wilcoxon null distribution and the ROC/AUC computation are
implemented here.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

ALTERNATIVES = ("less", "greater", "two_sided")
WILCOXON_EXACT_MAX_N = 25


class DegenerateSampleError(ValueError):
    """Raised when a test statistic is undefined for the sample (all ties, zero variance)."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    alternative: str
    method_note: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def _check_alternative(alternative):
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


def _clip_p(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


# ---------------------------------------------------------------------------
# classification scores
# ---------------------------------------------------------------------------

def micro_f1(predicted, truth) -> float:
    """Micro-averaged F1 from pooled per-class TP/FP/FN counts."""
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth differ in length")
    if not truth:
        raise ValueError("empty label lists")
    tp = fp = fn = 0
    for label in set(predicted) | set(truth):
        for p, t in zip(predicted, truth):
            if p == label and t == label:
                tp += 1
            elif p == label:
                fp += 1
            elif t == label:
                fn += 1
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _pair_counts(pos, neg):
    """(#neg below each pos summed, #ties summed) via sorted search."""
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    upto = np.searchsorted(neg_sorted, pos, side="right")
    return int(below.sum()), int((upto - below).sum())


def roc_auc(pos_scores, neg_scores) -> float:
    """AUC = P(s+ > s-) + 0.5 P(s+ = s-) over all positive/negative pairs."""
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("roc_auc needs at least one positive and one negative score")
    wins, ties = _pair_counts(pos, neg)
    return (2 * wins + ties) / (2 * pos.size * neg.size)


def roc_curve(pos_scores, neg_scores):
    """ROC points (fpr, tpr, thresholds), thresholds descending; first point is (0, 0) at +inf."""
    pos = np.asarray(pos_scores, dtype=float).ravel()
    neg = np.asarray(neg_scores, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("roc_curve needs both positives and negatives")
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    order = np.argsort(-scores, kind="mergesort")
    scores, labels = scores[order], labels[order]
    last = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tps = np.cumsum(labels)[last]
    fps = (last + 1) - tps
    fpr = np.r_[0.0, fps / neg.size]
    tpr = np.r_[0.0, tps / pos.size]
    thresholds = np.r_[np.inf, scores[last]]
    return fpr, tpr, thresholds


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

def histogram(values, value_range=(0.0, 2.0), bins: int = 100):
    """Normalized equal-width histogram.

    Bins are right-open except the last; out-of-range values are clamped into
    the end bins.  Returns ``(probabilities, edges, n_clamped)``.
    """
    lo, hi = value_range
    if bins < 1 or not lo < hi:
        raise ValueError("need bins >= 1 and lo < hi")
    x = np.asarray(values, dtype=float).ravel()
    edges = np.linspace(lo, hi, bins + 1)
    n_clamped = int(np.count_nonzero((x < lo) | (x > hi)))
    if n_clamped:
        logger.warning("histogram: %d values outside [%g, %g] clamped", n_clamped, lo, hi)
    idx = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    total = counts.sum()
    probs = counts / total if total else counts
    return probs, edges, n_clamped


def _kl2(p, q):
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence in bits (range [0, 1])."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("histograms must share the same binning")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("negative probability mass")
    for h in (p, q):
        s = h.sum()
        if s <= 0:
            raise ValueError("empty histogram")
        if abs(s - 1.0) > 1e-9:
            logger.debug("renormalizing histogram with mass %r", s)
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)
    jsd = 0.5 * _kl2(p, m) + 0.5 * _kl2(q, m)
    return min(1.0, max(0.0, jsd))


def js_distance(p, q) -> float:
    return float(np.sqrt(js_divergence(p, q)))


# ---------------------------------------------------------------------------
# hypothesis tests
# ---------------------------------------------------------------------------

def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=float)
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def signed_rank_null_counts(ranks) -> np.ndarray:
    """Counts of sign assignments by doubled positive-rank sum.

    ``counts[s]`` is the number of the 2**n assignments whose positive ranks
    sum to ``s / 2``.  Average ranks are half-integers, so doubling keeps the
    support integral.
    """
    doubled = np.rint(2 * np.asarray(ranks, dtype=float)).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=object)
    counts[0] = 1
    top = 0
    for r in doubled:
        counts[r:top + r + 1] = counts[r:top + r + 1] + counts[:top + 1].copy()
        top += r
    return counts


def wilcoxon_signed_rank_one_sample(sample, mu0: float = 0.0, alternative: str = "two_sided",
                                    method: str = "auto") -> TestResult:
    """One-sample Wilcoxon signed-rank test of median(sample) against ``mu0``.

    Zero differences are dropped.  The statistic is the sum of ranks of the
    positive differences (average ranks for ties).  ``method`` is "exact"
    (enumeration of the conditional null), "normal" (tie-corrected, with
    continuity correction) or "auto" (exact for n <= 25).
    """
    _check_alternative(alternative)
    d = np.asarray(sample, dtype=float).ravel() - mu0
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegenerateSampleError("all differences from mu0 are zero")
    ranks = _average_ranks(np.abs(d))
    t_plus = float(ranks[d > 0].sum())
    if method == "auto":
        method = "exact" if n <= WILCOXON_EXACT_MAX_N else "normal"
    if method == "exact":
        counts = signed_rank_null_counts(ranks)
        total = 2 ** n
        t2 = int(round(2 * t_plus))
        p_le = float(sum(counts[:t2 + 1]) / total)
        p_ge = float(sum(counts[t2:]) / total)
        note = "exact enumeration"
    elif method == "normal":
        mean = n * (n + 1) / 4.0
        _, tie_sizes = np.unique(np.abs(d), return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes ** 3 - tie_sizes) / 48.0
        sd = np.sqrt(var)
        p_le = float(special.ndtr((t_plus - mean + 0.5) / sd))
        p_ge = float(special.ndtr(-(t_plus - mean - 0.5) / sd))
        note = "normal approximation, tie-corrected, continuity-corrected"
    else:
        raise ValueError(f"unknown method {method!r}")
    if alternative == "less":
        p = p_le
    elif alternative == "greater":
        p = p_ge
    else:
        p = 2 * min(p_le, p_ge)
    return TestResult(t_plus, _clip_p(p), n, alternative, note)


def t_test_one_sample(sample, mu0: float = 0.0, alternative: str = "two_sided") -> TestResult:
    """Student one-sample t-test; df = n - 1."""
    _check_alternative(alternative)
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise DegenerateSampleError("t-test needs at least two observations")
    sd = x.std(ddof=1)
    if sd == 0:
        raise DegenerateSampleError("zero sample variance")
    t = (x.mean() - mu0) / (sd / np.sqrt(n))
    df = n - 1
    if alternative == "less":
        p = special.stdtr(df, t)
    elif alternative == "greater":
        p = special.stdtr(df, -t)
    else:
        p = 2 * special.stdtr(df, -abs(t))
    return TestResult(float(t), _clip_p(p), n, alternative, f"one-sample t, df={df}")


def t_test_two_sample(a, b, alternative: str = "two_sided") -> TestResult:
    """Welch two-sample t-test (non-default alternative to the one-sample construction)."""
    _check_alternative(alternative)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 2 or b.size < 2:
        raise DegenerateSampleError("each sample needs at least two observations")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if va + vb == 0:
        raise DegenerateSampleError("zero variance in both samples")
    t = (a.mean() - b.mean()) / np.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    if alternative == "less":
        p = special.stdtr(df, t)
    elif alternative == "greater":
        p = special.stdtr(df, -t)
    else:
        p = 2 * special.stdtr(df, -abs(t))
    return TestResult(float(t), _clip_p(p), a.size + b.size, alternative,
                      f"Welch t, df={df:.2f}")


def majority_label(labels, distances=None):
    """Most frequent label; ties go to the smaller summed distance, then the smaller label."""
    labels = list(labels)
    if not labels:
        raise ValueError("no labels to vote on")
    counts = Counter(labels)
    dist_sum = Counter()
    if distances is not None:
        for lab, dd in zip(labels, distances):
            dist_sum[lab] += float(dd)
    return min(counts, key=lambda lab: (-counts[lab], dist_sum[lab], lab))
