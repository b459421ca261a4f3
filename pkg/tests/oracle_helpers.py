"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written in plain Python loops over plain
floats, with algorithms that differ from the library's vectorized ones, so
an agreement check exercises two genuinely separate routes.
"""

from __future__ import annotations

import math


def ap_oracle(labels, scores) -> float:
    """Average precision by explicit walk over tied-score groups.

    Rows are ranked by descending score; all rows sharing a score enter as
    one group and precision is read off after the whole group.
    """
    pairs = sorted(zip([float(s) for s in scores], [int(l) for l in labels]),
                   key=lambda p: -p[0])
    total_pos = sum(l for _, l in pairs)
    if total_pos == 0 or total_pos == len(pairs):
        raise ValueError("both classes required")
    ap = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    while i < len(pairs):
        j = i
        while j < len(pairs) and pairs[j][0] == pairs[i][0]:
            j += 1
        tp += sum(l for _, l in pairs[i:j])
        seen += j - i
        recall = tp / total_pos
        ap += (recall - prev_recall) * (tp / seen)
        prev_recall = recall
        i = j
    return ap


def roc_oracle(labels, scores) -> float:
    """ROC area by trapezoidal integration over tied-score curve points.

    Mathematically equal to the rank-statistic form with midranks for
    ties, but computed by a different algorithm.
    """
    pairs = sorted(zip([float(s) for s in scores], [int(l) for l in labels]),
                   key=lambda p: -p[0])
    n_pos = sum(l for _, l in pairs)
    n_neg = len(pairs) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required")
    auc = 0.0
    tp = fp = 0
    prev_tpr = prev_fpr = 0.0
    i = 0
    while i < len(pairs):
        j = i
        while j < len(pairs) and pairs[j][0] == pairs[i][0]:
            j += 1
        dpos = sum(l for _, l in pairs[i:j])
        tp += dpos
        fp += (j - i) - dpos
        tpr = tp / n_pos
        fpr = fp / n_neg
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0
        prev_tpr, prev_fpr = tpr, fpr
        i = j
    return auc


def percentile_oracle(values, q: float) -> float:
    """Sort-and-interpolate percentile at fractional rank q/100 * (n-1)."""
    v = sorted(float(x) for x in values)
    if not v:
        raise ValueError("empty input")
    pos = (q / 100.0) * (len(v) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def hw_oracle(value: int) -> int:
    """Hamming weight by counting '1' characters of the binary expansion."""
    return bin(value).count("1")


def relative_error(a, b) -> float:
    """Norm-based relative difference of two flat float sequences."""
    num = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    den = max(math.sqrt(sum(x * x for x in a)),
              math.sqrt(sum(y * y for y in b)), 1e-12)
    return num / den


def random_scored_instance(rng, n_max: int = 20, tie_fraction: float = 0.5):
    """Labels and scores with both classes present and frequent score ties.

    Roughly ``tie_fraction`` of the instances draw scores from a small
    integer grid to force ties; the rest are continuous.
    """
    n = int(rng.integers(2, n_max + 1))
    labels = rng.integers(0, 2, size=n)
    labels[int(rng.integers(0, n))] = 1
    flip = int(rng.integers(0, n))
    while labels.sum() == n:
        labels[flip] = 0
    if labels.sum() == 0:
        labels[flip] = 1
    if rng.random() < tie_fraction:
        scores = rng.integers(0, 4, size=n).astype(float)
    else:
        scores = rng.normal(size=n)
    return labels, scores
