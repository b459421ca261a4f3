"""Binary detection metrics computed natively on numpy arrays.

PR-AUC is average precision with tied scores entering as one group; ROC-AUC
is the Mann-Whitney statistic with midrank tie correction. Both are exact
(no curve interpolation) so results are reproducible to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError


def _validate(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.ndim != 1 or scores.ndim != 1:
        raise MetricError("labels and scores must be 1-D")
    if labels.shape[0] != scores.shape[0]:
        raise MetricError("labels and scores must have equal length")
    if labels.shape[0] == 0:
        raise MetricError("cannot score an empty set")
    if not np.isin(labels, (0, 1)).all():
        raise MetricError("labels must be binary 0/1")
    if not np.isfinite(scores).all():
        raise MetricError("scores must be finite")
    return labels, scores


def pr_auc(labels, scores) -> float:
    """Average precision: sum of (recall step) * precision over score groups.

    Rows are ranked by descending score; all rows sharing a score enter the
    ranking together, and precision is evaluated after the whole group.
    Raises MetricError if only one class is present.
    """
    labels, scores = _validate(labels, scores)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.shape[0]:
        raise MetricError("pr_auc needs both classes present")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # Indices of the last element of each tied-score group.
    group_end = np.flatnonzero(np.diff(s) != 0.0)
    group_end = np.append(group_end, s.shape[0] - 1)

    cum_tp = np.cumsum(y)[group_end].astype(np.float64)
    ranks = (group_end + 1).astype(np.float64)  # rows ranked at group end
    precision = cum_tp / ranks
    recall = cum_tp / n_pos
    recall_step = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(recall_step * precision))


def roc_auc(labels, scores) -> float:
    """Mann-Whitney ROC-AUC with midranks for tied scores."""
    labels, scores = _validate(labels, scores)
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("roc_auc needs both classes present")

    order = np.argsort(scores, kind="stable")
    s = scores[order]
    ranks = np.empty(s.shape[0], dtype=np.float64)
    i = 0
    while i < s.shape[0]:
        j = i
        while j + 1 < s.shape[0] and s[j + 1] == s[i]:
            j += 1
        ranks[i:j + 1] = 0.5 * ((i + 1) + (j + 1))  # midrank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[labels[order] == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class ConfusionCounts:
    """2x2 confusion counts with the derived rates used in reports."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def false_positive_rate(self) -> float:
        denom = self.fp + self.tn
        return self.fp / denom if denom else 0.0

    @property
    def missed_attacks(self) -> int:
        """Attack rows scored below threshold (the false negatives)."""
        return self.fn

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "false_positive_rate": self.false_positive_rate,
            "missed_attacks": self.missed_attacks,
        }


def confusion_at_threshold(labels, scores, threshold: float = 0.5) -> ConfusionCounts:
    """Count outcomes with rows scoring >= threshold predicted malicious."""
    labels, scores = _validate(labels, scores)
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


@dataclass(frozen=True)
class ScoreReport:
    """Threshold-free AUCs plus the confusion at one operating threshold."""

    pr_auc: float
    roc_auc: float
    threshold: float
    confusion: ConfusionCounts

    def to_dict(self) -> dict:
        return {
            "pr_auc": self.pr_auc,
            "roc_auc": self.roc_auc,
            "threshold": self.threshold,
            "n_samples": self.confusion.total,
            "confusion": self.confusion.to_dict(),
        }


def score_report(labels, scores, threshold: float = 0.5) -> ScoreReport:
    return ScoreReport(
        pr_auc=pr_auc(labels, scores),
        roc_auc=roc_auc(labels, scores),
        threshold=threshold,
        confusion=confusion_at_threshold(labels, scores, threshold),
    )
