"""Permutation feature importance over origin columns.

One-hot groups are permuted as a block so a categorical column's encoding
stays valid. Each (column, repeat) pair draws its permutation from a
substream keyed by the column NAME rather than its position, so reordering
columns does not change any column's reported drop.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .data import FeatureTable
from .errors import MetricError
from .metrics import pr_auc, roc_auc

_METRICS = {"pr_auc": pr_auc, "roc_auc": roc_auc}


def binary_scores(model, X: np.ndarray) -> np.ndarray:
    """Class-1 scores from any fitted model, 1-D regardless of model kind."""
    proba = model.predict_proba(X)
    return proba[:, 1] if proba.ndim == 2 else proba


def _name_stream(seed: int, name: str, repeat: int) -> np.random.Generator:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    name_key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng([seed, name_key, repeat])


@dataclass(frozen=True)
class ImportanceResult:
    baseline: float
    metric: str
    names: tuple[str, ...]
    drops: np.ndarray
    stds: np.ndarray

    def top_k(self, k: int) -> list[tuple[str, float]]:
        """The k largest drops; equal drops order by column name."""
        order = sorted(range(len(self.names)), key=lambda i: (-self.drops[i], self.names[i]))
        return [(self.names[i], float(self.drops[i])) for i in order[:k]]

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "metric": self.metric,
            "columns": [
                {"name": n, "drop": float(d), "std": float(s)}
                for n, d, s in zip(self.names, self.drops, self.stds)
            ],
        }


def permutation_importance(
    model,
    table: FeatureTable,
    metric: str = "pr_auc",
    repeats: int = 10,
    seed: int = 0,
) -> ImportanceResult:
    """Metric drop per origin column when its values are shuffled.

    For each column the drop is baseline minus the mean metric over
    ``repeats`` independent shuffles of that column (a one-hot group moves
    as one block), with the std of the per-repeat drops alongside. A
    constant column reports a drop of exactly zero.
    """
    if metric not in _METRICS:
        raise MetricError(f"unknown importance metric {metric!r}")
    if repeats < 1:
        raise MetricError("repeats must be >= 1")
    metric_fn = _METRICS[metric]
    X = table.rows
    y = table.labels
    baseline = metric_fn(y, binary_scores(model, X))

    names: list[str] = []
    drops = np.zeros(len(table.schema.columns), dtype=np.float64)
    stds = np.zeros(len(table.schema.columns), dtype=np.float64)
    start = 0
    for ci, col in enumerate(table.schema.columns):
        width = 1 if col.kind == "numeric" else len(col.categories)
        block = slice(start, start + width)
        start += width
        names.append(col.name)
        # Per-repeat drops so a constant column stays at exactly 0.0 mean/std.
        per_repeat = np.zeros(repeats, dtype=np.float64)
        for r in range(repeats):
            rng = _name_stream(seed, col.name, r)
            perm = rng.permutation(X.shape[0])
            shuffled = X.copy()
            shuffled[:, block] = X[perm, block]
            per_repeat[r] = baseline - metric_fn(y, binary_scores(model, shuffled))
        drops[ci] = per_repeat.mean()
        stds[ci] = per_repeat.std()
    return ImportanceResult(baseline=baseline, metric=metric,
                            names=tuple(names), drops=drops, stds=stds)
