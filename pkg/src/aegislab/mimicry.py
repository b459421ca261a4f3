"""Mimicry perturbation: clip attack rows into the benign feature envelope.

The envelope for a feature is the closed interval between the 5th and 95th
percentiles of benign traffic. Clipping only touches malicious rows, never
labels, and is idempotent. A sweep over k re-clips the top-k ranked
features and rescores, with k=0 reported first as the unperturbed
baseline.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .data import FeatureTable
from .errors import MimicryError
from .importance import binary_scores
from .metrics import ScoreReport, score_report

LOWER_PERCENTILE = 5.0
UPPER_PERCENTILE = 95.0


def percentile(values, q: float) -> float:
    """Linear-interpolation percentile at rank q/100 * (n - 1)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] == 0:
        raise MimicryError("percentile needs a non-empty 1-D array")
    if not (0.0 <= q <= 100.0):
        raise MimicryError(f"percentile q must be in [0, 100], got {q}")
    v = np.sort(values)
    pos = (q / 100.0) * (v.shape[0] - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return float(v[lo] + (v[hi] - v[lo]) * frac)


@dataclass(frozen=True)
class MimicrySpec:
    """Per-feature benign clipping bounds, keyed by origin column name."""

    features: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": n, "lower": lo, "upper": hi}
                for n, lo, hi in zip(self.features, self.lower, self.upper)
            ]
        }


def fit_mimicry_spec(table: FeatureTable, features: Sequence[str]) -> MimicrySpec:
    """Benign 5th/95th percentile bounds for the named numeric columns.

    Percentiles come from the benign rows of ``table``; at least two are
    required. Features must be numeric origin columns.
    """
    benign = table.benign()
    if benign.n < 2:
        raise MimicryError("need at least 2 benign rows to fit an envelope")
    by_name = {c.name: c for c in table.schema.columns}
    lower: list[float] = []
    upper: list[float] = []
    for name in features:
        col = by_name.get(name)
        if col is None:
            raise MimicryError(f"unknown feature {name!r}")
        if col.kind != "numeric":
            raise MimicryError(f"cannot clip categorical feature {name!r}")
        values = benign.column(name)
        lower.append(percentile(values, LOWER_PERCENTILE))
        upper.append(percentile(values, UPPER_PERCENTILE))
    return MimicrySpec(features=tuple(features), lower=tuple(lower), upper=tuple(upper))


def apply_mimicry(table: FeatureTable, spec: MimicrySpec) -> FeatureTable:
    """Clip the selected features of malicious rows into the benign envelope.

    Returns a new table; benign rows, labels and row ids are untouched.
    """
    rows = table.rows.copy()
    attack = table.labels == 1
    for name, lo, hi in zip(spec.features, spec.lower, spec.upper):
        j = table.column_index(name)
        rows[attack, j] = np.clip(rows[attack, j], lo, hi)
    return table.with_rows(rows)


@dataclass(frozen=True)
class SweepPoint:
    k: int
    features: tuple[str, ...]
    report: ScoreReport

    def to_dict(self) -> dict:
        return {"k": self.k, "features": list(self.features),
                "report": self.report.to_dict()}


def mimicry_sweep(
    model,
    reference: FeatureTable,
    target: FeatureTable,
    ranking: Sequence[str],
    ks: Sequence[int],
    threshold: float = 0.5,
) -> list[SweepPoint]:
    """Score the model on ``target`` under increasingly aggressive mimicry.

    ``ranking`` lists numeric features strongest-first (typically from
    permutation importance); at each k the top-k are clipped to the benign
    envelope of ``reference``. k=0 always leads the sweep as the untouched
    baseline.
    """
    ks = sorted(set(int(k) for k in ks) | {0})
    if ks[0] < 0:
        raise MimicryError("k must be non-negative")
    if max(ks) > len(ranking):
        raise MimicryError(f"k={max(ks)} exceeds the {len(ranking)} ranked features")
    points: list[SweepPoint] = []
    for k in ks:
        features = tuple(ranking[:k])
        if k == 0:
            perturbed = target
        else:
            spec = fit_mimicry_spec(reference, features)
            perturbed = apply_mimicry(target, spec)
        report = score_report(perturbed.labels, binary_scores(model, perturbed.rows),
                              threshold)
        points.append(SweepPoint(k=k, features=features, report=report))
    return points
