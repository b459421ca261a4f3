"""Detection-metric checks against independent reference implementations."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aegislab.errors import MetricError
from aegislab.metrics import confusion_at_threshold, pr_auc, roc_auc, score_report
from oracle_helpers import ap_oracle, random_scored_instance, roc_oracle

EXACT = 1e-12


class TestKnownValues:
    def test_perfect_separation_scores_one(self):
        labels = [0, 0, 1, 1]
        scores = [0.1, 0.2, 0.8, 0.9]
        assert pr_auc(labels, scores) == 1.0
        assert roc_auc(labels, scores) == 1.0

    def test_single_positive_ranked_last(self):
        labels = [1, 0, 0, 0]
        scores = [0.1, 0.2, 0.3, 0.4]
        assert pr_auc(labels, scores) == pytest.approx(0.25, abs=EXACT)

    def test_constant_scores(self):
        labels = np.array([1, 0, 0, 1, 0])
        scores = np.full(5, 0.7)
        # One tie group: precision equals prevalence, ranking is uninformative.
        assert pr_auc(labels, scores) == pytest.approx(2 / 5, abs=EXACT)
        assert roc_auc(labels, scores) == pytest.approx(0.5, abs=EXACT)

    def test_hand_computed_tie_group(self):
        # Groups: {0.9: 1 pos} then {0.8: 1 pos, 1 neg}.
        labels = [1, 0, 1, 0, 0]
        scores = [0.9, 0.8, 0.8, 0.5, 0.3]
        assert pr_auc(labels, scores) == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3), abs=EXACT)
        # Midranks: positives at ranks 5 and 3.5 of 5; U = 8.5 - 3 = 5.5.
        assert roc_auc(labels, scores) == pytest.approx(5.5 / 6, abs=EXACT)


class TestOracleAgreement:
    def test_random_instances_match_oracles(self):
        for i in range(200):
            rng = np.random.default_rng([42, i])
            labels, scores = random_scored_instance(rng)
            assert abs(pr_auc(labels, scores) - ap_oracle(labels, scores)) <= EXACT
            assert abs(roc_auc(labels, scores) - roc_oracle(labels, scores)) <= EXACT

    def test_fifteen_rows_with_heavy_ties(self):
        rng = np.random.default_rng([7, 15])
        labels = rng.integers(0, 2, size=15)
        labels[0], labels[1] = 1, 0
        scores = rng.integers(0, 3, size=15).astype(float)
        assert abs(pr_auc(labels, scores) - ap_oracle(labels, scores)) <= EXACT
        assert abs(roc_auc(labels, scores) - roc_oracle(labels, scores)) <= EXACT


class TestProperties:
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(-5, 5)),
                    min_size=2, max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_monotone_transform_invariance(self, rows):
        labels = [l for l, _ in rows]
        if sum(labels) in (0, len(labels)):
            labels[0] = 1 - labels[0]
        scores = np.array([s for _, s in rows], dtype=float)
        # Strictly increasing maps on small integers are exact in floats,
        # so the tie pattern is preserved bit for bit.
        for transform in (lambda s: 2.0 * s + 1.0, lambda s: s ** 3):
            assert pr_auc(labels, transform(scores)) == pr_auc(labels, scores)
            assert roc_auc(labels, transform(scores)) == roc_auc(labels, scores)

    def test_random_scores_concentrate_at_prevalence(self):
        labels = np.array([1] * 60 + [0] * 140)
        prevalence = 60 / 200
        ap_values = []
        roc_values = []
        for seed in range(100):
            scores = np.random.default_rng([99, seed]).random(200)
            ap_values.append(pr_auc(labels, scores))
            roc_values.append(roc_auc(labels, scores))
        assert abs(np.mean(ap_values) - prevalence) < 0.05
        assert abs(np.mean(roc_values) - 0.5) < 0.05

    @given(st.lists(st.tuples(st.integers(0, 1),
                              st.floats(-5, 5, allow_nan=False)),
                    min_size=1, max_size=40),
           st.floats(-6, 6, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_confusion_counts_partition_the_rows(self, rows, threshold):
        labels = np.array([l for l, _ in rows])
        scores = np.array([s for _, s in rows])
        c = confusion_at_threshold(labels, scores, threshold)
        assert min(c.tp, c.fp, c.tn, c.fn) >= 0
        assert c.total == len(rows)
        assert c.missed_attacks == c.fn


class TestConfusion:
    def test_counts_and_rates(self):
        labels = [1, 1, 0, 0]
        scores = [0.9, 0.3, 0.6, 0.1]
        c = confusion_at_threshold(labels, scores, 0.5)
        assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 1)
        assert c.accuracy == 0.5
        assert c.precision == 0.5
        assert c.recall == 0.5
        assert c.false_positive_rate == 0.5
        assert c.missed_attacks == 1

    def test_score_equal_to_threshold_is_predicted_positive(self):
        c = confusion_at_threshold([1], [0.5], 0.5)
        assert c.tp == 1 and c.fn == 0

    def test_report_serialization_shape(self):
        rep = score_report([1, 0, 1, 0], [0.9, 0.1, 0.8, 0.2], threshold=0.5)
        d = rep.to_dict()
        assert d["n_samples"] == 4
        assert set(d) == {"pr_auc", "roc_auc", "threshold", "n_samples", "confusion"}
        assert d["confusion"]["recall"] == 1.0


class TestErrors:
    def test_single_class_rejected(self):
        with pytest.raises(MetricError):
            pr_auc([1, 1, 1], [0.1, 0.2, 0.3])
        with pytest.raises(MetricError):
            pr_auc([0, 0], [0.1, 0.2])
        with pytest.raises(MetricError):
            roc_auc([1, 1], [0.5, 0.6])

    def test_empty_and_mismatched_inputs_rejected(self):
        with pytest.raises(MetricError):
            pr_auc([], [])
        with pytest.raises(MetricError):
            roc_auc([1, 0], [0.5])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(MetricError):
            pr_auc([1, 0], [np.nan, 0.5])
        with pytest.raises(MetricError):
            roc_auc([1, 0], [np.inf, 0.5])

    def test_non_binary_labels_rejected(self):
        with pytest.raises(MetricError):
            pr_auc([2, 0], [0.5, 0.1])
