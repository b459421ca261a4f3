"""Shared fixtures: a small synthetic flow corpus with a fitted detector."""

from __future__ import annotations

from dataclasses import dataclass

import pytest

from aegislab.corpus import write_corpus
from aegislab.data import FeatureTable, ScalerParams, SplitSpec, load_nslkdd, split, standardize
from aegislab.learners import ForestConfig, RandomForest


@dataclass(frozen=True)
class SmallCorpus:
    train_path: object
    test_path: object
    table: FeatureTable
    fit: FeatureTable
    holdout: FeatureTable
    scaler: ScalerParams
    model: RandomForest


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory) -> SmallCorpus:
    out = tmp_path_factory.mktemp("small_corpus")
    train_path, test_path = write_corpus(out, n_train=600, n_test=300, seed=0)
    table = load_nslkdd(train_path)
    fit_part, holdout = split(table, SplitSpec("stratified-random", fraction=0.7, seed=0))
    fit_std, (holdout_std,), scaler = standardize(fit_part, [holdout])
    model = RandomForest(ForestConfig(n_trees=30, seed=0)).fit(fit_std.rows, fit_std.labels)
    return SmallCorpus(train_path=train_path, test_path=test_path, table=table,
                       fit=fit_std, holdout=holdout_std, scaler=scaler, model=model)
