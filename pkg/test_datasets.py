#!/usr/bin/env python3
"""
Tests for table ingestion, cleaning and PCA preprocessing
"""

import logging
import math
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from vqcfourier.backend.datasets import (
    clean_table,
    drop_constant_columns,
    load_table,
    pca,
    prepare_dataset,
    rescale_features,
    signed_labels,
    standardize,
    summarize_table,
    train_test_split,
)
from vqcfourier.backend.rff import Dataset
from vqcfourier.shared.errors import ConfigError, ParseError, ShapeError


def test_load_csv_from_bytes_and_path(tmp_path):
    content = b"a,b,y\n1,2,3\n4,5,6\n"
    frame = load_table(content, "table.csv")
    assert list(frame.columns) == ["a", "b", "y"]
    path = tmp_path / "table.csv"
    path.write_bytes(content)
    assert load_table(path).shape == (2, 3)


def test_load_xlsx(tmp_path):
    path = tmp_path / "table.xlsx"
    pd.DataFrame({"a": [1.0, 2.0], "y": [0.5, 0.25]}).to_excel(path, index=False)
    assert load_table(path)["y"].tolist() == [0.5, 0.25]


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_table(tmp_path / "missing.csv")
    with pytest.raises(ConfigError):
        load_table(b"a,b\n1,2\n", "table.txt")
    with pytest.raises(ParseError):
        load_table(b"", "empty.csv")


def test_malformed_csv_reports_row():
    with pytest.raises(ParseError) as info:
        load_table(b"a,b\n1,2\n3,4,5\n", "bad.csv")
    assert info.value.row == 3


def test_non_numeric_cell_reports_row_and_column():
    frame = load_table(b"a,b\n1,2\nx,4\n", "bad.csv")
    with pytest.raises(ParseError) as info:
        clean_table(frame)
    assert info.value.row == 3
    assert info.value.column == "a"
    assert "row 3" in str(info.value)


def test_clean_table(caplog):
    frame = load_table(b"a,b\n1,2\n,4\n3,6\n1,2\n,\n", "gaps.csv")
    with caplog.at_level(logging.WARNING):
        cleaned = clean_table(frame)
    assert len(cleaned) == 3
    assert cleaned["a"].tolist() == [1.0, 2.0, 3.0]
    assert "median" in caplog.text
    summary = summarize_table(cleaned)
    assert summary["rows"] == 3 and summary["numeric_columns"] == ["a", "b"]


def test_drop_constant_columns(caplog):
    X = np.array([[1.0, 5.0, 0.0], [2.0, 5.0, 1.0], [3.0, 5.0, 0.0]])
    with caplog.at_level(logging.WARNING):
        kept, names = drop_constant_columns(X, ["u", "v", "w"])
    assert names == ["u", "w"]
    assert kept.shape == (3, 2)
    assert "'v'" in caplog.text


def test_standardize():
    X = standardize(np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 60.0]]))
    assert np.allclose(X.mean(axis=0), 0.0)
    assert np.allclose(X.std(axis=0), 1.0)
    with pytest.raises(ShapeError):
        standardize(np.array([[1.0, 2.0], [1.0, 3.0]]))


def test_pca_matches_covariance_oracle():
    rng = np.random.default_rng(0)
    latent = rng.normal(size=(500, 2)) * [3.0, 1.0]
    mixing = np.array([[1.0, 0.5, 0.0, 0.2], [0.0, 0.3, 1.0, -0.4]])
    X = latent @ mixing + 0.01 * rng.normal(size=(500, 4))
    scores, components, explained = pca(X, 2)

    oracle_values, oracle_vectors = np.linalg.eigh(np.cov(X, rowvar=False))
    oracle_vectors = oracle_vectors[:, ::-1][:, :2]
    assert np.allclose(explained, oracle_values[::-1][:2])
    for k in range(2):
        assert min(np.linalg.norm(components[:, k] - s * oracle_vectors[:, k]) for s in (1, -1)) < 1e-8
    assert explained[0] > explained[1]
    assert np.allclose(scores, (X - X.mean(axis=0)) @ components)


def test_pca_component_count_checked():
    with pytest.raises(ConfigError):
        pca(np.ones((4, 2)), 3)


def test_rescale_features():
    X = rescale_features(np.array([[0.0, -2.0], [5.0, 0.0], [10.0, 6.0]]))
    assert np.allclose(X.min(axis=0), -math.pi)
    assert np.allclose(X.max(axis=0), math.pi)
    assert X[1, 0] == pytest.approx(0.0)


def test_rescale_constant_column_goes_to_midpoint():
    X = rescale_features(np.array([[1.0, 4.0], [2.0, 4.0], [3.0, 4.0]]), low=0.0, high=2.0)
    assert np.allclose(X[:, 0], [0.0, 1.0, 2.0])
    assert np.allclose(X[:, 1], 1.0)
    with pytest.raises(ConfigError):
        rescale_features(X, low=1.0, high=1.0)


def test_signed_labels():
    assert signed_labels(np.array([0, 1, 1, 0])).tolist() == [-1.0, 1.0, 1.0, -1.0]
    with pytest.raises(ConfigError):
        signed_labels(np.array([0, 1, 2]))


def test_train_test_split():
    data = Dataset(np.arange(20.0), np.arange(20.0))
    train, test = train_test_split(data, 0.9, seed=3)
    assert (train.M, test.M) == (18, 2)
    assert sorted(np.concatenate([train.targets, test.targets]).tolist()) == list(np.arange(20.0))
    again, _ = train_test_split(data, 0.9, seed=3)
    assert np.array_equal(train.inputs, again.inputs)


def test_split_depends_on_seed_and_keeps_row_order():
    data = Dataset(np.arange(100.0), np.arange(100.0))
    first, _ = train_test_split(data, 0.5, seed=0)
    second, _ = train_test_split(data, 0.5, seed=1)
    assert first.M == second.M == 50
    assert not np.array_equal(first.targets, second.targets)
    assert np.all(np.diff(first.targets) > 0)


def test_prepare_dataset_pipeline():
    rng = np.random.default_rng(1)
    frame = pd.DataFrame(rng.normal(size=(40, 4)), columns=["a", "b", "c", "d"])
    frame["const"] = 1.0
    frame["label"] = (frame["a"] > 0).astype(int)
    data = prepare_dataset(frame, n_components=2, classification=True)
    assert data.d == 2
    assert np.allclose(data.inputs.min(axis=0), -math.pi)
    assert np.allclose(data.inputs.max(axis=0), math.pi)
    assert set(np.unique(data.targets)) == {-1.0, 1.0}
