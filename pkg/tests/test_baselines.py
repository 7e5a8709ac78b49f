from __future__ import annotations

import math

import numpy as np
import pytest

from geneselect_hub.core.baselines import (
    VAR_FLOOR,
    GnbModel,
    KnnModel,
    gnb_fit,
    gnb_log_scores,
    gnb_predict,
    knn_fit,
    knn_predict,
    top_genes_by_separation,
)
from geneselect_hub.core.dataset import ExpressionDataset, Label
from geneselect_hub.core.exceptions import ConfigError, DimensionError

T, N = Label.TUMOR, Label.NORMAL


def _ds(values, labels) -> ExpressionDataset:
    return ExpressionDataset(values=np.asarray(values, dtype=float), labels=tuple(labels))


# --- GNB ---

def test_gnb_fit_statistics():
    model = gnb_fit(_ds([[1.0, 5.0], [3.0, 5.0], [0.0, 5.0], [4.0, 5.0]], [T, T, N, N]))
    assert model.means[0].tolist() == [2.0, 5.0]
    assert model.variances[0, 0] == 1.0
    assert model.variances[0, 1] == VAR_FLOOR
    assert model.priors.tolist() == [0.5, 0.5]
    assert np.all(np.isfinite(gnb_log_scores(model, [2.0, 5.0])))


def test_gnb_single_class_is_an_error():
    with pytest.raises(ConfigError):
        gnb_fit(_ds([[1.0], [2.0]], [T, T]))


def test_gnb_likelihood_and_prior_dominance():
    equal = GnbModel(means=np.array([[0.0], [10.0]]), variances=np.array([[1.0], [1.0]]), priors=np.array([0.5, 0.5]))
    assert gnb_predict(equal, [0.0]) is T
    assert gnb_predict(equal, [10.0]) is N
    assert gnb_predict(equal, [5.0]) is T  # точная ничья
    skewed = GnbModel(means=equal.means, variances=equal.variances, priors=np.array([0.1, 0.9]))
    assert gnb_predict(skewed, [5.0]) is N


def test_gnb_matches_brute_force_density():
    rng = np.random.default_rng(0)
    values = rng.normal(size=(12, 3))
    labels = [T] * 6 + [N] * 6
    model = gnb_fit(_ds(values, labels))
    for x in rng.normal(size=(20, 3)):
        for c in range(2):
            rows = values[6 * c : 6 * (c + 1)]
            expected = math.log(0.5)
            for g in range(3):
                mu = sum(rows[:, g]) / 6
                var = sum((v - mu) ** 2 for v in rows[:, g]) / 6
                expected += math.log(math.exp(-((x[g] - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var))
            assert gnb_log_scores(model, x)[c] == pytest.approx(expected, abs=1e-9)


def test_gnb_is_scale_consistent():
    rng = np.random.default_rng(1)
    train = rng.normal(size=(10, 3))
    test = rng.normal(size=(15, 3))
    labels = [T, N] * 5
    base = gnb_fit(_ds(train, labels))
    factor = np.array([1.0, 7.5, 1.0])
    scaled = gnb_fit(_ds(train * factor, labels))
    assert [gnb_predict(base, x) for x in test] == [gnb_predict(scaled, x * factor) for x in test]


def test_gnb_dimension_mismatch():
    model = gnb_fit(_ds([[0.0], [1.0]], [T, N]))
    with pytest.raises(DimensionError):
        gnb_predict(model, [0.0, 1.0])


# --- kNN ---

def test_knn_examples():
    ds = _ds([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]], [T, T, T, N, N])
    assert knn_predict(knn_fit(ds, k=1), [3.0, 3.0]) is N
    assert knn_predict(knn_fit(ds, k=5), [4.0, 4.0]) is T


def test_knn_k1_training_accuracy():
    rng = np.random.default_rng(2)
    values = rng.normal(size=(20, 4))
    labels = [T if rng.random() < 0.5 else N for _ in range(20)]
    model = knn_fit(_ds(values, labels), k=1)
    assert [knn_predict(model, x) for x in values] == labels


def test_knn_matches_brute_force_sort():
    rng = np.random.default_rng(3)
    values = rng.normal(size=(15, 2))
    labels = [T if i % 3 else N for i in range(15)]
    model = knn_fit(_ds(values, labels), k=3)
    for q in rng.normal(size=(50, 2)):
        dists = sorted((math.dist(q, values[i]), i) for i in range(15))
        votes = [labels[i] for _, i in dists[:3]]
        expected = T if votes.count(T) >= 2 else N
        assert knn_predict(model, q) is expected


def test_knn_config_errors():
    with pytest.raises(ConfigError):
        KnnModel(X=np.zeros((4, 1)), labels=(T, T, N, N), k=2)
    with pytest.raises(ConfigError):
        KnnModel(X=np.zeros((2, 1)), labels=(T, N), k=3)
    with pytest.raises(DimensionError):
        knn_predict(KnnModel(X=np.zeros((3, 2)), labels=(T, N, T), k=1), [0.0])


def test_top_genes_by_separation():
    ds = _ds(
        [[0.0, 5.0, 1.0, 9.0], [0.0, 5.0, 1.0, 9.0], [3.0, 5.0, 2.0, 0.0], [3.0, 5.0, 2.0, 0.0]],
        [T, T, N, N],
    )
    assert top_genes_by_separation(ds, n=2).indices.tolist() == [0, 3]
    # 1 и 2: зазор 0 и 1, берётся ген 2
    assert top_genes_by_separation(ds, n=3).indices.tolist() == [0, 2, 3]
