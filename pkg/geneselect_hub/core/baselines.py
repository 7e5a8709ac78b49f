"""Базовые классификаторы для сравнения: гауссовский наивный Байес и kNN.

SVM не реализован, в отчётах он только строкой с цифрами из статьи.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from geneselect_hub.core.dataset import CLASS_ORDER, ExpressionDataset, FeatureMask, Label
from geneselect_hub.core.exceptions import ConfigError, DimensionError

VAR_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class GnbModel:
    """Средние и дисперсии по (класс, ген), порядок классов как в CLASS_ORDER."""

    means: np.ndarray  # (2, n_genes)
    variances: np.ndarray  # (2, n_genes)
    priors: np.ndarray  # (2,)

    @property
    def n_genes(self) -> int:
        return int(self.means.shape[1])


@dataclass(frozen=True, eq=False)
class KnnModel:
    X: np.ndarray
    labels: tuple[Label, ...]
    k: int = 3

    def __post_init__(self) -> None:
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError(f"k должно быть нечётным >= 1, получили {self.k}", "knn_k")
        if self.k > self.X.shape[0]:
            raise ConfigError(f"k={self.k} больше числа образцов {self.X.shape[0]}", "knn_k")


def _require_both_classes(ds: ExpressionDataset) -> np.ndarray:
    codes = ds.label_codes()
    if len(set(codes.tolist())) < len(CLASS_ORDER):
        raise ConfigError("для обучения нужны оба класса", "labels")
    return codes


def gnb_fit(ds: ExpressionDataset) -> GnbModel:
    """Выборочные среднее и дисперсия (делитель n), дисперсия не ниже VAR_FLOOR."""
    codes = _require_both_classes(ds)
    means, variances, priors = [], [], []
    for c in range(len(CLASS_ORDER)):
        rows = ds.values[codes == c]
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), VAR_FLOOR))
        priors.append(rows.shape[0] / ds.n_samples)
    return GnbModel(means=np.array(means), variances=np.array(variances), priors=np.array(priors))


def gnb_log_scores(model: GnbModel, x: Sequence[float] | np.ndarray) -> np.ndarray:
    """log prior + сумма логарифмов гауссовых плотностей, по классу."""
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != model.n_genes:
        raise DimensionError(model.n_genes, vec.shape[0], "вход GNB")
    log_density = -0.5 * np.log(2.0 * np.pi * model.variances) - (vec - model.means) ** 2 / (
        2.0 * model.variances
    )
    return np.log(model.priors) + log_density.sum(axis=1)


def gnb_predict(model: GnbModel, x: Sequence[float] | np.ndarray) -> Label:
    scores = gnb_log_scores(model, x)
    return Label.TUMOR if scores[0] >= scores[1] else Label.NORMAL


def knn_fit(ds: ExpressionDataset, k: int = 3) -> KnnModel:
    return KnnModel(X=ds.values.copy(), labels=ds.require_labels(), k=k)


def knn_predict(model: KnnModel, x: Sequence[float] | np.ndarray) -> Label:
    """Евклидово расстояние, голосование k ближайших; ничьи по расстоянию -> меньший индекс."""
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != model.X.shape[1]:
        raise DimensionError(model.X.shape[1], vec.shape[0], "вход kNN")
    distances = np.sqrt(((model.X - vec) ** 2).sum(axis=1))
    nearest = np.argsort(distances, kind="stable")[: model.k]
    tumor_votes = sum(1 for i in nearest if model.labels[i] is Label.TUMOR)
    return Label.TUMOR if tumor_votes * 2 > model.k else Label.NORMAL


def top_genes_by_separation(ds: ExpressionDataset, n: int = 3) -> FeatureMask:
    """n генов с наибольшей |mean_Tumor - mean_Normal|, при равенстве меньший индекс."""
    codes = _require_both_classes(ds)
    if not 1 <= n <= ds.n_genes:
        raise ConfigError(f"n должно быть в 1..{ds.n_genes}, получили {n}", "top_n")
    gap = np.abs(ds.values[codes == 0].mean(axis=0) - ds.values[codes == 1].mean(axis=0))
    order = np.lexsort((np.arange(ds.n_genes), -gap))
    return FeatureMask.from_indices(order[:n].tolist(), ds.n_genes)
