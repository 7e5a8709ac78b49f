"""Данные экспрессии: загрузка, масштабирование, маски генов и сплиты.

Матрица внутри всегда хранится образцы × гены (строки = образцы), потому что
классификаторы едят строки. Публичный colon-файл лежит гены × образцы, для
этого есть флаг ориентации.
"""

from __future__ import annotations

import csv
import hashlib
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from geneselect_hub.core.exceptions import (
    AlignmentError,
    ConfigError,
    DegenerateMaskError,
    DimensionError,
    EmptyInputError,
    FormatError,
    ParseError,
    StateError,
    StratificationWarning,
)
from geneselect_hub.core.utils import round_half_up
from geneselect_hub.infra.storage import write_text
from geneselect_hub.logging_config import get_logger


class Label(str, Enum):
    """Класс образца. Tumor - положительный класс."""

    TUMOR = "Tumor"
    NORMAL = "Normal"

    @classmethod
    def from_token(cls, token: str) -> Label:
        value = token.strip().lower()
        for label in cls:
            if label.value.lower() == value:
                return label
        raise ValueError(token)


# порядок классов везде одинаковый: первый выход MLP = Tumor
CLASS_ORDER: tuple[Label, Label] = (Label.TUMOR, Label.NORMAL)


class Orientation(str, Enum):
    SAMPLES_BY_GENES = "samples-by-genes"
    GENES_BY_SAMPLES = "genes-by-samples"


class LabelConvention(str, Enum):
    SIGN = "sign"
    TOKEN = "token"


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ExpressionDataset:
    """Матрица образцы × гены + метки + имена генов. После создания не меняется."""

    values: np.ndarray
    labels: tuple[Label, ...] | None = None
    gene_ids: tuple[str, ...] = ()
    scaled: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise FormatError(f"ожидали 2D матрицу, получили ndim={values.ndim}")
        if not np.all(np.isfinite(values)):
            raise FormatError("в матрице есть NaN/inf")
        object.__setattr__(self, "values", _readonly(values))

        n_samples, n_genes = values.shape
        gene_ids = tuple(self.gene_ids) or tuple(f"g{i}" for i in range(n_genes))
        if len(gene_ids) != n_genes:
            raise DimensionError(n_genes, len(gene_ids), "gene_ids")
        object.__setattr__(self, "gene_ids", gene_ids)

        if self.labels is not None:
            labels = tuple(Label(lab) for lab in self.labels)
            if len(labels) != n_samples:
                raise AlignmentError(n_samples, len(labels))
            object.__setattr__(self, "labels", labels)

    # --- свойства ---
    @property
    def n_samples(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_genes(self) -> int:
        return int(self.values.shape[1])

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def label_codes(self) -> np.ndarray:
        """0 = Tumor, 1 = Normal (индекс выхода сети)."""
        labels = self.require_labels()
        return np.array([CLASS_ORDER.index(lab) for lab in labels], dtype=np.int64)

    def require_labels(self) -> tuple[Label, ...]:
        if self.labels is None:
            raise StateError("У набора данных нет меток")
        return self.labels

    def class_counts(self) -> dict[Label, int]:
        labels = self.require_labels()
        return {lab: sum(1 for x in labels if x is lab) for lab in CLASS_ORDER}

    # --- производные наборы ---
    def subset(self, indices: Sequence[int] | np.ndarray) -> ExpressionDataset:
        """Подмножество образцов в заданном порядке."""
        idx = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return ExpressionDataset(
            values=self.values[idx, :],
            labels=labels,
            gene_ids=self.gene_ids,
            scaled=self.scaled,
        )

    def with_labels(self, labels: Sequence[Label]) -> ExpressionDataset:
        return attach_labels(self, labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExpressionDataset):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
            and self.labels == other.labels
            and self.gene_ids == other.gene_ids
            and self.scaled == other.scaled
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"ExpressionDataset(n_samples={self.n_samples}, n_genes={self.n_genes}, "
            f"labeled={self.is_labeled}, scaled={self.scaled})"
        )


@dataclass(frozen=True, eq=False)
class FeatureMask:
    """Битовый вектор над генами, он же хромосома GA."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=bool, copy=True).reshape(-1)
        object.__setattr__(self, "bits", _readonly(bits))

    @classmethod
    def from_indices(cls, indices: Iterable[int], length: int) -> FeatureMask:
        bits = np.zeros(length, dtype=bool)
        for i in indices:
            if not 0 <= i < length:
                raise DimensionError(length, i, "индекс гена")
            bits[i] = True
        return cls(bits)

    @classmethod
    def ones(cls, length: int) -> FeatureMask:
        return cls(np.ones(length, dtype=bool))

    @classmethod
    def from_string(cls, text: str) -> FeatureMask:
        text = text.strip()
        if any(ch not in "01" for ch in text):
            raise ParseError(text[:32], "маска должна состоять из 0 и 1")
        return cls(np.array([ch == "1" for ch in text], dtype=bool))

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @property
    def key(self) -> bytes:
        """Компактный ключ для кэша fitness."""
        return np.packbits(self.bits).tobytes() + len(self.bits).to_bytes(4, "little")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.key).hexdigest()[:16]

    def __len__(self) -> int:
        return int(self.bits.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMask):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"FeatureMask(len={len(self)}, popcount={self.popcount})"


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    """Номер фолда для каждого образца."""

    folds: np.ndarray
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "folds", _readonly(np.asarray(self.folds, dtype=np.int64)))

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)

    def fold_sizes(self) -> list[int]:
        return [int(np.count_nonzero(self.folds == f)) for f in range(self.k)]


@dataclass(frozen=True, eq=False)
class ScalingParams:
    """min/max по каждому гену, посчитанные на обучающей части."""

    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, ds: ExpressionDataset) -> ScalingParams:
        if ds.n_samples == 0:
            raise EmptyInputError("Нечего масштабировать: 0 образцов")
        return cls(mins=ds.values.min(axis=0), maxs=ds.values.max(axis=0))

    def apply(self, ds: ExpressionDataset, clamp: bool = False) -> ExpressionDataset:
        """x -> 2(x-min)/(max-min) - 1, постоянные столбцы -> 0.

        На отложенных данных значения могут выйти за [-1, 1], clamp обрезает.
        """
        if ds.scaled:
            raise StateError("Данные уже отмасштабированы")
        if ds.n_genes != self.mins.shape[0]:
            raise DimensionError(self.mins.shape[0], ds.n_genes, "число генов")
        # всё через половины: max - min на значениях около 1e308 переполняется
        half_mins = self.mins / 2.0
        half_span = self.maxs / 2.0 - half_mins
        constant = half_span == 0
        safe_span = np.where(constant, 1.0, half_span)
        scaled = 2.0 * ((ds.values / 2.0 - half_mins) / safe_span) - 1.0
        scaled[:, constant] = 0.0
        if clamp:
            scaled = np.clip(scaled, -1.0, 1.0)
        return ExpressionDataset(values=scaled, labels=ds.labels, gene_ids=ds.gene_ids, scaled=True)

    def to_dict(self) -> dict[str, list[float]]:
        return {"mins": [float(x) for x in self.mins], "maxs": [float(x) for x in self.maxs]}


# --- загрузка ---

def _parse_float(token: str, location: str) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise ParseError(token, location) from exc
    if not np.isfinite(value):
        raise ParseError(token, location)
    return value


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _read_rows(path: Path) -> list[tuple[int, list[str]]]:
    """Непустые строки файла, разбитые на токены. Разделитель выбираю по первой строке."""
    text = path.read_text(encoding="utf-8")
    lines = [(n, line) for n, line in enumerate(text.splitlines(), start=1) if line.strip()]
    if not lines:
        raise EmptyInputError(f"Пустой файл: {path}")
    use_comma = "," in lines[0][1]
    rows = []
    for lineno, line in lines:
        tokens = [t.strip() for t in line.split(",")] if use_comma else line.split()
        rows.append((lineno, tokens))
    return rows


def load_matrix(
    path: str | Path,
    orientation: Orientation | str = Orientation.SAMPLES_BY_GENES,
) -> ExpressionDataset:
    """Читает числовую матрицу (пробелы/табы или запятые) в набор без меток.

    Если первая строка целиком нечисловая - это заголовок; при ориентации
    образцы × гены из него берутся имена генов.
    """
    path = Path(path)
    orientation = Orientation(orientation)
    rows = _read_rows(path)

    header: list[str] | None = None
    if not any(_is_number(tok) for tok in rows[0][1]):
        header = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise EmptyInputError(f"В файле только заголовок: {path}")

    width = len(rows[0][1])
    if header is not None and len(header) != width:
        raise FormatError(f"в заголовке {len(header)} полей, в данных {width}", str(path), 1)

    matrix = np.empty((len(rows), width), dtype=np.float64)
    for r, (lineno, tokens) in enumerate(rows):
        if len(tokens) != width:
            raise FormatError(
                f"ожидали {width} полей, получили {len(tokens)}", str(path), lineno
            )
        for c, tok in enumerate(tokens):
            matrix[r, c] = _parse_float(tok, f"{path}:{lineno}:{c + 1}")

    gene_ids: tuple[str, ...] = ()
    if orientation is Orientation.GENES_BY_SAMPLES:
        matrix = matrix.T
    elif header is not None:
        gene_ids = tuple(header)

    ds = ExpressionDataset(values=matrix, gene_ids=gene_ids)
    get_logger("dataset").info(
        f"загружена матрица {path.name}: {ds.n_samples} образцов, {ds.n_genes} генов"
    )
    return ds


def _parse_label(token: str, convention: LabelConvention, location: str) -> Label:
    if convention is LabelConvention.SIGN:
        try:
            value = int(token)
        except ValueError as exc:
            raise ParseError(token, location) from exc
        if value == 0:
            raise ParseError(token, f"{location}: ноль не имеет знака")
        return Label.TUMOR if value < 0 else Label.NORMAL
    try:
        return Label.from_token(token)
    except ValueError as exc:
        raise ParseError(token, location) from exc


def load_labels(
    path: str | Path,
    convention: LabelConvention | str = LabelConvention.SIGN,
    n_samples: int | None = None,
) -> list[Label]:
    """Одна метка на строку. sign: отрицательное -> Tumor, положительное -> Normal."""
    path = Path(path)
    convention = LabelConvention(convention)
    text = path.read_text(encoding="utf-8")
    entries = [(n, line.strip()) for n, line in enumerate(text.splitlines(), start=1)]
    entries = [(n, tok) for n, tok in entries if tok]
    if not entries:
        raise EmptyInputError(f"Пустой файл меток: {path}")

    labels = [_parse_label(tok, convention, f"{path}:{n}") for n, tok in entries]
    if n_samples is not None and len(labels) != n_samples:
        raise AlignmentError(n_samples, len(labels), str(path))

    tumor = sum(1 for lab in labels if lab is Label.TUMOR)
    get_logger("dataset").info(
        f"загружены метки {path.name}: {tumor} Tumor / {len(labels) - tumor} Normal"
    )
    return labels


def attach_labels(ds: ExpressionDataset, labels: Sequence[Label]) -> ExpressionDataset:
    if len(labels) != ds.n_samples:
        raise AlignmentError(ds.n_samples, len(labels))
    return ExpressionDataset(values=ds.values, labels=tuple(labels), gene_ids=ds.gene_ids, scaled=ds.scaled)


def load_canonical(path: str | Path) -> ExpressionDataset:
    """Канонический CSV: заголовок label,g0,g1,... и по образцу на строку."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as f:
        rows = [(n, row) for n, row in enumerate(csv.reader(f), start=1) if row]
    if not rows:
        raise EmptyInputError(f"Пустой файл: {path}")
    header = [h.strip() for h in rows[0][1]]
    if not header or header[0].lower() != "label":
        raise FormatError("первая колонка заголовка должна быть 'label'", str(path), 1)
    gene_ids = header[1:]
    if not gene_ids:
        raise FormatError("нет ни одного гена в заголовке", str(path), 1)
    body = rows[1:]
    if not body:
        raise EmptyInputError(f"В файле нет образцов: {path}")

    labels: list[Label] = []
    matrix = np.empty((len(body), len(gene_ids)), dtype=np.float64)
    for r, (lineno, row) in enumerate(body):
        if len(row) != len(header):
            raise FormatError(f"ожидали {len(header)} полей, получили {len(row)}", str(path), lineno)
        labels.append(_parse_label(row[0], LabelConvention.TOKEN, f"{path}:{lineno}:1"))
        for c, tok in enumerate(row[1:]):
            matrix[r, c] = _parse_float(tok.strip(), f"{path}:{lineno}:{c + 2}")
    return ExpressionDataset(values=matrix, labels=tuple(labels), gene_ids=tuple(gene_ids))


def save_canonical(ds: ExpressionDataset, path: str | Path) -> Path:
    """Пишу канонический CSV. repr(float) даёт один и тот же текст при повторе."""
    labels = ds.require_labels()
    lines = [",".join(["label", *ds.gene_ids])]
    for label, row in zip(labels, ds.values):
        lines.append(",".join([label.value, *(repr(float(v)) for v in row)]))
    return write_text(path, "\n".join(lines) + "\n")


# --- масштабирование и маски ---

def scale_features(ds: ExpressionDataset) -> tuple[ExpressionDataset, ScalingParams]:
    """Min-max в [-1, 1] по каждому гену; параметры отдаю для тестовой части."""
    if ds.scaled:
        raise StateError("Данные уже отмасштабированы")
    params = ScalingParams.fit(ds)
    return params.apply(ds), params


def apply_mask(ds: ExpressionDataset, mask: FeatureMask) -> ExpressionDataset:
    """Оставляет только гены с битом 1, порядок столбцов сохраняется."""
    if len(mask) != ds.n_genes:
        raise DimensionError(ds.n_genes, len(mask), "длина маски")
    if mask.popcount == 0:
        raise DegenerateMaskError()
    idx = mask.indices
    return ExpressionDataset(
        values=ds.values[:, idx],
        labels=ds.labels,
        gene_ids=tuple(ds.gene_ids[i] for i in idx),
        scaled=ds.scaled,
    )


# --- сплиты ---

def _class_indices(ds: ExpressionDataset) -> list[np.ndarray]:
    codes = ds.label_codes()
    return [np.flatnonzero(codes == c) for c in range(len(CLASS_ORDER))]


def holdout_indices(
    ds: ExpressionDataset, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Стратифицированный сплит: round(fraction * n_class) в train по каждому классу."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"должна быть в (0, 1), получили {train_fraction}", "train_fraction")
    per_class = _class_indices(ds)
    if any(len(idx) == 0 for idx in per_class):
        raise ConfigError("для сплита нужны образцы обоих классов", "labels")

    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for label, idx in zip(CLASS_ORDER, per_class):
        perm = rng.permutation(idx)
        n_train = round_half_up(train_fraction * len(idx))
        train.extend(perm[:n_train].tolist())
        test.extend(perm[n_train:].tolist())
        if n_train >= len(idx):
            msg = f"в тестовой части нет образцов класса {label.value}"
            get_logger("dataset").warning(msg)
            warnings.warn(msg, StratificationWarning, stacklevel=2)
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


def holdout_split(
    ds: ExpressionDataset, train_fraction: float, seed: int
) -> tuple[ExpressionDataset, ExpressionDataset]:
    train_idx, test_idx = holdout_indices(ds, train_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def stratified_kfold(ds: ExpressionDataset, k: int, seed: int) -> FoldAssignment:
    """Классы перемешиваю, склеиваю подряд и раздаю фолды по кругу.

    Так каждый класс делится между фолдами с разницей не больше 1, и размеры
    фолдов тоже.
    """
    if k < 2:
        raise ConfigError(f"k должно быть >= 2, получили {k}", "k")
    if k > ds.n_samples:
        raise ConfigError(f"k={k} больше числа образцов {ds.n_samples}", "k")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(idx) for idx in _class_indices(ds)])
    folds = np.empty(ds.n_samples, dtype=np.int64)
    folds[order] = np.arange(order.shape[0]) % k
    return FoldAssignment(folds=folds, k=k)


@dataclass(frozen=True)
class DatasetSummary:
    n_samples: int
    n_genes: int
    counts: dict[Label, int] = field(default_factory=dict)

    def __str__(self) -> str:
        return (
            f"{self.n_samples} samples, {self.n_genes} genes, "
            f"{self.counts.get(Label.TUMOR, 0)} Tumor / {self.counts.get(Label.NORMAL, 0)} Normal"
        )


def summarize(ds: ExpressionDataset) -> DatasetSummary:
    return DatasetSummary(ds.n_samples, ds.n_genes, ds.class_counts())
