"""Матрица ошибок, точность, агрегаты и отчёт по прогонам."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any

import numpy as np
from prettytable import PrettyTable

from geneselect_hub.core.dataset import Label
from geneselect_hub.core.exceptions import ConfigError, DimensionError, EmptyInputError

REPORT_SCHEMA = 1
MLP_METHOD = "MLP (proposed)"

CSV_HEADER = ("mode", "run", "seed", "method", "accuracy", "tp", "fn", "tn", "fp", "features", "hidden")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Tumor - положительный класс."""

    tp: int = 0
    fn_: int = 0
    tn: int = 0
    fp: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn_ + self.tn + self.fp

    def swapped(self) -> ConfusionMatrix:
        """Если положительным считать Normal."""
        return ConfusionMatrix(tp=self.tn, fn_=self.fp, tn=self.tp, fp=self.fn_)

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fn": self.fn_, "tn": self.tn, "fp": self.fp}

    @classmethod
    def from_dict(cls, data: dict[str, int]) -> ConfusionMatrix:
        return cls(tp=data["tp"], fn_=data["fn"], tn=data["tn"], fp=data["fp"])


def confusion(
    predicted: Sequence[Label], actual: Sequence[Label], positive: Label = Label.TUMOR
) -> ConfusionMatrix:
    if len(predicted) != len(actual):
        raise DimensionError(len(actual), len(predicted), "число предсказаний")
    tp = fn_ = tn = fp = 0
    for p, a in zip(predicted, actual):
        if a == positive:
            if p == a:
                tp += 1
            else:
                fn_ += 1
        elif p == a:
            tn += 1
        else:
            fp += 1
    return ConfusionMatrix(tp=tp, fn_=fn_, tn=tn, fp=fp)


def accuracy(cm: ConfusionMatrix) -> float:
    """Ac = (TP + TN) / (TP + TN + FP + FN)."""
    if cm.total == 0:
        raise EmptyInputError("Пустая матрица ошибок")
    return (cm.tp + cm.tn) / cm.total


@dataclass(frozen=True)
class AccuracySummary:
    mean: float
    std: float
    min: float
    max: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def aggregate(accuracies: Sequence[float]) -> AccuracySummary:
    """Среднее, std (делитель n, популяционная), min, max."""
    if len(accuracies) == 0:
        raise EmptyInputError("Нечего агрегировать")
    values = np.asarray(accuracies, dtype=np.float64)
    return AccuracySummary(
        mean=float(values.mean()),
        std=float(values.std(ddof=0)),
        min=float(values.min()),
        max=float(values.max()),
    )


def format_percent(value: float) -> str:
    """0.935483 -> '93.55%' (половинки вверх, 2 знака)."""
    pct = (Decimal(repr(float(value))) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{pct}%"


# --- опорные цифры из статьи, не пересчитываются ---

@dataclass(frozen=True)
class ReferenceRow:
    method: str
    accuracy: float
    features: int
    source: str = "paper-reported"


PAPER_REFERENCE: tuple[ReferenceRow, ...] = (
    ReferenceRow("SVM", 0.9355, 2),
    ReferenceRow("Naive Bayes", 0.9355, 3),
    ReferenceRow("Proposed MLP", 0.9987, 2),
)


# --- отчёт ---

@dataclass(frozen=True)
class MethodResult:
    method: str
    confusion: ConfusionMatrix
    n_features: int

    @property
    def accuracy(self) -> float:
        return accuracy(self.confusion)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "accuracy": self.accuracy,
            "confusion": self.confusion.to_dict(),
            "features": self.n_features,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MethodResult:
        return cls(data["method"], ConfusionMatrix.from_dict(data["confusion"]), data["features"])


@dataclass(frozen=True)
class RunRecord:
    """Один прогон протокола: сплит, маска, MLP и базовые классификаторы."""

    run: int
    seed: int
    hidden: int
    selected_genes: tuple[str, ...]
    results: tuple[MethodResult, ...]
    warnings: tuple[str, ...] = ()

    @property
    def mlp(self) -> MethodResult:
        return self.results[0]

    @property
    def accuracy(self) -> float:
        return self.mlp.accuracy

    @property
    def popcount(self) -> int:
        return len(self.selected_genes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run": self.run,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "confusion": self.mlp.confusion.to_dict(),
            "popcount": self.popcount,
            "hidden": self.hidden,
            "selected_genes": list(self.selected_genes),
            "methods": [r.to_dict() for r in self.results],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunRecord:
        return cls(
            run=data["run"],
            seed=data["seed"],
            hidden=data["hidden"],
            selected_genes=tuple(data["selected_genes"]),
            results=tuple(MethodResult.from_dict(m) for m in data["methods"]),
            warnings=tuple(data.get("warnings", [])),
        )


@dataclass(frozen=True)
class ModeReport:
    mode: str
    runs: tuple[RunRecord, ...]

    def methods(self) -> list[str]:
        return [r.method for r in self.runs[0].results] if self.runs else []

    def summary(self, method: str = MLP_METHOD) -> AccuracySummary:
        return aggregate([_find(run, method).accuracy for run in self.runs])

    def mean_features(self, method: str = MLP_METHOD) -> float:
        return float(np.mean([_find(run, method).n_features for run in self.runs]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": [r.to_dict() for r in self.runs],
            "aggregate": {m: self.summary(m).to_dict() for m in self.methods()},
            "mean_features": {m: self.mean_features(m) for m in self.methods()},
        }


def _find(run: RunRecord, method: str) -> MethodResult:
    for result in run.results:
        if result.method == method:
            return result
    raise ConfigError(f"в прогоне {run.run} нет метода '{method}'", "method")


@dataclass
class EvaluationReport:
    config: dict[str, Any]
    modes: dict[str, ModeReport] = field(default_factory=dict)
    manifest: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"schema": REPORT_SCHEMA}
        if self.manifest is not None:
            data["manifest"] = self.manifest
        data["config"] = self.config
        data["modes"] = {name: mode.to_dict() for name, mode in self.modes.items()}
        data["reference"] = [asdict(row) for row in PAPER_REFERENCE]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EvaluationReport:
        if data.get("schema") != REPORT_SCHEMA:
            raise ConfigError(f"неизвестная версия схемы {data.get('schema')}", "schema")
        modes = {
            name: ModeReport(name, tuple(RunRecord.from_dict(r) for r in body["runs"]))
            for name, body in data["modes"].items()
        }
        return cls(config=data["config"], modes=modes, manifest=data.get("manifest"))

    def csv_rows(self) -> list[tuple[Any, ...]]:
        """По строке на (режим, прогон, метод)."""
        rows = []
        for name, mode in self.modes.items():
            for run in mode.runs:
                for result in run.results:
                    cm = result.confusion
                    rows.append(
                        (name, run.run, run.seed, result.method, result.accuracy,
                         cm.tp, cm.fn_, cm.tn, cm.fp, result.n_features, run.hidden)
                    )
        return rows


def render_comparison_table(report: EvaluationReport) -> str:
    """Таблица как в статье: метод, точность, число генов + опорные строки."""
    table = PrettyTable()
    table.field_names = ["Method", "Mode", "Accuracy", "Std", "Features"]
    table.align["Method"] = "l"
    table.align["Mode"] = "l"
    for col in ("Accuracy", "Std", "Features"):
        table.align[col] = "r"
    for name, mode in report.modes.items():
        for method in mode.methods():
            summary = mode.summary(method)
            table.add_row(
                [method, name, format_percent(summary.mean), format_percent(summary.std),
                 f"{mode.mean_features(method):g}"]
            )
    for row in PAPER_REFERENCE:
        table.add_row(
            [f"{row.method} ({row.source})", "-", format_percent(row.accuracy), "-", str(row.features)]
        )
    return table.get_string()
