"""Обёрточный отбор генов (GA + MLP) и протокол оценки 20 × 90/10.

Fitness маски = средняя точность MLP на внутренней стратифицированной CV
минус штраф λ·popcount/n_genes. Два режима оценки:
  * full-data-selection - маска выбирается один раз на всех данных (как в
    статье, с утечкой информации из теста);
  * nested-selection - маска, масштабирование и размер скрытого слоя
    подбираются только на обучающей части каждого прогона.
"""

from __future__ import annotations

import contextlib
import dataclasses
import functools
from collections.abc import Iterator, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from geneselect_hub.core.baselines import (
    gnb_fit,
    gnb_predict,
    knn_fit,
    knn_predict,
    top_genes_by_separation,
)
from geneselect_hub.core.dataset import (
    ExpressionDataset,
    FeatureMask,
    apply_mask,
    holdout_indices,
    scale_features,
    stratified_kfold,
)
from geneselect_hub.core.exceptions import (
    ConfigError,
    DegenerateMaskError,
    DimensionError,
    StateError,
)
from geneselect_hub.core.ga import GaConfig, GaTrace, evolve
from geneselect_hub.core.metrics import (
    MLP_METHOD,
    EvaluationReport,
    MethodResult,
    ModeReport,
    RunRecord,
    accuracy,
    confusion,
)
from geneselect_hub.core.mlp import (
    MlpLayout,
    TrainConfig,
    TrainJob,
    init_model,
    predict_batch,
    train,
    train_many,
    widen_inputs,
)
from geneselect_hub.core.utils import derive_seed
from geneselect_hub.decorators import log_action
from geneselect_hub.infra.settings import read_toml
from geneselect_hub.logging_config import get_logger

SELECTION_SCHEMA = 1
GNB_GA_METHOD = "GNB (GA genes)"
GNB_TOP_METHOD = "GNB (top genes)"
KNN_METHOD = "kNN (GA genes)"
_MIN_CV_WIDTH = 16
_NESTED_NEEDS_RAW = (
    "nested-selection ждёт неотмасштабированные данные: масштаб считается по train каждого прогона"
)


class BiasMode(str, Enum):
    FULL = "full-data-selection"
    NESTED = "nested-selection"


BIAS_MODE_CHOICES: dict[str, tuple[BiasMode, ...]] = {
    "full": (BiasMode.FULL,),
    "nested": (BiasMode.NESTED,),
    "both": (BiasMode.FULL, BiasMode.NESTED),
}

# ключи ga/mlp, которые пайплайн выставляет сам
_DERIVED_KEYS = {"ga": ("chromosome_length", "seed"), "mlp": ("seed",)}


@dataclass(frozen=True)
class PipelineConfig:
    ga: GaConfig = field(default_factory=GaConfig)
    mlp_train: TrainConfig = field(default_factory=TrainConfig)
    hidden_sweep: tuple[int, int] = (3, 15)
    fitness_hidden: int = 8
    inner_folds: int = 3
    parsimony_weight: float = 0.01
    eval_runs: int = 20
    train_fraction: float = 0.9
    bias_mode: str = "both"
    knn_k: int = 3
    top_n: int = 3
    clamp_test: bool = False
    seed: int = 42
    workers: int = 1

    def validate(self) -> None:
        lo, hi = self.hidden_sweep
        if not 1 <= lo <= hi:
            raise ConfigError(f"нужно 1 <= lo <= hi, получили {self.hidden_sweep}", "pipeline.hidden_sweep")
        if self.fitness_hidden < 1:
            raise ConfigError(f"нужно >= 1, получили {self.fitness_hidden}", "pipeline.fitness_hidden")
        if self.inner_folds < 2:
            raise ConfigError(f"нужно >= 2, получили {self.inner_folds}", "pipeline.inner_folds")
        if self.eval_runs < 1:
            raise ConfigError(f"нужно >= 1, получили {self.eval_runs}", "pipeline.eval_runs")
        if self.parsimony_weight < 0:
            raise ConfigError(f"нужно >= 0, получили {self.parsimony_weight}", "pipeline.parsimony_weight")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"нужно в (0, 1), получили {self.train_fraction}", "pipeline.train_fraction")
        if self.bias_mode not in BIAS_MODE_CHOICES:
            raise ConfigError(
                f"ожидали одно из {sorted(BIAS_MODE_CHOICES)}, получили '{self.bias_mode}'",
                "pipeline.bias_mode",
            )
        if self.workers < 1:
            raise ConfigError(f"нужно >= 1, получили {self.workers}", "pipeline.workers")
        # длина хромосомы известна только по данным, остальное проверяю сразу
        self.ga.for_length(max(self.ga.chromosome_length, 1)).validate()

    @property
    def modes(self) -> tuple[BiasMode, ...]:
        return BIAS_MODE_CHOICES[self.bias_mode]

    def with_overrides(self, **overrides: Any) -> PipelineConfig:
        """Переопределения из CLI; None пропускаю. ga.* задаётся как ga_<ключ>."""
        ga_updates = {k[3:]: v for k, v in overrides.items() if k.startswith("ga_") and v is not None}
        top = {k: v for k, v in overrides.items() if not k.startswith("ga_") and v is not None}
        ga = dataclasses.replace(self.ga, **ga_updates) if ga_updates else self.ga
        return dataclasses.replace(self, ga=ga, **top)

    def to_dict(self) -> dict[str, Any]:
        ga = {k: v for k, v in asdict(self.ga).items() if k not in _DERIVED_KEYS["ga"]}
        mlp = {k: v for k, v in asdict(self.mlp_train).items() if k not in _DERIVED_KEYS["mlp"]}
        pipeline = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("ga", "mlp_train")
        }
        pipeline["hidden_sweep"] = list(self.hidden_sweep)
        return {"ga": ga, "mlp": mlp, "pipeline": pipeline}


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Проверка типа по значению по умолчанию."""
    is_int = isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if is_int:
            return value
    elif isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if is_int or isinstance(value, float):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, tuple):
        if isinstance(value, list | tuple) and len(value) == len(default):
            if all(isinstance(v, int) and not isinstance(v, bool) for v in value):
                return tuple(value)
    raise ConfigError(f"неверный тип значения {value!r}", key)


def _section(name: str, raw: Any, defaults: Any) -> dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError("ожидали секцию ключ = значение", name)
    allowed = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(defaults)}
    values = {}
    for key, value in raw.items():
        full_key = f"{name}.{key}"
        if key in _DERIVED_KEYS.get(name, ()):
            raise ConfigError("задаётся автоматически, в конфиге не нужен", full_key)
        if key not in allowed or key in ("ga", "mlp_train"):
            raise ConfigError("неизвестный ключ", full_key)
        values[key] = _coerce(full_key, value, allowed[key])
    return values


def pipeline_config_from_dict(data: dict[str, Any]) -> PipelineConfig:
    """Секции [ga], [mlp], [pipeline]; всё, чего нет, берётся по умолчанию."""
    unknown = set(data) - {"ga", "mlp", "pipeline"}
    if unknown:
        raise ConfigError("неизвестная секция", sorted(unknown)[0])
    base = PipelineConfig()
    ga = GaConfig(**_section("ga", data.get("ga", {}), base.ga))
    mlp = TrainConfig(**_section("mlp", data.get("mlp", {}), base.mlp_train))
    cfg = PipelineConfig(ga=ga, mlp_train=mlp, **_section("pipeline", data.get("pipeline", {}), base))
    cfg.validate()
    return cfg


def load_run_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = read_toml(path)
    except OSError as exc:
        raise ConfigError(f"не удалось прочитать {path}: {exc}") from exc
    except ValueError as exc:  # tomllib.TOMLDecodeError наследует ValueError
        raise ConfigError(f"{path}: {exc}") from exc
    return pipeline_config_from_dict(data)


@dataclass(frozen=True)
class SelectionResult:
    mask: FeatureMask
    selected_gene_ids: tuple[str, ...]
    fitness: float
    trace: GaTrace
    config: dict[str, Any]

    @property
    def popcount(self) -> int:
        return self.mask.popcount

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SELECTION_SCHEMA,
            "mask": self.mask.to_string(),
            "popcount": self.popcount,
            "selected_genes": list(self.selected_gene_ids),
            "fitness": self.fitness,
            "trace": self.trace.to_dict(),
            "config": self.config,
        }


# --- fitness и CV ---

def padded_width(n_inputs: int) -> int:
    """Ширина входа сети при CV: степень двойки, не меньше 16.

    Лишние входы нулевые и их веса нулевые, сеть та же. Ширина зависит только от
    числа генов, так что маска считается одинаково одна и в пачке с другими.
    """
    return max(_MIN_CV_WIDTH, 1 << (n_inputs - 1).bit_length())


def _cv_scores(
    ds: ExpressionDataset,
    jobs: Sequence[tuple[np.ndarray, int, tuple[Any, ...]]],
    cfg: PipelineConfig,
) -> list[float]:
    """CV-точность для пачки (столбцы, n_hidden, части сида) на одних фолдах.

    Все сети всех заданий и фолдов обучаются одним вызовом train_many.
    """
    folds = stratified_kfold(ds, cfg.inner_folds, derive_seed(cfg.seed, "inner-folds"))
    labels = ds.require_labels()
    train_jobs: list[TrainJob] = []
    held_out: list[ExpressionDataset] = []
    for columns, n_hidden, seed_parts in jobs:
        n_inputs = len(columns)
        if n_inputs == 0:
            raise DegenerateMaskError()
        width = padded_width(n_inputs)
        values = np.zeros((ds.n_samples, width))
        values[:, :n_inputs] = ds.values[:, columns]
        padded = ExpressionDataset(values=values, labels=labels, scaled=True)
        for fold in range(folds.k):
            model = init_model(
                MlpLayout(n_inputs, n_hidden), derive_seed(cfg.seed, *seed_parts, fold, "init")
            )
            train_jobs.append(
                TrainJob(
                    model=widen_inputs(model, width),
                    data=padded.subset(folds.train_indices(fold)),
                    seed=derive_seed(cfg.seed, *seed_parts, fold, "shuffle"),
                )
            )
            held_out.append(padded.subset(folds.test_indices(fold)))

    trained = train_many(train_jobs, cfg.mlp_train)
    fold_scores = [
        accuracy(confusion(predict_batch(model, part.values), part.require_labels()))
        for (model, _), part in zip(trained, held_out)
    ]
    k = folds.k
    return [float(np.mean(fold_scores[i * k : (i + 1) * k])) for i in range(len(jobs))]


def cross_val_accuracy(
    ds: ExpressionDataset, n_hidden: int, cfg: PipelineConfig, seed_parts: tuple[Any, ...]
) -> float:
    """Средняя точность MLP по стратифицированным inner_folds фолдам.

    Фолды зависят только от мастер-сида, так что все маски судятся на одних и тех же фолдах.
    """
    return _cv_scores(ds, [(np.arange(ds.n_genes), n_hidden, seed_parts)], cfg)[0]


def wrapper_fitness(mask: FeatureMask, ds: ExpressionDataset, cfg: PipelineConfig) -> float:
    """CV-точность MLP на выбранных генах минус λ·popcount/n_genes."""
    if not ds.scaled:
        raise StateError("fitness считается на отмасштабированных данных")
    masked = apply_mask(ds, mask)
    cv_acc = cross_val_accuracy(masked, cfg.fitness_hidden, cfg, ("fitness", mask.digest))
    return cv_acc - cfg.parsimony_weight * mask.popcount / ds.n_genes


def _local_batch_fitness(
    masks: Sequence[FeatureMask], ds: ExpressionDataset, cfg: PipelineConfig
) -> list[float]:
    for mask in masks:
        if len(mask) != ds.n_genes:
            raise DimensionError(ds.n_genes, len(mask), "длина маски")
    jobs = [(mask.indices, cfg.fitness_hidden, ("fitness", mask.digest)) for mask in masks]
    scores = _cv_scores(ds, jobs, cfg)
    return [
        score - cfg.parsimony_weight * mask.popcount / ds.n_genes
        for score, mask in zip(scores, masks)
    ]


def batch_fitness(
    masks: Sequence[FeatureMask],
    ds: ExpressionDataset,
    cfg: PipelineConfig,
    executor: Executor | None = None,
) -> list[float]:
    """wrapper_fitness для списка масок, значения те же до бита.

    С пулом список режется на cfg.workers кусков, каждый кусок считается пачкой в своём процессе.
    """
    if not ds.scaled:
        raise StateError("fitness считается на отмасштабированных данных")
    masks = list(masks)
    if executor is None or cfg.workers <= 1 or len(masks) < 2:
        return _local_batch_fitness(masks, ds, cfg)
    size = -(-len(masks) // cfg.workers)
    chunks = [masks[i : i + size] for i in range(0, len(masks), size)]
    job = functools.partial(_local_batch_fitness, ds=ds, cfg=cfg)
    return [value for part in executor.map(job, chunks) for value in part]


@log_action("SELECT")
def run_selection(
    ds: ExpressionDataset,
    cfg: PipelineConfig,
    tag: str = "full",
    executor: Executor | None = None,
) -> SelectionResult:
    """GA с обёрточной fitness. В nested-режиме сюда приходит только train.

    Новые хромосомы поколения оцениваются одной пачкой (batch_fitness), с пулом
    пачка делится между процессами.
    """
    if not ds.scaled:
        raise StateError("отбор генов идёт на отмасштабированных данных")
    ds.require_labels()
    ga_cfg = cfg.ga.for_length(ds.n_genes).with_seed(derive_seed(cfg.seed, "ga", tag))
    best, trace = evolve(
        ga_cfg,
        functools.partial(wrapper_fitness, ds=ds, cfg=cfg),
        batch_fitness=functools.partial(batch_fitness, ds=ds, cfg=cfg, executor=executor),
    )
    return SelectionResult(
        mask=best,
        selected_gene_ids=tuple(ds.gene_ids[i] for i in best.indices),
        fitness=max(trace.best_fitness),
        trace=trace,
        config=cfg.to_dict(),
    )


def tune_hidden(ds_train: ExpressionDataset, mask: FeatureMask, cfg: PipelineConfig) -> int:
    """Перебор размера скрытого слоя по CV; ничья -> меньший."""
    masked = apply_mask(ds_train, mask)
    lo, hi = cfg.hidden_sweep
    best_h, best_acc = lo, -1.0
    for h in range(lo, hi + 1):
        acc = cross_val_accuracy(masked, h, cfg, ("hidden", mask.digest, h))
        if acc > best_acc:
            best_h, best_acc = h, acc
    get_logger("pipeline").debug(f"tune_hidden: h={best_h}, cv={best_acc:.4f}")
    return best_h


# --- протокол ---

def _score(method: str, predicted: list, test: ExpressionDataset, n_features: int) -> MethodResult:
    return MethodResult(method, confusion(predicted, test.require_labels()), n_features)


def evaluate_split(
    ds: ExpressionDataset,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    cfg: PipelineConfig,
    run: int,
    run_seed: int,
    mask: FeatureMask | None = None,
) -> RunRecord:
    """Один прогон на заданном сплите.

    Без маски - отбор на train (nested), тогда данные должны быть сырыми: min/max
    считаются только по train, тест масштабируется теми же параметрами.
    """
    if mask is None and ds.scaled:
        raise StateError(_NESTED_NEEDS_RAW)
    train_ds, test_ds = ds.subset(train_idx), ds.subset(test_idx)
    if not ds.scaled:
        train_ds, params = scale_features(train_ds)
        test_ds = params.apply(test_ds, clamp=cfg.clamp_test)

    notes: list[str] = []
    if len(set(test_ds.require_labels())) < 2:
        notes.append(f"run {run}: test split has a single class")
        get_logger("pipeline").warning(f"прогон {run}: в тесте только один класс")

    if mask is None:
        mask = run_selection(train_ds, cfg, tag=f"run{run}").mask
    hidden = tune_hidden(train_ds, mask, cfg)

    train_m, test_m = apply_mask(train_ds, mask), apply_mask(test_ds, mask)
    model = init_model(MlpLayout(mask.popcount, hidden), derive_seed(run_seed, "final-init"))
    model, _ = train(
        model, train_m, dataclasses.replace(cfg.mlp_train, seed=derive_seed(run_seed, "final-shuffle"))
    )

    gnb = gnb_fit(train_m)
    knn = knn_fit(train_m, cfg.knn_k)
    top = top_genes_by_separation(train_ds, min(cfg.top_n, train_ds.n_genes))
    gnb_top = gnb_fit(apply_mask(train_ds, top))
    test_top = apply_mask(test_ds, top)

    results = (
        _score(MLP_METHOD, predict_batch(model, test_m.values), test_m, mask.popcount),
        _score(GNB_GA_METHOD, [gnb_predict(gnb, x) for x in test_m.values], test_m, mask.popcount),
        _score(KNN_METHOD, [knn_predict(knn, x) for x in test_m.values], test_m, mask.popcount),
        _score(GNB_TOP_METHOD, [gnb_predict(gnb_top, x) for x in test_top.values], test_top, top.popcount),
    )
    return RunRecord(
        run=run,
        seed=run_seed,
        hidden=hidden,
        selected_genes=tuple(ds.gene_ids[i] for i in mask.indices),
        results=results,
        warnings=tuple(notes),
    )


def _evaluate_job(job: tuple[Any, ...]) -> RunRecord:
    return evaluate_split(*job)


@contextlib.contextmanager
def _executor(workers: int) -> Iterator[Executor | None]:
    if workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool


@log_action("EVALUATE")
def evaluate_protocol(ds: ExpressionDataset, cfg: PipelineConfig) -> EvaluationReport:
    """eval_runs стратифицированных сплитов train_fraction/остаток, по каждому режиму.

    Прогоны независимы (сиды выводятся из мастер-сида), при workers > 1 идут в
    пуле процессов; результаты собираются по номеру прогона.
    """
    cfg.validate()
    ds.require_labels()
    if BiasMode.NESTED in cfg.modes and ds.scaled:
        raise StateError(_NESTED_NEEDS_RAW)
    logger = get_logger("pipeline")
    report = EvaluationReport(config=cfg.to_dict())

    splits = []
    for run in range(1, cfg.eval_runs + 1):
        run_seed = derive_seed(cfg.seed, "run", run)
        train_idx, test_idx = holdout_indices(ds, cfg.train_fraction, run_seed)
        splits.append((run, run_seed, train_idx, test_idx))

    with _executor(cfg.workers) as pool:
        for mode in cfg.modes:
            if mode is BiasMode.FULL:
                base = ds if ds.scaled else scale_features(ds)[0]
                mask: FeatureMask | None = run_selection(base, cfg, tag="full", executor=pool).mask
            else:
                base, mask = ds, None
            jobs = [(base, tr, te, cfg, run, seed, mask) for run, seed, tr, te in splits]
            if pool is None:
                records = [_evaluate_job(job) for job in jobs]
            else:
                records = list(pool.map(_evaluate_job, jobs))
            for rec in records:
                logger.info(
                    f"[{mode.value}] прогон {rec.run}: accuracy={rec.accuracy:.4f}, "
                    f"генов={rec.popcount}, hidden={rec.hidden}"
                )
            report.modes[mode.value] = ModeReport(mode.value, tuple(records))
    return report
