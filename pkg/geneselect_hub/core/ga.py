"""Генетический алгоритм над битовыми строками фиксированной длины.

Турнирный отбор, равномерный кроссовер, побитовая мутация, элитизм.
Хромосома без единиц чинится установкой одного случайного бита, так что
fitness всегда получает хотя бы один выбранный ген.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from geneselect_hub.core.dataset import FeatureMask
from geneselect_hub.core.exceptions import ConfigError, DimensionError, FitnessError, StateError
from geneselect_hub.infra.storage import write_csv
from geneselect_hub.logging_config import get_logger

FitnessFn = Callable[[FeatureMask], float]
MapFn = Callable[[FitnessFn, Sequence[FeatureMask]], Iterable[float]]
BatchFitnessFn = Callable[[Sequence[FeatureMask]], Sequence[float]]

TRACE_HEADER = ("generation", "best_fitness", "mean_fitness", "best_popcount")


@dataclass(frozen=True)
class GaConfig:
    """Параметры GA. chromosome_length=0 значит «взять из данных» (см. for_length)."""

    chromosome_length: int = 0
    population_size: int = 50
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1 / chromosome_length
    tournament_size: int = 3
    elite_count: int = 1
    init_one_prob: float = 0.05
    seed: int = 0

    def for_length(self, length: int) -> GaConfig:
        return GaConfig(**{**asdict(self), "chromosome_length": length})

    def with_seed(self, seed: int) -> GaConfig:
        return GaConfig(**{**asdict(self), "seed": seed})

    @property
    def effective_mutation_rate(self) -> float:
        if self.mutation_rate is not None:
            return self.mutation_rate
        return 1.0 / max(self.chromosome_length, 1)

    def validate(self) -> None:
        if self.chromosome_length < 1:
            raise ConfigError(f"нужно >= 1, получили {self.chromosome_length}", "ga.chromosome_length")
        if self.population_size < 2:
            raise ConfigError(f"нужно >= 2, получили {self.population_size}", "ga.population_size")
        if self.generations < 1:
            raise ConfigError(f"нужно >= 1, получили {self.generations}", "ga.generations")
        for key in ("crossover_rate", "init_one_prob"):
            value = getattr(self, key)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"должно быть в [0, 1], получили {value}", f"ga.{key}")
        if not 0.0 <= self.effective_mutation_rate <= 1.0:
            raise ConfigError(
                f"должно быть в [0, 1], получили {self.effective_mutation_rate}", "ga.mutation_rate"
            )
        if not 1 <= self.tournament_size <= self.population_size:
            raise ConfigError(
                f"нужно 1..population_size, получили {self.tournament_size}", "ga.tournament_size"
            )
        if not 0 <= self.elite_count < self.population_size:
            raise ConfigError(
                f"нужно 0..population_size-1, получили {self.elite_count}", "ga.elite_count"
            )


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_popcount: int


@dataclass
class GaTrace:
    records: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0

    def append(self, record: GenerationRecord) -> None:
        self.records.append(record)

    @property
    def best_fitness(self) -> list[float]:
        return [r.best_fitness for r in self.records]

    def to_csv_rows(self) -> list[tuple[int, float, float, int]]:
        return [(r.generation, r.best_fitness, r.mean_fitness, r.best_popcount) for r in self.records]

    def write_csv(self, path: str | Path) -> Path:
        return write_csv(path, TRACE_HEADER, self.to_csv_rows())

    def to_dict(self) -> dict[str, Any]:
        return {"evaluations": self.evaluations, "records": [asdict(r) for r in self.records]}

    def __len__(self) -> int:
        return len(self.records)


def _repair(bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if not bits.any():
        bits[rng.integers(bits.shape[0])] = True
    return bits


def init_population(cfg: GaConfig, rng: np.random.Generator | None = None) -> list[FeatureMask]:
    """Каждый бит = 1 с вероятностью init_one_prob, пустые хромосомы чиним."""
    cfg.validate()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    population = []
    for _ in range(cfg.population_size):
        bits = rng.random(cfg.chromosome_length) < cfg.init_one_prob
        population.append(FeatureMask(_repair(bits, rng)))
    return population


def _rank_key(fitness: float, mask: FeatureMask, index: int) -> tuple[float, int, int]:
    # чем меньше ключ, тем лучше: выше fitness, меньше генов, меньше индекс
    return (-fitness, mask.popcount, index)


def tournament_select(
    population: Sequence[FeatureMask],
    fitnesses: Sequence[float],
    tournament_size: int,
    rng: np.random.Generator,
) -> FeatureMask:
    """tournament_size участников с возвращением, побеждает лучший fitness.

    Ничья -> меньше единиц, потом меньший индекс в популяции.
    """
    if not population:
        raise StateError("Пустая популяция")
    if len(fitnesses) != len(population):
        raise DimensionError(len(population), len(fitnesses), "fitnesses")
    drawn = rng.integers(0, len(population), size=tournament_size)
    winner = min(drawn, key=lambda i: _rank_key(fitnesses[i], population[i], int(i)))
    return population[int(winner)]


def uniform_crossover(
    a: FeatureMask, b: FeatureMask, crossover_rate: float, rng: np.random.Generator
) -> tuple[FeatureMask, FeatureMask]:
    """С вероятностью 1-crossover_rate - копии родителей, иначе побитовый обмен 50/50."""
    if len(a) != len(b):
        raise DimensionError(len(a), len(b), "длина родителя")
    if rng.random() >= crossover_rate:
        return FeatureMask(a.bits), FeatureMask(b.bits)
    swap = rng.random(len(a)) < 0.5
    child1 = np.where(swap, b.bits, a.bits)
    child2 = np.where(swap, a.bits, b.bits)
    return FeatureMask(child1), FeatureMask(child2)


def mutate(c: FeatureMask, mutation_rate: float, rng: np.random.Generator) -> FeatureMask:
    """Каждый бит флипается с вероятностью mutation_rate, потом ремонт пустой маски."""
    flips = rng.random(len(c)) < mutation_rate
    bits = np.logical_xor(c.bits, flips)
    return FeatureMask(_repair(bits, rng))


def _sequential_map(fn: FitnessFn, items: Sequence[FeatureMask]) -> list[float]:
    return [fn(item) for item in items]


def evolve(
    cfg: GaConfig,
    fitness: FitnessFn,
    map_fn: MapFn | None = None,
    batch_fitness: BatchFitnessFn | None = None,
) -> tuple[FeatureMask, GaTrace]:
    """Поколенческий цикл с элитизмом. Возвращает лучшую за весь прогон хромосому.

    Fitness кэшируется по уникальной хромосоме. map_fn позволяет считать
    fitness параллельно; результаты всё равно раскладываются по порядку популяции.
    batch_fitness получает сразу все новые хромосомы поколения и должна давать
    те же значения, что fitness по одной; если задана, map_fn не используется.
    """
    cfg.validate()
    logger = get_logger("ga")
    rng = np.random.default_rng(cfg.seed)
    map_fn = map_fn or _sequential_map
    mutation_rate = cfg.effective_mutation_rate
    cache: dict[bytes, float] = {}
    trace = GaTrace()

    def evaluate(population: list[FeatureMask]) -> list[float]:
        pending: list[FeatureMask] = []
        seen: set[bytes] = set()
        for mask in population:
            if mask.key not in cache and mask.key not in seen:
                seen.add(mask.key)
                pending.append(mask)
        if not pending:
            return [cache[mask.key] for mask in population]
        values = batch_fitness(pending) if batch_fitness is not None else map_fn(fitness, pending)
        for mask, value in zip(pending, values):
            value = float(value)
            if math.isnan(value):
                raise FitnessError(mask.digest, value)
            cache[mask.key] = value
        trace.evaluations += len(pending)
        return [cache[mask.key] for mask in population]

    population = init_population(cfg, rng)
    best: FeatureMask | None = None
    best_key: tuple[float, int] | None = None

    for generation in range(cfg.generations):
        fitnesses = evaluate(population)
        order = sorted(range(len(population)), key=lambda i: _rank_key(fitnesses[i], population[i], i))
        leader = population[order[0]]
        trace.append(
            GenerationRecord(
                generation=generation,
                best_fitness=fitnesses[order[0]],
                mean_fitness=float(np.mean(fitnesses)),
                best_popcount=leader.popcount,
            )
        )
        leader_key = (-fitnesses[order[0]], leader.popcount)
        if best_key is None or leader_key < best_key:
            best, best_key = leader, leader_key
        logger.debug(
            f"поколение {generation}: best={fitnesses[order[0]]:.4f} "
            f"mean={trace.records[-1].mean_fitness:.4f} genes={leader.popcount}"
        )

        if generation == cfg.generations - 1:
            break

        next_population = [population[i] for i in order[: cfg.elite_count]]
        while len(next_population) < cfg.population_size:
            parent1 = tournament_select(population, fitnesses, cfg.tournament_size, rng)
            parent2 = tournament_select(population, fitnesses, cfg.tournament_size, rng)
            child1, child2 = uniform_crossover(parent1, parent2, cfg.crossover_rate, rng)
            next_population.append(mutate(child1, mutation_rate, rng))
            if len(next_population) < cfg.population_size:
                next_population.append(mutate(child2, mutation_rate, rng))
        population = next_population

    assert best is not None
    logger.info(
        f"GA завершён: best_fitness={-best_key[0]:.4f}, генов={best.popcount}, "
        f"вычислений fitness={trace.evaluations}"
    )
    return best, trace
