from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from geneselect_hub.core.dataset import ExpressionDataset, Label
from geneselect_hub.core.ga import GaConfig
from geneselect_hub.core.mlp import TrainConfig
from geneselect_hub.core.pipeline import PipelineConfig
from geneselect_hub.infra.settings import SettingsLoader
from geneselect_hub.logging_config import reset_logging, setup_logging


@pytest.fixture(autouse=True)
def isolated_logging(tmp_path: Path):
    """Logs go to a temp file; singletons reset around every test."""
    reset_logging()
    SettingsLoader.reset()
    setup_logging(log_file=tmp_path / "test.log")
    yield
    reset_logging()
    SettingsLoader.reset()


def build_dataset(
    n_tumor: int,
    n_normal: int,
    n_genes: int,
    seed: int = 0,
    informative: tuple[int, ...] = (0,),
) -> ExpressionDataset:
    """Unscaled data: informative genes are -1 for Tumor and +1 for Normal, the rest is noise."""
    rng = np.random.default_rng(seed)
    labels = [Label.TUMOR] * n_tumor + [Label.NORMAL] * n_normal
    values = rng.uniform(-1.0, 1.0, size=(len(labels), n_genes))
    for g in informative:
        values[:, g] = [-1.0 if lab is Label.TUMOR else 1.0 for lab in labels]
    order = rng.permutation(len(labels))
    return ExpressionDataset(values=values[order], labels=tuple(labels[i] for i in order))


@pytest.fixture()
def make_dataset() -> Callable[..., ExpressionDataset]:
    return build_dataset


@pytest.fixture()
def fast_config() -> PipelineConfig:
    """Small budgets so pipeline tests finish in seconds."""
    return PipelineConfig(
        ga=GaConfig(population_size=8, generations=4, init_one_prob=0.5),
        mlp_train=TrainConfig(learning_rate=0.5, max_epochs=30),
        hidden_sweep=(3, 4),
        fitness_hidden=4,
        inner_folds=3,
        eval_runs=1,
        train_fraction=0.75,
        seed=7,
    )


FAST_CONFIG_TOML = """
[ga]
population_size = 4
generations = 2
init_one_prob = 0.5

[mlp]
learning_rate = 0.5
max_epochs = 20

[pipeline]
hidden_sweep = [3, 4]
fitness_hidden = 4
eval_runs = 1
train_fraction = 0.75
"""


@pytest.fixture()
def fast_config_file(tmp_path: Path) -> Path:
    path = tmp_path / "fast.toml"
    path.write_text(FAST_CONFIG_TOML, encoding="utf-8")
    return path
