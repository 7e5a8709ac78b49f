"""Полные прогоны протокола с бюджетом GA по умолчанию.

Идут минуты, поэтому помечены slow и по умолчанию пропускаются: pytest -m slow.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import pytest

from geneselect_hub.cli.interface import EXIT_OK, main
from geneselect_hub.core.dataset import save_canonical
from geneselect_hub.core.metrics import MLP_METHOD

pytestmark = pytest.mark.slow

WORKERS = min(4, os.cpu_count() or 1)
COLON_DIR = os.environ.get("GENESELECT_COLON_DIR")


def _evaluate(args: list[str], out: Path) -> tuple[dict, float]:
    started = time.perf_counter()
    assert main([*args, "--workers", str(WORKERS), "--out-dir", str(out)]) == EXIT_OK
    elapsed = time.perf_counter() - started
    return json.loads((out / "report.json").read_text(encoding="utf-8")), elapsed


def test_nested_runs_find_the_separating_gene(tmp_path: Path, make_dataset):
    # 62 образца 40/22, 100 генов, g0 разделяет классы
    dataset = save_canonical(make_dataset(40, 22, 100, seed=0), tmp_path / "dataset.csv")
    report, elapsed = _evaluate(
        ["evaluate", str(dataset), "--runs", "20", "--bias-mode", "nested"], tmp_path / "out"
    )
    body = report["modes"]["nested-selection"]
    assert len(body["runs"]) == 20
    assert body["aggregate"][MLP_METHOD]["mean"] >= 0.95
    assert sum("g0" in run["selected_genes"] for run in body["runs"]) >= 16
    assert elapsed < 5 * 60


@pytest.mark.skipif(COLON_DIR is None, reason="GENESELECT_COLON_DIR не задан")
def test_colon_full_and_nested(tmp_path: Path, capsys):
    colon = Path(COLON_DIR or ".")
    out = tmp_path / "out"
    assert main(["ingest", str(colon / "I2000.txt"), str(colon / "tissues.txt"),
                 "--orientation", "genes-by-samples", "--out-dir", str(out)]) == EXIT_OK
    config = Path(__file__).resolve().parent.parent / "config" / "colon.toml"
    report, elapsed = _evaluate(
        ["evaluate", str(out / "dataset.csv"), "--config", str(config)], out
    )

    full = report["modes"]["full-data-selection"]
    assert full["aggregate"][MLP_METHOD]["mean"] >= 0.90
    assert all(run["popcount"] <= 10 for run in full["runs"])
    nested = report["modes"]["nested-selection"]
    assert nested["aggregate"][MLP_METHOD]["mean"] > 40 / 62
    assert elapsed < 30 * 60

    printed = capsys.readouterr().out
    assert "99.87%" in printed
    assert "93.55%" in printed
