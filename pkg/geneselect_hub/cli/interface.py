"""CLI: ingest / select / evaluate / report.

Данные - в файлы и stdout, диагностика - в stderr. Код выхода 0 только если
команда отработала без ошибок; ошибки домена -> 2, всё неожиданное -> 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from geneselect_hub import __version__
from geneselect_hub.core.dataset import (
    LabelConvention,
    Orientation,
    attach_labels,
    load_canonical,
    load_labels,
    load_matrix,
    save_canonical,
    scale_features,
    summarize,
)
from geneselect_hub.core.exceptions import GeneSelectError
from geneselect_hub.core.metrics import (
    CSV_HEADER,
    EvaluationReport,
    format_percent,
    render_comparison_table,
)
from geneselect_hub.core.pipeline import (
    BIAS_MODE_CHOICES,
    PipelineConfig,
    evaluate_protocol,
    load_run_config,
    run_selection,
)
from geneselect_hub.decorators import log_action
from geneselect_hub.infra.manifest import RunManifest
from geneselect_hub.infra.settings import get_settings
from geneselect_hub.infra.storage import read_json, write_csv, write_json, write_lines
from geneselect_hub.logging_config import get_logger, setup_logging

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_ERROR = 2


@log_action("INGEST")
def ingest(
    matrix_path: Path,
    labels_path: Path,
    orientation: str,
    convention: str,
    output: Path,
) -> Path:
    """Матрица + метки -> канонический CSV."""
    ds = load_matrix(matrix_path, orientation)
    labels = load_labels(labels_path, convention, n_samples=ds.n_samples)
    return save_canonical(attach_labels(ds, labels), output)


class GeneSelectCLI:
    """Держит парсер и команды."""

    def __init__(self) -> None:
        self.settings = get_settings()
        self.parser = self._build_parser()
        self.commands: dict[str, Callable[[argparse.Namespace], None]] = {
            "ingest": self._cmd_ingest,
            "select": self._cmd_select,
            "evaluate": self._cmd_evaluate,
            "report": self._cmd_report,
        }

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="geneselect",
            description="GA-отбор генов + MLP для данных экспрессии (Tumor/Normal)",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        parser.add_argument("-v", "--verbose", action="count", default=0, help="больше логов в stderr")
        sub = parser.add_subparsers(dest="command", required=True)

        p = sub.add_parser("ingest", help="матрица + метки -> канонический CSV")
        p.add_argument("matrix", type=Path)
        p.add_argument("labels", type=Path)
        p.add_argument(
            "--orientation",
            choices=[o.value for o in Orientation],
            default=Orientation.SAMPLES_BY_GENES.value,
        )
        p.add_argument(
            "--label-convention", choices=[c.value for c in LabelConvention], default="sign"
        )
        p.add_argument("--out-dir", type=Path, default=None)
        p.add_argument("--output", default="dataset.csv", help="имя файла в out-dir")

        for name, help_text in (("select", "отбор генов GA"), ("evaluate", "протокол 20 × 90/10")):
            p = sub.add_parser(name, help=help_text)
            p.add_argument("dataset", type=Path, help="канонический CSV")
            p.add_argument("--config", type=Path, default=None, help="TOML с секциями ga/mlp/pipeline")
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--generations", type=int, default=None)
            p.add_argument("--population", type=int, default=None)
            p.add_argument("--workers", type=int, default=None)
            p.add_argument("--out-dir", type=Path, default=None)
            if name == "evaluate":
                p.add_argument("--runs", type=int, default=None)
                p.add_argument("--bias-mode", choices=sorted(BIAS_MODE_CHOICES), default=None)

        p = sub.add_parser("report", help="перерисовать таблицу из report.json")
        p.add_argument("report", type=Path)
        return parser

    # --- общая обвязка ---

    def run(self, argv: Sequence[str] | None = None) -> int:
        args = self.parser.parse_args(argv)
        console_level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
        setup_logging(console_level=console_level)
        logger = get_logger("cli")
        try:
            self.commands[args.command](args)
        except GeneSelectError as exc:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_ERROR
        except OSError as exc:
            print(f"Ошибка файла: {exc}", file=sys.stderr)
            return EXIT_ERROR
        except Exception as exc:
            logger.exception(f"неожиданная ошибка: {exc}")
            print(f"Неожиданная ошибка: {exc}", file=sys.stderr)
            return EXIT_UNEXPECTED
        return EXIT_OK

    def _out_dir(self, args: argparse.Namespace) -> Path:
        return args.out_dir if args.out_dir is not None else self.settings.out_dir

    def _resolve_config(self, args: argparse.Namespace) -> PipelineConfig:
        """Файл конфига + флаги. Сид: флаг > файл > DEFAULT_SEED."""
        cfg = load_run_config(args.config)
        if args.config is None:
            cfg = cfg.with_overrides(seed=self.settings.default_seed)
        cfg = cfg.with_overrides(
            seed=args.seed,
            workers=args.workers,
            eval_runs=getattr(args, "runs", None),
            bias_mode=getattr(args, "bias_mode", None),
            ga_generations=args.generations,
            ga_population_size=args.population,
        )
        cfg.validate()
        return cfg

    def _manifest(self, command: str, args: argparse.Namespace, cfg: PipelineConfig) -> RunManifest:
        inputs = {"dataset": args.dataset}
        if args.config is not None:
            inputs["config"] = args.config
        return RunManifest.build(command, args.config, cfg.to_dict(), cfg.seed, inputs)

    # --- команды ---

    def _cmd_ingest(self, args: argparse.Namespace) -> None:
        output = self._out_dir(args) / args.output
        path = ingest(args.matrix, args.labels, args.orientation, args.label_convention, output)
        print(summarize(load_canonical(path)))
        print(f"canonical dataset: {path}")

    def _cmd_select(self, args: argparse.Namespace) -> None:
        cfg = self._resolve_config(args)
        ds, _ = scale_features(load_canonical(args.dataset))
        result = run_selection(ds, cfg, tag="full")

        out = self._out_dir(args)
        manifest = self._manifest("select", args, cfg)
        write_lines(out / "selected_genes.txt", result.selected_gene_ids)
        result.trace.write_csv(out / "ga_trace.csv")
        write_json(out / "selection.json", {**result.to_dict(), "manifest": manifest.reproducible_dict()})
        write_json(out / "run_manifest.json", manifest.to_dict())

        print(f"selected {result.popcount} of {ds.n_genes} genes, fitness {result.fitness:.4f}")
        for gene in result.selected_gene_ids:
            print(f"  {gene}")
        print(f"artifacts: {out}")

    def _cmd_evaluate(self, args: argparse.Namespace) -> None:
        cfg = self._resolve_config(args)
        ds = load_canonical(args.dataset)
        report = evaluate_protocol(ds, cfg)
        manifest = self._manifest("evaluate", args, cfg)
        report.manifest = manifest.reproducible_dict()

        out = self._out_dir(args)
        write_json(out / "report.json", report.to_dict())
        write_csv(out / "report.csv", CSV_HEADER, report.csv_rows())
        write_json(out / "run_manifest.json", manifest.to_dict())

        self._print_report(report)
        print(f"artifacts: {out}")

    def _cmd_report(self, args: argparse.Namespace) -> None:
        self._print_report(EvaluationReport.from_dict(read_json(args.report)))

    @staticmethod
    def _print_report(report: EvaluationReport) -> None:
        print(render_comparison_table(report))
        for name, mode in report.modes.items():
            s = mode.summary()
            print(
                f"{name}: mean {format_percent(s.mean)}, std {format_percent(s.std)}, "
                f"min {format_percent(s.min)}, max {format_percent(s.max)} over {len(mode.runs)} runs"
            )


def main(argv: Sequence[str] | None = None) -> int:
    """Точка входа для poetry script."""
    return GeneSelectCLI().run(argv)


if __name__ == "__main__":
    sys.exit(main())
