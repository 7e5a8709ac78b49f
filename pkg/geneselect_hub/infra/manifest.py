"""Манифест прогона: что запускали, с каким конфигом и на каких файлах."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from geneselect_hub import __version__
from geneselect_hub.core.utils import file_sha256, now_iso


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str | None
    config: dict[str, Any]
    seed: int
    input_digests: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    timestamp: str = field(default_factory=now_iso)

    @classmethod
    def build(
        cls,
        command: str,
        config_path: str | Path | None,
        config: dict[str, Any],
        seed: int,
        inputs: dict[str, str | Path],
    ) -> RunManifest:
        # ключ - имя файла, чтобы манифест не зависел от каталога запуска
        digests = {Path(p).name: file_sha256(p) for p in inputs.values()}
        return cls(
            command=command,
            config_path=str(config_path) if config_path is not None else None,
            config=config,
            seed=seed,
            input_digests=dict(sorted(digests.items())),
        )

    def reproducible_dict(self) -> dict[str, Any]:
        """Всё, кроме времени запуска: это встраивается в отчёты."""
        return {
            "command": self.command,
            "config_path": self.config_path,
            "seed": self.seed,
            "input_digests": self.input_digests,
            "tool_version": self.tool_version,
            "config": self.config,
        }

    def to_dict(self) -> dict[str, Any]:
        return {**self.reproducible_dict(), "timestamp": self.timestamp}
