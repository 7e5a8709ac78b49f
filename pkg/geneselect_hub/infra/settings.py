"""Настройки приложения.

Основной источник - секция [tool.geneselect] в pyproject.toml.
Фолбэк: встроенные дефолты. Конфиг прогона (ga/mlp/pipeline) - отдельный
TOML-файл, его читает load_run_config.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

try:  # Python 3.11+
    import tomllib  # type: ignore
except ModuleNotFoundError:  # pragma: no cover
    try:
        import tomli as tomllib  # type: ignore
    except ModuleNotFoundError:
        tomllib = None  # type: ignore

DEFAULT_PYPROJECT_PATH = Path(__file__).parent.parent.parent / "pyproject.toml"


class SettingsLoader:
    """Singleton для настроек, чтобы pyproject читался один раз.

    В тестах сбрасывается через reset().
    """

    _instance: SettingsLoader | None = None
    _settings: dict[str, Any] = {}
    _pyproject_path: Path | None = None

    def __new__(cls, pyproject_path: Path | None = None) -> SettingsLoader:  # noqa: D401
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._pyproject_path = pyproject_path
            cls._load_config()
        return cls._instance

    # --- загрузка ---
    @classmethod
    def _load_config(cls) -> None:
        cls._settings = cls._get_defaults()
        cls._settings.update(cls._read_pyproject())

    @classmethod
    def _read_pyproject(cls) -> dict[str, Any]:
        path = cls._pyproject_path or DEFAULT_PYPROJECT_PATH
        if not path.exists() or tomllib is None:
            return {}
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except Exception:
            return {}
        return data.get("tool", {}).get("geneselect", {}) or {}

    @staticmethod
    def _get_defaults() -> dict[str, Any]:
        """Базовые настройки на случай отсутствия секции."""
        return {
            "LOG_PATH": "logs/geneselect.log",
            "LOG_LEVEL": "INFO",
            "OUT_DIR": "out",
            "DEFAULT_SEED": 42,
        }

    # --- публичный API ---
    def get(self, key: str, default: Any = None) -> Any:
        return self._settings.get(key, default)

    @property
    def log_path(self) -> Path:
        return Path(self.get("LOG_PATH", "logs/geneselect.log"))

    @property
    def log_level(self) -> str:
        return str(self.get("LOG_LEVEL", "INFO")).upper()

    @property
    def out_dir(self) -> Path:
        return Path(self.get("OUT_DIR", "out"))

    @property
    def default_seed(self) -> int:
        return int(self.get("DEFAULT_SEED", 42))

    @classmethod
    def reset(cls) -> None:
        cls._instance = None
        cls._settings = {}
        cls._pyproject_path = None


def get_settings(pyproject_path: Path | None = None) -> SettingsLoader:
    return SettingsLoader(pyproject_path)


def read_toml(path: str | Path) -> dict[str, Any]:
    """Читает TOML-файл конфигурации прогона."""
    if tomllib is None:  # pragma: no cover
        raise RuntimeError("нужен tomli для Python < 3.11")
    return tomllib.loads(Path(path).read_text(encoding="utf-8"))
