"""Декораторы: сейчас только логирование действий."""

from __future__ import annotations

import functools
import inspect
import time
from collections.abc import Callable
from typing import Any, TypeVar

from geneselect_hub.logging_config import get_logger

F = TypeVar("F", bound=Callable[..., Any])

# что интересно вытащить из аргументов и из результата
_PARAM_KEYS = ("seed", "path", "matrix_path", "labels_path", "dataset_path", "bias_mode")
_RESULT_ATTRS = ("popcount", "fitness", "n_samples", "n_genes")


def log_action(action: str) -> Callable[[F], F]:
    """Логирует вызовы функций: что, с какими параметрами, сколько заняло."""

    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            logger = get_logger("actions")
            log_data: dict[str, Any] = {"action": action, "function": func.__name__}
            _extract_params(log_data, args, kwargs, func)

            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                log_data["result"] = "ERROR"
                log_data["error_type"] = type(e).__name__
                log_data["error_message"] = str(e)
                logger.warning(_format_log_message(log_data))
                raise

            _extract_result(log_data, result)
            log_data["elapsed_s"] = round(time.perf_counter() - start, 3)
            log_data["result"] = "OK"
            logger.info(_format_log_message(log_data))
            return result

        return wrapper  # type: ignore[return-value]

    return decorator


def _extract_params(
    log_data: dict[str, Any],
    args: tuple,
    kwargs: dict[str, Any],
    func: Callable,
) -> None:
    """Достаёт интересные параметры из args и kwargs."""
    try:
        bound = inspect.signature(func).bind_partial(*args, **kwargs)
    except TypeError:
        return
    for name, value in bound.arguments.items():
        if name in _PARAM_KEYS:
            log_data[name] = value
        elif name in ("ds", "dataset") and hasattr(value, "n_genes"):
            log_data["n_samples"] = value.n_samples
            log_data["n_genes"] = value.n_genes
        elif name == "cfg" and hasattr(value, "seed"):
            log_data["seed"] = value.seed


def _extract_result(log_data: dict[str, Any], result: Any) -> None:
    for attr in _RESULT_ATTRS:
        value = getattr(result, attr, None)
        if isinstance(value, int | float) and attr not in log_data:
            log_data[attr] = value


def _format_log_message(data: dict[str, Any]) -> str:
    """Собирает строку для логов."""
    parts = []
    for key, value in data.items():
        if isinstance(value, str) and " " in value:
            parts.append(f'{key}="{value}"')
        else:
            parts.append(f"{key}={value}")
    return " | ".join(parts)
