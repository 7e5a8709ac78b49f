"""Пользовательские исключения."""

from __future__ import annotations


class GeneSelectError(Exception):
    """Базовая ошибка, от неё всё остальное наследую."""


class FormatError(GeneSelectError):
    """Файл матрицы кривой: строки разной длины и т.п."""

    def __init__(self, reason: str, path: str | None = None, row: int | None = None) -> None:
        self.path = path
        self.row = row
        where = ""
        if path is not None:
            where += f" [{path}"
            where += f", строка {row}]" if row is not None else "]"
        elif row is not None:
            where = f" [строка {row}]"
        super().__init__(f"Неверный формат: {reason}{where}")


class ParseError(GeneSelectError):
    """Не смогли разобрать токен (число или метку)."""

    def __init__(self, token: str, location: str) -> None:
        self.token = token
        self.location = location
        super().__init__(f"Не удалось разобрать '{token}' ({location})")


class EmptyInputError(GeneSelectError):
    """Пустой файл или пустой набор данных."""


class AlignmentError(GeneSelectError):
    """Число меток не совпадает с числом образцов."""

    def __init__(self, expected: int, actual: int, path: str | None = None) -> None:
        self.expected = expected
        self.actual = actual
        self.path = path
        where = f" [{path}]" if path is not None else ""
        super().__init__(f"Число меток {actual} не совпадает с числом образцов {expected}{where}")


class StateError(GeneSelectError):
    """Объект не в том состоянии (например, данные уже отмасштабированы)."""


class DegenerateMaskError(GeneSelectError):
    """Маска без единиц: обучать не на чем."""

    def __init__(self) -> None:
        super().__init__("Маска признаков пустая (ни одного выбранного гена)")


class DimensionError(GeneSelectError):
    """Размерности не сходятся."""

    def __init__(self, expected: int, actual: int, what: str = "вектор") -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"Неверная размерность ({what}): ожидали {expected}, получили {actual}")


class ConfigError(GeneSelectError):
    """Кривая конфигурация, по возможности с именем ключа."""

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        prefix = f"{key}: " if key else ""
        super().__init__(f"Ошибка конфигурации: {prefix}{message}")


class FitnessError(GeneSelectError):
    """Функция приспособленности вернула что-то не то (NaN)."""

    def __init__(self, chromosome: str, value: float) -> None:
        self.chromosome = chromosome
        self.value = value
        super().__init__(f"Fitness вернул {value} для хромосомы {chromosome}")


class StratificationWarning(UserWarning):
    """Сплит получился без одного из классов, не фатально."""
