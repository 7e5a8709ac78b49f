"""Утилиты под руку: сиды, хэши, округление."""

from __future__ import annotations

import hashlib
import math
from datetime import datetime, timezone
from pathlib import Path


def derive_seed(*parts: object) -> int:
    """Детерминированный сид из набора частей (мастер-сид, тег, номер прогона...)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def file_sha256(path: str | Path) -> str:
    """SHA-256 файла в hex, читаю кусками чтобы не грузить всё сразу."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def round_half_up(value: float) -> int:
    """round() в питоне банковский, здесь 0.5 всегда вверх."""
    return int(math.floor(value + 0.5))


def now_iso() -> str:
    """Текущее время UTC в iso."""
    return datetime.now(timezone.utc).isoformat()
