"""Small file helpers: atomic text writes and fixed-precision CSV rows."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence


def atomic_write_text(path, text: str) -> Path:
    """Write ``text`` to ``path`` via a temp file in the same directory plus ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(value, digits: int = 9) -> str:
    if isinstance(value, (str, bool)):
        return str(value)
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    v = float(value)
    if v == 0.0:
        return "0"
    return f"{v:.{digits}g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence], digits: int = 9) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v, digits) for v in row))
    return "\n".join(lines) + "\n"
