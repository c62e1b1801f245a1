"""
Plain-text documents: key/value parameter files, configs and tables.

All writers go through :func:`atomic_write`, so a failed run never leaves a
half-written file behind.  Floats are written with ``repr`` and round-trip
exactly.
"""

from __future__ import annotations

import csv
import io as _io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from garchnn.exceptions import DataError

__all__ = [
    "atomic_write",
    "format_value",
    "parse_value",
    "write_params",
    "read_params",
    "read_config",
    "write_table",
    "read_table",
]


def atomic_write(path: str | Path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_value(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def parse_value(text: str):
    """Best-effort typed parse: bool, int, float, comma list, else string."""
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in t:
        return tuple(parse_value(x) for x in t.split(",") if x.strip())
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def _dump(pairs: Iterable[tuple[str, object]]) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in pairs)


def _load(path: str | Path) -> dict:
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in out:
                raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = parse_value(value)
    return out


def write_params(path: str | Path, kind: str, values: Mapping[str, float],
                 meta: Mapping[str, object] | None = None) -> Path:
    """Parameter or checkpoint document.

    Metadata lines (``kind`` and anything in ``meta``) come first, then one
    ``param.<name> = <value>`` line per parameter.
    """
    pairs = [("kind", kind)]
    pairs += [(k, v) for k, v in (meta or {}).items()]
    pairs += [(f"param.{k}", float(v)) for k, v in values.items()]
    return atomic_write(path, _dump(pairs))


def read_params(path: str | Path) -> tuple[str, dict, dict]:
    """Inverse of :func:`write_params`: ``(kind, values, meta)``."""
    doc = _load(path)
    if "kind" not in doc:
        raise DataError(f"{path}: missing 'kind'")
    kind = str(doc.pop("kind"))
    values = {k[6:]: float(v) for k, v in doc.items() if k.startswith("param.")}
    meta = {k: v for k, v in doc.items() if not k.startswith("param.")}
    return kind, values, meta


def read_config(path: str | Path) -> dict:
    """``key = value`` config document with typed values."""
    return _load(path)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], delimiter: str = ",") -> Path:
    buf = _io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) for x in row])
    return atomic_write(path, buf.getvalue())


def read_table(path: str | Path, delimiter: str = ",") -> tuple[list[str], list[list]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader)
        rows = [[parse_value(x) for x in row] for row in reader]
    return header, rows
