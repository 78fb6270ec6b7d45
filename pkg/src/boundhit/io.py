"""Flat-file emission and ingestion.

Everything written is plain CSV with LF endings: a `# key=value` prologue
carrying the resolved configuration, then a header row, then data rows.
Floats print as the shortest decimal that re-reads bitwise. All writes go
through a temp file in the target directory followed by an atomic rename,
so readers never observe a partial file.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from .fd import FieldGrid

FIELD_HEADER = "i,j,x,z,V"


def fmt(x: float) -> str:
    """Shortest decimal that round-trips the double exactly."""
    return repr(float(x))


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_prologue(config: dict) -> list[str]:
    return [f"# {k}={v}" for k, v in config.items()]


def write_table(path: str, header: str, rows, config: dict | None = None) -> None:
    """Write a CSV table with the standard prologue. rows yield sequences of
    cells; floats are formatted with fmt, everything else with str."""
    lines = config_prologue(config or {})
    lines.append(header)
    for row in rows:
        lines.append(",".join(
            fmt(c) if isinstance(c, float) else str(c) for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_field(path: str, field: FieldGrid, config: dict | None = None) -> None:
    """Emit a solved field as `i,j,x,z,V` rows in row-major node order."""
    N = field.N
    lines = config_prologue(config or {})
    lines.append(FIELD_HEADER)
    v = field.values
    for i in range(N + 1):
        x = fmt(i / N)
        for j in range(N + 1):
            lines.append(f"{i},{j},{x},{fmt(j / N)},{fmt(v[i, j])}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_field(path: str) -> tuple[FieldGrid, dict]:
    """Read a field written by write_field; returns the field and the
    prologue key=value pairs."""
    config: dict[str, str] = {}
    data: list[tuple[int, int, float]] = []
    with open(path, "r") as fh:
        header_seen = False
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if "=" in body:
                    k, _, val = body.partition("=")
                    config[k.strip()] = val.strip()
                continue
            if not header_seen:
                if line != FIELD_HEADER:
                    raise ValueError(
                        f"{path}: expected header {FIELD_HEADER!r}, got {line!r}")
                header_seen = True
                continue
            cells = line.split(",")
            if len(cells) != 5:
                raise ValueError(f"{path}: malformed row {line!r}")
            data.append((int(cells[0]), int(cells[1]), float(cells[4])))
    if not data:
        raise ValueError(f"{path}: no field rows")
    N = max(i for i, _, _ in data)
    if len(data) != (N + 1) ** 2:
        raise ValueError(
            f"{path}: expected {(N + 1) ** 2} rows for N={N}, got {len(data)}")
    values = np.full((N + 1, N + 1), np.nan)
    for i, j, v in data:
        values[i, j] = v
    if np.isnan(values).any():
        raise ValueError(f"{path}: missing nodes")
    return FieldGrid(N, values), config
