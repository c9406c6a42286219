"""CSV/JSON reading and writing.

Return series are plain CSV: one value per row, or ``timestamp,value`` rows.
A header row is optional and detected by the last field failing to parse as
a number.  Every writer goes through :func:`atomic_write`, so a crashed run
never leaves a half-written file behind.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError
from .process import ReturnSeries

__all__ = [
    "atomic_write",
    "read_series",
    "write_series",
    "read_external_forecasts",
    "format_float",
    "rows_to_csv",
    "write_csv",
    "write_json",
]


def format_float(v) -> str:
    """Shortest round-trip representation; ``nan`` for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _umask() -> int:
    # mkstemp creates files 0600; give the final file the usual permissions
    mask = os.umask(0)
    os.umask(mask)
    return mask


def write_csv(path, header, rows) -> None:
    atomic_write(path, rows_to_csv(header, rows))


def write_json(path, data) -> None:
    atomic_write(path, json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _read_rows(path):
    """Non-blank CSV rows with their 1-based line numbers, header stripped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    rows = []
    for lineno, row in enumerate(csv.reader(_io.StringIO(text)), start=1):
        row = [c.strip() for c in row]
        if not row or all(c == "" for c in row) or row[0].startswith("#"):
            continue
        rows.append((lineno, row))
    if rows and not _is_number(rows[0][1][-1]):
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def read_series(path) -> ReturnSeries:
    """Parse a one- or two-column CSV of returns (column count fixed by the first data row)."""
    rows = _read_rows(path)
    width = len(rows[0][1])
    if width not in (1, 2):
        raise ParseError(f"{path}:{rows[0][0]}: expected 1 or 2 columns, got {width}")
    values, stamps = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            v = float(row[-1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: cannot parse {row[-1]!r} as a number") from None
        if not math.isfinite(v):
            raise ParseError(f"{path}:{lineno}: non-finite value {row[-1]!r}")
        values.append(v)
        if width == 2:
            stamps.append(row[0])
    return ReturnSeries(np.array(values), stamps if width == 2 else None, {"source": str(path)})


def write_series(path, series: ReturnSeries) -> None:
    if series.timestamps is not None:
        write_csv(path, ["timestamp", "value"], zip(series.timestamps, series.values.tolist()))
    else:
        write_csv(path, ["t", "value"], zip(range(1, series.n + 1), series.values.tolist()))


def read_external_forecasts(path) -> dict[int, float]:
    """Two-column CSV ``t, sigma_bar2`` of externally produced aggregated forecasts."""
    out = {}
    for lineno, row in _read_rows(path):
        if len(row) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 columns (t, forecast), got {len(row)}")
        try:
            t = int(row[0])
            v = float(row[1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: cannot parse {row!r}") from None
        if t in out:
            raise ParseError(f"{path}:{lineno}: duplicate origin {t}")
        out[t] = v
    return out
