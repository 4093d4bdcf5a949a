"""CSV/JSON emission, sojourn files and INI configuration.

CSV floats are written with 17 significant digits and JSON floats with the
shortest round-tripping repr, so a seeded job reproduces its files byte for
byte. Missing values are ``NA`` in CSV and ``null`` in JSON; non-finite
floats become the strings ``inf``, ``-inf`` and ``nan`` in JSON.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os

import numpy as np

from .errors import DataFormatError
from .sim import BIRTH, DEATH, SojournData

SCHEMA_VERSION = 1
SOJOURN_COLUMNS = ("state_before", "duration", "event_type")


def _fmt_csv(v):
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt_csv(x) for x in v)
    return str(v)


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def rows_to_csv(rows: list[dict], columns=None) -> str:
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt_csv(row.get(c)) for c in columns])
    return buf.getvalue()


def rows_to_json(rows: list[dict], kind: str, meta: dict | None = None) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "meta": meta or {}, "rows": rows}
    return json.dumps(_json_safe(doc), indent=2, allow_nan=False) + "\n"


def render(rows: list[dict], fmt: str, kind: str, meta: dict | None = None, columns=None) -> str:
    """Table text in ``csv`` or ``json``; the CSV carries no metadata."""
    if fmt == "csv":
        return rows_to_csv(rows, columns)
    if fmt == "json":
        return rows_to_json(rows, kind, meta)
    raise ValueError(f"unknown format {fmt!r}")


def sojourns_to_csv(data: SojournData) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SOJOURN_COLUMNS)
    for k, s, typ in data.records:
        w.writerow((k, format(s, ".17g"), typ))
    return buf.getvalue()


def read_sojourns(fh) -> SojournData:
    """Parse ``state_before,duration,event_type`` rows."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SOJOURN_COLUMNS:
        raise DataFormatError(f"expected header {','.join(SOJOURN_COLUMNS)}", line=1)
    states, durations, births = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DataFormatError(f"expected 3 fields, got {len(row)}", line=lineno)
        try:
            k = int(row[0])
            s = float(row[1])
        except ValueError as exc:
            raise DataFormatError(str(exc), line=lineno) from None
        typ = row[2].strip()
        if typ not in (BIRTH, DEATH):
            raise DataFormatError(f"unknown event type {typ!r}", line=lineno)
        if k < 0 or not (s > 0 and math.isfinite(s)):
            raise DataFormatError("state must be >= 0 and duration positive", line=lineno)
        states.append(k)
        durations.append(s)
        births.append(typ == BIRTH)
    return SojournData(np.array(states, dtype=np.int64), np.array(durations), np.array(births, dtype=bool))


def read_config(path, section: str) -> dict:
    """Key-value pairs for ``section`` layered over ``[fracqueue]`` from an INI file.

    Keys use the long option names with dashes or underscores.
    """
    if not os.path.exists(path):
        raise DataFormatError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise DataFormatError(f"bad config file: {exc}") from None
    out = {}
    for name in ("fracqueue", section):
        if cp.has_section(name):
            for k, v in cp.items(name):
                out[k.replace("-", "_")] = v
    return out
