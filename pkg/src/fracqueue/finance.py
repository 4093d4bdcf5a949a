"""Turning a sampled index series into birth-death sojourn data.

Each up-move of the index is a birth and each down-move a death. Time is
measured in sampling intervals (one row = one unit), and unchanged rows are
dropped with their elapsed time added to the next move.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InsufficientDataError
from .sim import SojournData

SERIES_COLUMNS = ("date", "value")


@dataclass(frozen=True)
class FinancialSeries:
    dates: tuple
    values: np.ndarray
    sampling_interval: str = "1 period"

    def __len__(self):
        return len(self.dates)

    def changes(self) -> np.ndarray:
        return np.diff(self.values)

    def counts(self) -> tuple[int, int, int]:
        """Numbers of positive, negative and zero changes."""
        d = self.changes()
        return int(np.sum(d > 0)), int(np.sum(d < 0)), int(np.sum(d == 0))


def _parse_date(text):
    text = text.strip()
    if len(text) == 7:  # YYYY-MM
        text += "-01"
    return dt.date.fromisoformat(text)


def ingest_series(source, sampling_interval: str = "1 period") -> FinancialSeries:
    """Read a ``date,value`` CSV with ISO-8601 dates.

    ``source`` is a path or an open text file. Rows are sorted by date.

    Raises
    ------
    DataFormatError
        For a bad header, an unparseable row (with its line number),
        duplicate dates or fewer than two rows.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return ingest_series(fh, sampling_interval)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip().lower() for h in header) != SERIES_COLUMNS:
        raise DataFormatError("expected header 'date,value'", line=1)
    rows = []
    seen = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise DataFormatError(f"expected 2 fields, got {len(row)}", line=lineno)
        try:
            d = _parse_date(row[0])
        except ValueError:
            raise DataFormatError(f"bad date {row[0]!r}", line=lineno) from None
        try:
            v = float(row[1])
        except ValueError:
            raise DataFormatError(f"bad value {row[1]!r}", line=lineno) from None
        if not np.isfinite(v):
            raise DataFormatError("value must be finite", line=lineno)
        if d in seen:
            raise DataFormatError(f"duplicate date {d.isoformat()} (first on line {seen[d]})", line=lineno)
        seen[d] = lineno
        rows.append((d, v))
    if len(rows) < 2:
        raise DataFormatError("need at least 2 observations")
    rows.sort(key=lambda r: r[0])
    return FinancialSeries(tuple(r[0] for r in rows), np.array([r[1] for r in rows]), sampling_interval)


def series_to_sojourns(series: FinancialSeries) -> SojournData:
    """Sojourns in sampling-interval units from the signs of successive changes.

    The level used as ``state_before`` is the running count of births minus
    deaths, shifted so that it never drops below 1; it only matters for
    estimators that use the state, and the queue estimator does not.
    """
    d = series.changes()
    moves = np.flatnonzero(d != 0)
    if moves.size == 0:
        raise InsufficientDataError("series has no non-zero changes")
    births = d[moves] > 0
    durations = np.diff(np.concatenate(([-1], moves))).astype(float)
    steps = np.where(births, 1, -1)
    walk = np.concatenate(([0], np.cumsum(steps)[:-1]))
    states = walk + 1 + max(0, -int(walk.min()))
    meta = {
        "time_unit": series.sampling_interval,
        "zero_changes": "dropped; elapsed time carried into the next move",
        "n_zero_changes": int(np.sum(d == 0)),
    }
    return SojournData(states, durations, births, meta)


def series_to_csv(series: FinancialSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for d, v in zip(series.dates, series.values):
        w.writerow((d.isoformat(), format(float(v), ".17g")))
    return buf.getvalue()
