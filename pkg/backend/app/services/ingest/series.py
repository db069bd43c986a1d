"""
Market series parsing and calendar alignment
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import MarketPanel

logger = logging.getLogger(__name__)

FORMATS = ("fred_csv", "plain_csv")
FRED_MISSING = "."
HEADER_LINES = 1
# FRED rates are quoted in percent; spreads are carried in basis points
PERCENT_TO_BPS = 100.0


@dataclass
class RawSeries:
    """One parsed input series before alignment"""

    name: str
    values: pd.Series
    source: str

    def __len__(self) -> int:
        return len(self.values)


def _line(position: int) -> int:
    return position + HEADER_LINES + 1


def parse_series(
    path: Union[str, Path], fmt: str = "fred_csv", name: Optional[str] = None
) -> RawSeries:
    """Read a two-column (date, value) CSV

    FRED files mark missing observations with "."; in both formats an empty cell is
    missing. Unparseable cells and duplicate dates raise with the offending line number.
    """
    if fmt not in FORMATS:
        raise DataError(f"unknown series format '{fmt}'")
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise DataError(f"{path} needs a date column and a value column")

    dates_text = raw.iloc[:, 0].str.strip()
    values_text = raw.iloc[:, 1].str.strip()
    dates = pd.to_datetime(dates_text, format="%Y-%m-%d", errors="coerce")
    bad_dates = np.flatnonzero(dates.isna().to_numpy())
    if len(bad_dates):
        i = int(bad_dates[0])
        raise DataError(f"unparseable date '{dates_text.iloc[i]}'", line=_line(i))

    missing = values_text == ""
    if fmt == "fred_csv":
        missing |= values_text == FRED_MISSING
    values = pd.to_numeric(values_text.where(~missing), errors="coerce")
    bad_values = np.flatnonzero((values.isna() & ~missing).to_numpy())
    if len(bad_values):
        i = int(bad_values[0])
        raise DataError(f"unparseable value '{values_text.iloc[i]}'", line=_line(i))

    duplicated = np.flatnonzero(dates.duplicated().to_numpy())
    if len(duplicated):
        i = int(duplicated[0])
        raise DataError(f"duplicate date {dates.iloc[i].date()}", line=_line(i))

    series_name = name or str(raw.columns[1]).strip()
    series = pd.Series(
        values.to_numpy(dtype=float), index=pd.DatetimeIndex(dates), name=series_name
    )
    logger.info("Parsed %s: %d rows, %d missing", series_name, len(series), int(missing.sum()))
    return RawSeries(name=series_name, values=series.sort_index(), source=fmt)


def _longest_gap(observed: np.ndarray) -> Tuple[int, int]:
    """Length and start position of the longest run of missing entries"""
    best, best_start, run, start = 0, -1, 0, 0
    for i, seen in enumerate(observed):
        if seen:
            run = 0
            continue
        if run == 0:
            start = i
        run += 1
        if run > best:
            best, best_start = run, start
    return best, best_start


def align_and_fill(
    series: Mapping[str, RawSeries],
    calendar: Optional[pd.DatetimeIndex] = None,
    max_gap: int = 5,
    spreads: Optional[Dict[str, Tuple[str, str]]] = None,
) -> MarketPanel:
    """Put every series on one trading calendar and forward-fill short gaps

    Args:
        series: parsed inputs keyed by output column name
        calendar: target days; default the weekdays of the overlapping coverage
        max_gap: longest run of consecutive missing calendar days that may be filled
        spreads: output column -> (rate column, T-bill column), built in basis points
    """
    if not series:
        raise DataError("no series to align")
    observed = {k: s.values.dropna() for k, s in series.items()}
    empty = [k for k, v in observed.items() if v.empty]
    if empty:
        raise DataError(f"series without observations: {', '.join(empty)}")
    start = max(v.index.min() for v in observed.values())
    end = min(v.index.max() for v in observed.values())
    if start > end:
        raise DataError("series have no overlapping date coverage")
    if calendar is None:
        calendar = pd.bdate_range(start, end, name="date")
    else:
        calendar = pd.DatetimeIndex(calendar)
        calendar = calendar[(calendar >= start) & (calendar <= end)]
    if len(calendar) == 0:
        raise DataError("calendar does not intersect the overlapping coverage")

    columns = {}
    for key, values in observed.items():
        present = calendar.isin(values.index)
        gap, at = _longest_gap(present)
        if gap > max_gap:
            raise DataError(
                f"series '{key}' has {gap} consecutive missing days from "
                f"{calendar[at].date()} (max_gap={max_gap})"
            )
        merged = values.reindex(values.index.union(calendar)).ffill()
        columns[key] = merged.reindex(calendar)

    frame = pd.DataFrame(columns, index=calendar)
    for name, (rate, tbill) in (spreads or {}).items():
        if rate not in frame.columns or tbill not in frame.columns:
            raise DataError(f"spread '{name}' needs columns '{rate}' and '{tbill}'")
        frame[name] = (frame[rate] - frame[tbill]) * PERCENT_TO_BPS
    frame.index.name = "date"
    return MarketPanel(frame)
