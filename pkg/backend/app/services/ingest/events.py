"""
Exploit list parsing with trading-session alignment
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import EVENT_COLUMNS, EventCatalog

logger = logging.getLogger(__name__)

SESSIONS = ("regular", "after_hours", "weekend")
NUMERIC_COLUMNS = ("loss_usd", "tvl_usd", "gas_gwei")


def next_trading_day(
    date: pd.Timestamp, calendar: Optional[pd.DatetimeIndex], strictly_after: bool
) -> pd.Timestamp:
    """First trading day after (or on) a date"""
    if calendar is None:
        offset = pd.offsets.BDay(1)
        return date + offset if strictly_after else offset.rollforward(date)
    side = "right" if strictly_after else "left"
    position = int(calendar.searchsorted(date, side=side))
    if position >= len(calendar):
        raise DataError(f"no trading day after {date.date()} in the calendar")
    return calendar[position]


def parse_events(
    path: Union[str, Path],
    calendar: Optional[pd.DatetimeIndex] = None,
    use_disclosure: bool = True,
) -> EventCatalog:
    """Read an exploit list and align each event to its t=0 trading day

    After-hours events move to the next trading day; weekend events and any date that is
    not a trading day roll forward. When a disclosure date is given it becomes t=0 and the
    occurrence date is kept as ``occurrence_date``.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in EVENT_COLUMNS if c not in raw.columns]
    if missing:
        raise DataError(f"{path} is missing columns: {', '.join(missing)}")
    if calendar is not None:
        calendar = pd.DatetimeIndex(calendar)

    records = []
    for i, row in raw.iterrows():
        line = int(i) + 2
        date = pd.to_datetime(row["date"].strip(), format="%Y-%m-%d", errors="coerce")
        if pd.isna(date):
            raise DataError(f"unparseable date '{row['date']}'", line=line)
        numbers = {}
        for column in NUMERIC_COLUMNS:
            value = pd.to_numeric(row[column].strip() or np.nan, errors="coerce")
            if pd.isna(value):
                raise DataError(f"malformed {column} '{row[column]}'", line=line)
            numbers[column] = float(value)
        if numbers["loss_usd"] > numbers["tvl_usd"]:
            raise DataError("loss_usd exceeds tvl_usd", line=line)
        session = (row.get("session") or "regular").strip() or "regular"
        if session not in SESSIONS:
            raise DataError(f"unknown session '{session}'", line=line)

        aligned = next_trading_day(date, calendar, strictly_after=session == "after_hours")
        record = {
            "date": aligned,
            "occurrence_date": date,
            "protocol": row["protocol"].strip(),
            "chain": row["chain"].strip(),
            **numbers,
        }
        disclosed = (row.get("disclosure_date") or "").strip()
        if disclosed:
            when = pd.to_datetime(disclosed, format="%Y-%m-%d", errors="coerce")
            if pd.isna(when):
                raise DataError(f"unparseable disclosure_date '{disclosed}'", line=line)
            record["disclosure_date"] = next_trading_day(when, calendar, strictly_after=False)
            if use_disclosure:
                record["date"] = record["disclosure_date"]
        records.append(record)

    frame = pd.DataFrame(records, columns=[*EVENT_COLUMNS, "occurrence_date", "disclosure_date"])
    if not frame["disclosure_date"].notna().any():
        frame = frame.drop(columns=["disclosure_date"])
    shifted = int((frame["date"] != frame["occurrence_date"]).sum()) if len(frame) else 0
    logger.info("Parsed %d events from %s (%d re-aligned)", len(frame), path.name, shifted)
    return EventCatalog(frame)


def read_date_list(path: Union[str, Path]) -> pd.DatetimeIndex:
    """One ISO date per line; blank lines and ``#`` comments are skipped"""
    dates = []
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        date = pd.to_datetime(line, format="%Y-%m-%d", errors="coerce")
        if pd.isna(date):
            raise DataError(f"unparseable date '{line}'", line=number)
        dates.append(date)
    return pd.DatetimeIndex(dates, name="date")
