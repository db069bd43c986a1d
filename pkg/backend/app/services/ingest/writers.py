"""
CSV writers matching the parsers, so written files read back unchanged
"""
import logging
from pathlib import Path
from typing import Union

import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import EVENT_COLUMNS, EventCatalog, MarketPanel

logger = logging.getLogger(__name__)

DATE_FORMAT = "%Y-%m-%d"


def write_panel(panel: MarketPanel, path: Union[str, Path]) -> Path:
    """Write a market panel with a leading ISO date column"""
    path = Path(path)
    panel.frame.to_csv(path, date_format=DATE_FORMAT, index_label="date")
    return path


def read_panel(path: Union[str, Path]) -> MarketPanel:
    """Read a panel written by ``write_panel``"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read panel {path}: {exc}") from exc
    if "date" not in frame.columns:
        raise DataError(f"panel {path} has no date column")
    dates = pd.to_datetime(frame.pop("date"), format=DATE_FORMAT, errors="coerce")
    if dates.isna().any():
        raise DataError("unparseable panel date", line=int(dates.isna().to_numpy().argmax()) + 2)
    frame.index = pd.DatetimeIndex(dates, name="date")
    return MarketPanel(frame)


def write_events(events: EventCatalog, path: Union[str, Path]) -> Path:
    """Write an event catalog in the parser's column layout, already aligned"""
    path = Path(path)
    frame = events.frame[EVENT_COLUMNS].copy()
    frame["session"] = "regular"
    frame.to_csv(path, index=False, date_format=DATE_FORMAT)
    return path


def write_holdings(holdings: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write monthly holdings shares with the month as YYYY-MM"""
    path = Path(path)
    out = holdings.copy()
    out["month"] = pd.PeriodIndex(out["month"], freq="M").astype(str)
    out.to_csv(path, index=False)
    return path


def read_holdings(path: Union[str, Path]) -> pd.DataFrame:
    """Read monthly holdings shares written by ``write_holdings``"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read holdings {path}: {exc}") from exc
    if "month" not in frame.columns or "hack_month" not in frame.columns:
        raise DataError(f"holdings {path} needs month and hack_month columns")
    frame["month"] = pd.PeriodIndex(frame["month"], freq="M")
    return frame


def write_weights(weights: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write the date x protocol market-share table"""
    path = Path(path)
    weights.to_csv(path, date_format=DATE_FORMAT, index_label="date")
    return path


def read_weights(path: Union[str, Path]) -> pd.DataFrame:
    """Read market shares; empty cells mark inactive protocols"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip", index_col="date")
    except (OSError, ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"cannot read weights {path}: {exc}") from exc
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame.index, format=DATE_FORMAT), name="date")
    return frame
