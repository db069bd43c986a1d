"""
Tabular containers shared by the generators, parsers and estimators
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import AlignmentError, DataError

EVENT_COLUMNS = ["date", "protocol", "chain", "loss_usd", "tvl_usd", "gas_gwei"]

# Extra spread columns a multi-asset panel may carry for the cross-asset comparison
DID_ASSETS = ["aa_nonfin", "a2p2", "sofr", "aa_fin", "abcp"]


@dataclass
class EventCatalog:
    """Exploit events sorted by (aligned) event date"""

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        frame = self.frame.copy()
        missing = [c for c in EVENT_COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f"event catalog is missing columns: {', '.join(missing)}")
        frame["date"] = pd.to_datetime(frame["date"]).dt.normalize()
        if "disclosure_date" in frame.columns:
            frame["disclosure_date"] = pd.to_datetime(frame["disclosure_date"]).dt.normalize()
        if len(frame):
            if (frame["loss_usd"] <= 0).any():
                raise DataError("loss_usd must be positive")
            if (frame["tvl_usd"] <= 0).any():
                raise DataError("tvl_usd must be positive")
            if (frame["loss_usd"] > frame["tvl_usd"]).any():
                bad = frame.index[frame["loss_usd"] > frame["tvl_usd"]][0]
                raise DataError(f"loss_usd exceeds tvl_usd for event {bad}")
            if (frame["gas_gwei"] < 0).any():
                raise DataError("gas_gwei must be non-negative")
        frame = frame.sort_values("date", kind="mergesort").reset_index(drop=True)
        if "event_id" not in frame.columns:
            frame.insert(0, "event_id", np.arange(len(frame), dtype=int))
        self.frame = frame

    @classmethod
    def empty(cls) -> "EventCatalog":
        """Create a catalog with no events"""
        return cls(pd.DataFrame({c: pd.Series(dtype=float) for c in EVENT_COLUMNS}))

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def dates(self) -> pd.DatetimeIndex:
        """Event dates (t=0 of each window)"""
        return pd.DatetimeIndex(self.frame["date"])

    @property
    def log_loss(self) -> np.ndarray:
        """Natural log of USD losses"""
        return np.log(self.frame["loss_usd"].to_numpy(dtype=float))

    def with_dates(self, dates: Sequence[pd.Timestamp]) -> "EventCatalog":
        """Copy of the catalog with replaced event dates"""
        frame = self.frame.copy()
        frame["date"] = pd.DatetimeIndex(dates)
        return EventCatalog(frame)

    def check_within(self, calendar: pd.DatetimeIndex) -> None:
        """Raise if any event falls outside the calendar"""
        outside = ~self.dates.isin(calendar)
        if outside.any():
            first = self.dates[outside][0].date()
            raise AlignmentError(f"event on {first} is not a calendar day of the panel")


@dataclass
class MarketPanel:
    """Date-indexed market series; optional per-day model states and ground truth"""

    frame: pd.DataFrame
    states: Tuple[Any, ...] = ()
    truth: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        frame = self.frame
        if not isinstance(frame.index, pd.DatetimeIndex):
            raise AlignmentError("market panel must be indexed by date")
        if frame.index.has_duplicates:
            dup = frame.index[frame.index.duplicated()][0].date()
            raise AlignmentError(f"duplicate date {dup} in market panel")
        if not frame.index.is_monotonic_increasing:
            raise AlignmentError("market panel dates must be strictly increasing")
        if frame.isna().to_numpy().any():
            column = frame.columns[frame.isna().any()][0]
            raise DataError(f"market panel column '{column}' has missing values")
        frame.index.name = "date"

    @property
    def dates(self) -> pd.DatetimeIndex:
        """Trading calendar of the panel"""
        return pd.DatetimeIndex(self.frame.index)

    def state_on(self, date: pd.Timestamp) -> Any:
        """Get the simulated intermediate state for a day"""
        if not self.states:
            raise DataError("panel carries no simulated states")
        position = self.dates.get_loc(pd.Timestamp(date))
        return self.states[position]

    def assets(self) -> List[str]:
        """Names of extra asset spread columns present"""
        return [a for a in DID_ASSETS if a in self.frame.columns]


@dataclass
class StackedPanel:
    """Long-form event x relative-day (or asset x day) observation table"""

    frame: pd.DataFrame
    window: Tuple[int, int]
    outcome: str = "cp_spread_bps"
    controls: Tuple[str, ...] = ()
    dropped_events: Tuple[int, ...] = ()
    warnings: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def n_events(self) -> int:
        """Number of stacked events"""
        return int(self.frame["event_id"].nunique())

    @property
    def window_days(self) -> List[int]:
        """Relative days of the window in order"""
        return list(range(self.window[0], self.window[1] + 1))


@dataclass
class MonthlyPanel:
    """Month-level aggregates of event-window spreads"""

    frame: pd.DataFrame
    warnings: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frame)

    def change_rows(self) -> pd.DataFrame:
        """Rows usable in the change specification (first difference defined)"""
        return self.frame.dropna(subset=["d_spread_m"])
