"""
Synthetic exploit catalogs and the trading calendar they live on
"""
import logging
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import EventCatalog, MarketPanel

logger = logging.getLogger(__name__)

CHAINS = ("ethereum", "bsc", "arbitrum", "polygon", "solana")


def trading_calendar(
    start: str, end: Optional[str] = None, periods: Optional[int] = None,
    holidays: Optional[Iterable[str]] = None,
) -> pd.DatetimeIndex:
    """Weekdays between start and end (or ``periods`` weekdays) minus holidays"""
    days = pd.bdate_range(start=start, end=end, periods=periods, name="date")
    if holidays:
        days = days.difference(pd.DatetimeIndex(pd.to_datetime(list(holidays))))
    return days


def _eligible_positions(
    calendar: pd.DatetimeIndex, window: Tuple[int, int], blackout: Optional[Iterable[str]]
) -> np.ndarray:
    # one extra leading day keeps the day-over-day change defined at the window start
    lo = -window[0] + 1
    hi = len(calendar) - window[1]
    if hi <= lo:
        raise DataError(
            f"calendar of {len(calendar)} days is shorter than the event window {window}"
        )
    positions = np.arange(lo, hi)
    if blackout:
        banned = calendar.isin(pd.DatetimeIndex(pd.to_datetime(list(blackout))))
        positions = positions[~banned[positions]]
    return positions


def gen_events(
    n_events: int,
    rng_seed: Optional[int],
    calendar: pd.DatetimeIndex,
    loss_log_mean: float = 16.98,
    loss_log_sd: float = 1.97,
    window: Tuple[int, int] = (-5, 3),
    blackout: Optional[Iterable[str]] = None,
    min_gap_days: int = 0,
    n_protocols: int = 20,
) -> EventCatalog:
    """Draw an exploit catalog

    Losses are lognormal; dates are uniform over calendar positions that leave room for
    the event window and avoid blackout days. With ``min_gap_days`` > 0 event dates are
    at least that many trading days apart.
    """
    if n_events < 0:
        raise DataError("n_events must be non-negative")
    if n_events == 0:
        return EventCatalog.empty()

    rng = np.random.default_rng(rng_seed)
    positions = _eligible_positions(calendar, window, blackout)
    if min_gap_days > 0:
        chosen = _spaced_draw(rng, positions, n_events, min_gap_days)
    else:
        chosen = rng.choice(positions, size=n_events, replace=True)

    losses = np.exp(rng.normal(loss_log_mean, loss_log_sd, n_events))
    # the exploited share of protocol TVL
    drained = rng.uniform(0.02, 0.5, n_events)
    protocols = rng.integers(0, n_protocols, n_events)
    chains = rng.integers(0, len(CHAINS), n_events)
    frame = pd.DataFrame(
        {
            "date": calendar[np.sort(chosen)],
            "protocol": [f"protocol_{p:02d}" for p in protocols],
            "chain": [CHAINS[c] for c in chains],
            "loss_usd": losses,
            "tvl_usd": losses / drained,
            "gas_gwei": 0.0,
        }
    )
    logger.info("Generated %d events, median loss $%.1fM", n_events, np.median(losses) / 1e6)
    return EventCatalog(frame)


def _spaced_draw(
    rng: np.random.Generator, positions: np.ndarray, n: int, gap: int
) -> np.ndarray:
    available = positions.copy()
    chosen = []
    for _ in range(n):
        if len(available) == 0:
            raise DataError(f"cannot place {n} events at least {gap} days apart")
        pick = available[rng.integers(len(available))]
        chosen.append(pick)
        available = available[np.abs(available - pick) >= gap]
    return np.asarray(chosen)


def with_panel_gas(events: EventCatalog, panel: MarketPanel) -> EventCatalog:
    """Copy of the catalog with gas at event taken from the panel"""
    if len(events) == 0:
        return events
    frame = events.frame.copy()
    frame["gas_gwei"] = panel.frame["gas_gwei"].reindex(events.dates).to_numpy()
    if frame["gas_gwei"].isna().any():
        raise DataError("some event dates are missing from the panel")
    return EventCatalog(frame)


def daily_losses(events: EventCatalog, calendar: pd.DatetimeIndex) -> pd.Series:
    """Total USD loss per calendar day"""
    series = pd.Series(0.0, index=calendar)
    if len(events):
        events.check_within(calendar)
        totals = events.frame.groupby("date")["loss_usd"].sum()
        series.loc[totals.index] = totals.to_numpy()
    return series


def event_positions(events: EventCatalog, calendar: pd.DatetimeIndex) -> np.ndarray:
    """Calendar positions of event dates"""
    events.check_within(calendar)
    return calendar.get_indexer(events.dates)
