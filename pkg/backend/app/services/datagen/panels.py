"""
Assembly of estimation-ready panels: stacked event windows, monthly aggregates and
the asset x day panel of the cross-asset comparison
"""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import EventCatalog, MarketPanel, MonthlyPanel, StackedPanel

logger = logging.getLogger(__name__)

DEFAULT_CONTROLS = ("vix", "dxy", "btc_return")


def build_stacked_panel(
    panel: MarketPanel,
    events: EventCatalog,
    window: Tuple[int, int] = (-5, 3),
    controls: Sequence[str] = DEFAULT_CONTROLS,
    outcome: str = "cp_spread_bps",
    extra: Sequence[str] = (),
) -> StackedPanel:
    """Stack one copy of the window around every event

    Events lacking full window coverage are dropped with a warning. Overlapping windows
    are kept, each event contributing its own copy of the shared days.
    """
    lo, hi = window
    if not lo <= -1 < hi:
        raise DataError(f"window {window} must contain the baseline day -1 and day 0")
    frame = panel.frame
    needed = [outcome, *controls, *extra]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise DataError(f"panel is missing columns: {', '.join(missing)}")
    if len(events) == 0:
        raise DataError("stacked panel would be empty: no events")

    calendar = panel.dates
    events.check_within(calendar)
    positions = calendar.get_indexer(events.dates)
    ks = np.arange(lo, hi + 1)
    covered = (positions + lo >= 0) & (positions + hi < len(calendar))

    warnings: List[str] = []
    event_ids = events.frame["event_id"].to_numpy()
    dropped = tuple(int(e) for e in event_ids[~covered])
    if dropped:
        message = f"dropped {len(dropped)} event(s) without full window coverage: {list(dropped)}"
        logger.warning(message)
        warnings.append(message)
    if not covered.any():
        raise DataError("stacked panel would be empty: no event has full window coverage")

    kept = np.flatnonzero(covered)
    rows = (positions[kept][:, None] + ks[None, :]).ravel()
    values = frame[needed].to_numpy(dtype=float)[rows]
    change = frame[outcome].diff().to_numpy(dtype=float)[rows]

    catalog = events.frame.iloc[kept]
    stacked = pd.DataFrame(values, columns=needed)
    stacked.insert(0, "event_id", np.repeat(event_ids[kept], len(ks)))
    stacked.insert(1, "date", calendar[rows])
    stacked.insert(2, "k", np.tile(ks, len(kept)))
    stacked["d_" + outcome] = change
    stacked["post"] = (stacked["k"] >= 0).astype(float)
    stacked["event_date"] = np.repeat(catalog["date"].to_numpy(), len(ks))
    stacked["loss_usd"] = np.repeat(catalog["loss_usd"].to_numpy(), len(ks))
    stacked["log_loss"] = np.log(stacked["loss_usd"])
    stacked["gas_event"] = np.repeat(catalog["gas_gwei"].to_numpy(), len(ks))
    return StackedPanel(
        frame=stacked,
        window=(lo, hi),
        outcome=outcome,
        controls=tuple(controls),
        dropped_events=dropped,
        warnings=warnings,
    )


def _standardize(values: pd.Series, warnings: List[str]) -> pd.Series:
    sd = values.std(ddof=0)
    if not np.isfinite(sd) or sd <= 1e-12:
        message = "prime CP share has zero variance; pcs_z set to zero"
        logger.warning(message)
        warnings.append(message)
        return pd.Series(0.0, index=values.index)
    return (values - values.mean()) / sd


def aggregate_monthly(
    stacked: StackedPanel,
    panel: MarketPanel,
    prime_share: pd.Series,
    hack_dates: Iterable[pd.Timestamp],
    controls: Sequence[str] = DEFAULT_CONTROLS,
) -> MonthlyPanel:
    """Monthly averages over the distinct event-window days of each month"""
    window_days = pd.DatetimeIndex(stacked.frame["date"].unique()).sort_values()
    days = panel.frame.loc[window_days, [stacked.outcome, *controls]]
    months = days.index.to_period("M")
    grouped = days.groupby(months).mean()
    grouped.index.name = "month"

    share = prime_share.copy()
    share.index = pd.PeriodIndex(share.index, freq="M") if not isinstance(
        share.index, pd.PeriodIndex
    ) else share.index
    absent = grouped.index.difference(share.index)
    if len(absent):
        raise DataError(f"prime share series does not cover months: {[str(m) for m in absent]}")

    warnings: List[str] = []
    monthly = pd.DataFrame(index=grouped.index)
    monthly["spread_m"] = grouped[stacked.outcome]
    previous = monthly["spread_m"].reindex(monthly.index - 1).to_numpy()
    monthly["d_spread_m"] = monthly["spread_m"].to_numpy() - previous
    hack_months = pd.DatetimeIndex(list(hack_dates)).to_period("M")
    monthly["hack_month"] = monthly.index.isin(hack_months).astype(float)
    monthly["pcs"] = share.reindex(monthly.index).to_numpy()
    monthly["pcs_z"] = _standardize(monthly["pcs"], warnings)
    for c in controls:
        monthly[c] = grouped[c]
    monthly["n_days"] = days.groupby(months).size()
    return MonthlyPanel(frame=monthly.reset_index(), warnings=warnings)


def build_did_panel(
    panel: MarketPanel,
    events: EventCatalog,
    treat_asset: str = "aa_nonfin",
    window: Tuple[int, int] = (-5, 5),
    control_assets: Optional[Sequence[str]] = None,
    tbill: Optional[str] = None,
) -> StackedPanel:
    """Event x asset x relative-day panel with a treatment flag

    When ``tbill`` names a column of raw T-bill rates, asset columns are read as raw rates
    and converted to spreads. Days with a missing rate are deleted, not interpolated.
    """
    frame = panel.frame
    if treat_asset not in frame.columns:
        raise DataError(f"treated asset '{treat_asset}' is not in the panel")
    controls = list(control_assets) if control_assets else [
        a for a in panel.assets() if a != treat_asset
    ]
    controls = [a for a in controls if a in frame.columns and a != treat_asset]
    if not controls:
        raise DataError("cross-asset panel needs at least one control asset")
    assets = [treat_asset, *controls]

    rates = frame[assets].astype(float)
    if tbill is not None:
        rates = rates.sub(frame[tbill], axis=0)

    calendar = panel.dates
    events.check_within(calendar)
    positions = calendar.get_indexer(events.dates)
    lo, hi = window
    ks = np.arange(lo, hi + 1)
    pieces = []
    for event_id, pos in zip(events.frame["event_id"].to_numpy(), positions):
        if pos + lo < 0 or pos + hi >= len(calendar):
            logger.warning("Event %s lacks full window coverage; dropped", event_id)
            continue
        block = rates.iloc[pos + lo : pos + hi + 1]
        long = block.assign(k=ks).melt(id_vars="k", var_name="asset", value_name="spread")
        long["date"] = np.tile(calendar[pos + lo : pos + hi + 1], len(assets))
        long["event_id"] = int(event_id)
        pieces.append(long)
    if not pieces:
        raise DataError("cross-asset panel would be empty")

    did = pd.concat(pieces, ignore_index=True)
    before = len(did)
    did = did.dropna(subset=["spread"]).reset_index(drop=True)
    if len(did) < before:
        logger.info("Deleted %d asset-days with missing rates", before - len(did))
    did["treat"] = (did["asset"] == treat_asset).astype(float)
    did = did[["event_id", "asset", "date", "k", "spread", "treat"]]
    return StackedPanel(frame=did, window=window, outcome="spread")


def reference_dates(calendar: pd.DatetimeIndex, events: EventCatalog) -> pd.DatetimeIndex:
    """Middle trading day of every month without an exploit

    Windows around these days give the monthly aggregation its non-hack months.
    """
    months = calendar.to_period("M")
    hit = set(events.dates.to_period("M")) if len(events) else set()
    picks = []
    for month in months.unique():
        if month in hit:
            continue
        days = calendar[months == month]
        picks.append(days[len(days) // 2])
    return pd.DatetimeIndex(picks, name="date")


def monthly_windows(
    panel: MarketPanel,
    events: EventCatalog,
    window: Tuple[int, int] = (-5, 3),
    controls: Sequence[str] = DEFAULT_CONTROLS,
    outcome: str = "cp_spread_bps",
) -> StackedPanel:
    """Event windows plus reference windows in every month without an exploit"""
    picks = reference_dates(panel.dates, events)
    reference = pd.DataFrame(
        {
            "date": picks,
            "protocol": "reference",
            "chain": "none",
            "loss_usd": 1.0,
            "tvl_usd": 1.0,
            "gas_gwei": 0.0,
        }
    )
    combined = pd.concat([events.frame[reference.columns], reference], ignore_index=True)
    return build_stacked_panel(
        panel, EventCatalog(combined), window=window, controls=controls, outcome=outcome
    )
