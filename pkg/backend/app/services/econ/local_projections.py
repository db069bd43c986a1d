"""
Local projections of the cumulative spread change on exploit shocks
"""
import logging
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from app.core.exceptions import DataError, EstimatorError
from app.core.panels import EventCatalog, MarketPanel
from app.services.econ.linear import RegressionResult, ols

logger = logging.getLogger(__name__)

SHOCK = "shock"
SHOCK_KINDS = ("binary", "log_loss")


def shock_series(
    events: EventCatalog, calendar: pd.DatetimeIndex, kind: str = "binary"
) -> pd.Series:
    """Daily shock: an event-day indicator or the log of that day's total loss"""
    if kind not in SHOCK_KINDS:
        raise EstimatorError(f"unknown shock definition '{kind}'")
    events.check_within(calendar)
    shock = pd.Series(0.0, index=calendar, name=SHOCK)
    if len(events) == 0:
        return shock
    if kind == "binary":
        shock[calendar.isin(events.dates)] = 1.0
    else:
        totals = events.frame.groupby("date")["loss_usd"].sum()
        shock.loc[totals.index] = np.log(totals.to_numpy())
    return shock


def local_projections(
    panel: MarketPanel,
    shock: pd.Series,
    horizons: int = 6,
    controls: Sequence[str] = ("vix", "dxy"),
    n_lags: int = 1,
    outcome: str = "cp_spread_bps",
) -> Dict[int, RegressionResult]:
    """One regression per horizon h = 0..H of y_{t+h} - y_{t-1} on the shock

    Lagged controls are the listed level series and the outcome change, each at lags
    1..n_lags. Errors are Newey-West with bandwidth h + 1.
    """
    y = panel.frame[outcome].astype(float)
    if horizons < 0:
        raise EstimatorError("horizon must be non-negative")
    if horizons >= len(y):
        raise DataError(f"horizon {horizons} is not shorter than the series ({len(y)} days)")
    shock = shock.reindex(panel.dates)
    if shock.isna().any():
        raise DataError("shock series does not cover the panel calendar")

    lagged = {}
    change = y.diff()
    for j in range(1, n_lags + 1):
        lagged[f"d_{outcome}_lag{j}"] = change.shift(j)
        for c in controls:
            lagged[f"{c}_lag{j}"] = panel.frame[c].shift(j)
    base = pd.DataFrame({SHOCK: shock, **lagged}, index=panel.dates)

    results = {}
    for h in range(horizons + 1):
        target = y.shift(-h) - y.shift(1)
        keep = base.notna().all(axis=1) & target.notna()
        results[h] = ols(base[keep], target[keep], se_flavor="newey_west", nw_lag=h + 1)
    logger.info(
        "Local projections: beta_0 = %.3f, beta_%d = %.3f",
        results[0].coef(SHOCK), horizons, results[horizons].coef(SHOCK),
    )
    return results


def irf_table(results: Dict[int, RegressionResult]) -> pd.DataFrame:
    """Impulse response: one row per horizon with coefficient, SE, t, p and CI"""
    rows = []
    for h, fit in sorted(results.items()):
        row = fit.to_frame().set_index("term").loc[SHOCK].to_dict()
        rows.append({"h": h, **row, "n_obs": fit.n_obs})
    return pd.DataFrame(rows)
