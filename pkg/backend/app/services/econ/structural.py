"""
Structural readings of the reduced-form estimates: eta recovery, the friction check and the
event-day level-shift regression
"""
import logging
from typing import Dict, Sequence

import numpy as np
import pandas as pd

from app.core.exceptions import DataError, DomainError
from app.core.panels import EventCatalog, MarketPanel
from app.services.econ.linear import RegressionResult, ols

logger = logging.getLogger(__name__)

Z_95 = 1.96
LAMBDA_GRID = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0)


def eta_recovery(
    beta_bps: float, se_beta: float, lambda_grid: Sequence[float] = LAMBDA_GRID
) -> pd.DataFrame:
    """Invert beta = lambda (1 - eta) across a grid of price-impact coefficients

    Returns one row per lambda with eta, its standard error and the normal 95% interval.
    """
    lambdas = np.asarray(list(lambda_grid), dtype=float)
    if np.any(lambdas <= 0):
        raise DomainError("price-impact coefficient lambda must be positive")
    if se_beta < 0:
        raise DomainError("standard error must be non-negative")
    eta = 1.0 - beta_bps / lambdas
    se = se_beta / lambdas
    return pd.DataFrame(
        {
            "lambda": lambdas,
            "eta": eta,
            "se_eta": se,
            "ci_low": eta - Z_95 * se,
            "ci_high": eta + Z_95 * se,
        }
    )


def friction_regression(events: EventCatalog) -> RegressionResult:
    """Log gas at the exploit on log loss, heteroskedasticity-robust"""
    frame = events.frame
    positive = frame["gas_gwei"] > 0
    if (~positive).any():
        logger.warning("Dropping %d event(s) with zero gas", int((~positive).sum()))
    frame = frame[positive]
    if len(frame) < 3:
        raise DataError("friction regression needs at least three events with positive gas")
    design = pd.DataFrame({"log_loss": np.log(frame["loss_usd"].to_numpy(dtype=float))})
    return ols(design, np.log(frame["gas_gwei"].to_numpy(dtype=float)), se_flavor="HC1")


def _shock_days(events: EventCatalog, calendar: pd.DatetimeIndex) -> np.ndarray:
    events.check_within(calendar)
    return calendar.isin(events.dates).astype(float)


def structural_break(
    panel: MarketPanel,
    events: EventCatalog,
    top_n: int = 20,
    outcome: str = "cp_spread_bps",
    nw_lag: int = 1,
) -> Dict[str, RegressionResult]:
    """Daily spread change on an event-day dummy, its own lag and lagged VIX

    Fitted once with every event as a shock and once with only the ``top_n`` largest.
    """
    frame = panel.frame
    change = frame[outcome].diff()
    base = pd.DataFrame(
        {"d_spread_lag": change.shift(1), "vix_lag": frame["vix"].shift(1)}, index=frame.index
    )
    largest = EventCatalog(events.frame.nlargest(min(top_n, len(events)), "loss_usd"))
    fits = {}
    for label, subset in (("all_events", events), (f"top_{top_n}", largest)):
        design = base.copy()
        design.insert(0, "shock", _shock_days(subset, panel.dates))
        keep = design.notna().all(axis=1) & change.notna()
        fits[label] = ols(design[keep], change[keep], se_flavor="newey_west", nw_lag=nw_lag)
    return fits
