"""
Covariate-matched placebo inference for the stacked event study

Pseudo-event dates are drawn from quiet days that resemble the real event days in VIX and
spread level and lie outside an exclusion zone around every real exploit. Each draw reruns
the identical stacked regression; the one-sided p-value at day k is the share of placebo
coefficients at or below the real one.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import EmptyPoolError, EstimatorError
from app.core.panels import EventCatalog, MarketPanel
from app.services.datagen.panels import DEFAULT_CONTROLS, build_stacked_panel
from app.services.econ.event_study import BASELINE_DAY, event_dummy, event_study
from app.services.econ.linear import RegressionResult
from app.services.econ.replicates import run_replicates

logger = logging.getLogger(__name__)


@dataclass
class PlaceboResult:
    """Real coefficients, empirical p-values and the placebo draws behind them"""

    ks: List[int]
    actual: np.ndarray
    p_values: np.ndarray
    draws: np.ndarray
    pool_size: int
    diagnostics: Dict[str, int] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def n_draws(self) -> int:
        return int(self.draws.shape[0])

    def table(self) -> pd.DataFrame:
        """Per-day real estimate, empirical p and placebo summary"""
        return pd.DataFrame(
            {
                "k": self.ks,
                "coef": self.actual,
                "p_empirical": self.p_values,
                "placebo_mean": np.nanmean(self.draws, axis=0),
                "placebo_sd": np.nanstd(self.draws, axis=0),
            }
        )

    def draws_frame(self) -> pd.DataFrame:
        """Long table of every draw, for plotting the placebo distribution"""
        frame = pd.DataFrame(self.draws, columns=[event_dummy(k) for k in self.ks])
        frame.insert(0, "draw", np.arange(self.n_draws))
        return frame.melt(id_vars="draw", var_name="term", value_name="coef")


def candidate_pool(
    panel: MarketPanel,
    events: EventCatalog,
    window: Tuple[int, int],
    vix_tol: Optional[float] = None,
    spread_tol: Optional[float] = None,
    exclusion_days: int = 10,
    outcome: str = "cp_spread_bps",
) -> Tuple[pd.DatetimeIndex, Dict[str, int]]:
    """Quiet days eligible as pseudo-events, with the count left after each filter"""
    frame = panel.frame
    calendar = panel.dates
    events.check_within(calendar)
    vix = frame["vix"].to_numpy(dtype=float)
    spread = frame[outcome].to_numpy(dtype=float)
    on_event = calendar.isin(events.dates)
    vix_tol = 0.5 * float(np.std(vix, ddof=1)) if vix_tol is None else vix_tol
    spread_tol = 0.5 * float(np.std(spread, ddof=1)) if spread_tol is None else spread_tol

    n = len(calendar)
    positions = np.arange(n)
    steps = [("window_coverage", (positions + window[0] >= 1) & (positions + window[1] < n))]
    gaps = np.abs(
        (calendar.values[:, None] - events.dates.values[None, :]) / np.timedelta64(1, "D")
    )
    steps.append(("outside_exclusion", (gaps > exclusion_days).all(axis=1)))
    steps.append(("matched_vix", np.abs(vix - vix[on_event].mean()) < vix_tol))
    steps.append(("matched_spread", np.abs(spread - spread[on_event].mean()) < spread_tol))

    mask = np.ones(n, dtype=bool)
    diagnostics = {"calendar_days": n}
    for name, condition in steps:
        mask &= condition
        diagnostics[name] = int(mask.sum())
        if not mask.any():
            raise EmptyPoolError(
                f"placebo pool is empty after the '{name}' constraint "
                f"(vix_tol={vix_tol:.3f}, spread_tol={spread_tol:.3f}, "
                f"exclusion_days={exclusion_days})",
                diagnostics,
            )
    return calendar[mask], diagnostics


def placebo(
    real: RegressionResult,
    panel: MarketPanel,
    events: EventCatalog,
    window: Tuple[int, int] = (-5, 3),
    controls: Sequence[str] = DEFAULT_CONTROLS,
    vix_tol: Optional[float] = None,
    spread_tol: Optional[float] = None,
    exclusion_days: int = 10,
    n_draws: int = 500,
    n_dates: int = 50,
    rng_seed: Optional[int] = None,
    threads: int = 1,
    difference_outcome: bool = False,
    outcome: str = "cp_spread_bps",
) -> PlaceboResult:
    """Monte Carlo placebo distribution of the stacked event-study coefficients"""
    if len(events) == 0:
        raise EstimatorError("placebo inference needs at least one real event")
    pool, diagnostics = candidate_pool(
        panel, events, window, vix_tol, spread_tol, exclusion_days, outcome
    )
    logger.info("Placebo pool: %d candidate days (%s)", len(pool), diagnostics)
    ks = [k for k in range(window[0], window[1] + 1) if k != BASELINE_DAY]
    names = [event_dummy(k) for k in ks]
    actual = np.array([real.coef(nm) for nm in names])
    template = events.frame.reset_index(drop=True)

    def replicate(_: int, rng: np.random.Generator) -> np.ndarray:
        picks = np.sort(rng.integers(0, len(pool), n_dates))
        rows = template.iloc[rng.integers(0, len(template), n_dates)].reset_index(drop=True)
        rows = rows.drop(columns=["event_id"]).assign(date=pool[picks])
        fake = EventCatalog(rows.drop(columns=["disclosure_date"], errors="ignore"))
        stacked = build_stacked_panel(panel, fake, window=window, controls=controls,
                                      outcome=outcome)
        try:
            fit = event_study(stacked, difference_outcome=difference_outcome)
        except EstimatorError as exc:
            logger.debug("Placebo draw failed: %s", exc)
            return np.full(len(ks), np.nan)
        return np.array([fit.coef(nm) for nm in names])

    draws = np.vstack(run_replicates(replicate, n_draws, rng_seed, threads))
    warnings: List[str] = []
    failed = int(np.isnan(draws[:, 0]).sum())
    if failed:
        message = f"{failed} of {n_draws} placebo draws could not be estimated"
        logger.warning(message)
        warnings.append(message)
    valid = ~np.isnan(draws)
    below = np.where(valid, draws <= actual[None, :], False).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_values = below / valid.sum(axis=0)
    return PlaceboResult(
        ks=ks,
        actual=actual,
        p_values=p_values,
        draws=draws,
        pool_size=len(pool),
        diagnostics=diagnostics,
        warnings=warnings,
    )
