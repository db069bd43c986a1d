"""
Mechanism tests on money-fund holdings and monthly state dependence
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from app.core.exceptions import DataError, EstimatorError
from app.core.panels import MonthlyPanel
from app.services.econ.linear import RegressionResult, ols

logger = logging.getLogger(__name__)

MIN_MONTHS = 12
INTERACTION = "hack_x_pcs"
HOLDINGS_MEASURES = ("prime_cp_share", "treasury_share", "repo_share")


@dataclass
class WelchTest:
    """Unequal-variance difference in means"""

    diff: float
    se: float
    t: float
    p: float
    df: float


def welch_diff_means(group_a: Sequence[float], group_b: Sequence[float]) -> WelchTest:
    """Difference of means with the Welch-Satterthwaite degrees of freedom"""
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DataError("Welch test needs at least two values per group")
    diff = float(a.mean() - b.mean())
    se = float(np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)))
    if se == 0.0:
        # scipy returns nan for two constant groups
        df = float(len(a) + len(b) - 2)
        if diff == 0.0:
            return WelchTest(diff=0.0, se=0.0, t=0.0, p=1.0, df=df)
        return WelchTest(diff=diff, se=0.0, t=float(np.sign(diff) * np.inf), p=0.0, df=df)
    result = stats.ttest_ind(a, b, equal_var=False)
    return WelchTest(
        diff=diff, se=se, t=float(result.statistic), p=float(result.pvalue), df=float(result.df)
    )


def state_dependence_monthly(
    monthly: MonthlyPanel,
    spec: str = "level",
    controls: Sequence[str] = ("vix", "dxy", "btc_return"),
    nw_lag: int = 1,
) -> RegressionResult:
    """Monthly spread (or its change) on HackMonth, pcs_z and their interaction"""
    if spec not in ("level", "change"):
        raise EstimatorError(f"unknown monthly specification '{spec}'")
    frame = monthly.frame if spec == "level" else monthly.change_rows()
    outcome = "spread_m" if spec == "level" else "d_spread_m"
    if len(frame) < MIN_MONTHS:
        raise EstimatorError(
            f"monthly regression needs at least {MIN_MONTHS} months, got {len(frame)}"
        )
    hack = frame["hack_month"].to_numpy(dtype=float)
    if hack.sum() == 0 or hack.sum() == len(hack):
        raise EstimatorError("hack-month indicator has no variation; interaction is undefined")
    pcs = frame["pcs_z"].to_numpy(dtype=float)
    if np.allclose(pcs, 0.0):
        raise EstimatorError("pcs_z is identically zero; interaction drops out")

    design = pd.DataFrame({"hack_month": hack, "pcs_z": pcs, INTERACTION: hack * pcs})
    for c in controls:
        design[c] = frame[c].to_numpy(dtype=float)
    fit = ols(design, frame[outcome], se_flavor="newey_west", nw_lag=nw_lag)
    fit.warnings = list(monthly.warnings) + fit.warnings
    logger.info("Monthly %s specification: interaction %.3f", spec, fit.coef(INTERACTION))
    return fit


def holdings_regression(
    holdings: pd.DataFrame, measure: str = "prime_cp_share", nw_lag: int = 1
) -> RegressionResult:
    """Holdings share on the hack-month flag with year and calendar-month effects"""
    if measure not in holdings.columns:
        raise DataError(f"holdings table has no column '{measure}'")
    months = pd.PeriodIndex(holdings["month"], freq="M")
    ordered = holdings.assign(_m=months).sort_values("_m")
    months = pd.PeriodIndex(ordered["_m"])
    design = pd.DataFrame({"hack_month": ordered["hack_month"].to_numpy(dtype=float)})
    return ols(
        design,
        ordered[measure],
        fixed_effects=[months.year, months.month],
        se_flavor="newey_west",
        nw_lag=nw_lag,
    )


def welch_table(
    holdings: pd.DataFrame, measures: Sequence[str] = HOLDINGS_MEASURES
) -> pd.DataFrame:
    """Hack versus non-hack month means of each holdings share"""
    hack = holdings["hack_month"].to_numpy(dtype=float) > 0
    rows = []
    for measure in measures:
        values = holdings[measure].to_numpy(dtype=float)
        test = welch_diff_means(values[hack], values[~hack])
        rows.append(
            {
                "measure": measure,
                "mean_hack": float(values[hack].mean()),
                "mean_non_hack": float(values[~hack].mean()),
                "diff": test.diff,
                "se": test.se,
                "t": test.t,
                "p": test.p,
            }
        )
    return pd.DataFrame(rows)
