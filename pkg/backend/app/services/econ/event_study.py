"""
Stacked dynamic event study with event fixed effects
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import EstimatorError, WindowError
from app.core.panels import EventCatalog, MarketPanel, StackedPanel
from app.services.datagen.panels import build_stacked_panel
from app.services.econ.linear import RegressionResult, joint_f_test, ols

logger = logging.getLogger(__name__)

BASELINE_DAY = -1
PRETREND_DAYS = (-5, -2)
PRETREND_TEST = "pretrend"


def event_dummy(k: int) -> str:
    """Column name of the relative-day indicator, e.g. ``k-5`` or ``k+0``"""
    return f"k{k:+d}"


def _check_window(stacked: StackedPanel, baseline: int) -> None:
    lo, hi = stacked.window
    if not lo <= baseline <= hi:
        raise WindowError(f"baseline day {baseline} is outside the window {stacked.window}")
    ks = stacked.frame["k"]
    if ks.min() < lo or ks.max() > hi:
        raise WindowError(f"relative days in the panel exceed the window {stacked.window}")
    with_baseline = stacked.frame.loc[ks == baseline, "event_id"].nunique()
    if with_baseline != stacked.n_events:
        raise WindowError(
            f"{stacked.n_events - with_baseline} event(s) lack the baseline day {baseline}"
        )


def event_study(
    stacked: StackedPanel,
    controls: Optional[Sequence[str]] = None,
    baseline: int = BASELINE_DAY,
    difference_outcome: bool = False,
    cluster: str = "event",
    se_flavor: str = "cluster",
) -> RegressionResult:
    """Estimate delta_k for every window day except the baseline

    Args:
        stacked: stacked panel from build_stacked_panel
        controls: control columns, default the panel's own controls
        baseline: omitted relative day
        difference_outcome: regress the day-over-day change instead of the level
        cluster: "event" or "date" when ``se_flavor`` is "cluster"
        se_flavor: any flavor accepted by ``ols``
    """
    _check_window(stacked, baseline)
    frame = stacked.frame
    controls = list(stacked.controls if controls is None else controls)
    outcome = ("d_" + stacked.outcome) if difference_outcome else stacked.outcome
    if outcome not in frame.columns:
        raise WindowError(f"outcome column '{outcome}' is not in the stacked panel")

    days = [k for k in stacked.window_days if k != baseline]
    design = pd.DataFrame({event_dummy(k): (frame["k"] == k).astype(float) for k in days})
    for c in controls:
        design[c] = frame[c].to_numpy(dtype=float)

    warnings: List[str] = []
    labels = frame["event_id"] if cluster == "event" else frame["date"]
    if se_flavor == "cluster" and labels.nunique() < 2:
        message = f"fewer than two {cluster} clusters; falling back to classical SEs"
        logger.warning(message)
        warnings.append(message)
        se_flavor = "classical"

    result = ols(
        design,
        frame[outcome],
        fixed_effects=[frame["event_id"]],
        se_flavor=se_flavor,
        clusters=labels if se_flavor == "cluster" else None,
        cluster_name=cluster,
    )
    result.warnings = warnings + result.warnings

    pre = [event_dummy(k) for k in range(PRETREND_DAYS[0], PRETREND_DAYS[1] + 1) if k in days]
    if pre and result.df_resid > 0:
        joint_f_test(result, pre, PRETREND_TEST)
    logger.info(
        "Event study on %d events: delta_0 = %.3f (%s)",
        stacked.n_events,
        result.coef(event_dummy(0)) if 0 in days else float("nan"),
        result.se_flavor,
    )
    return result


def dynamic_table(result: RegressionResult, window: Tuple[int, int]) -> pd.DataFrame:
    """One row per window day, the baseline normalized to zero with no SE"""
    coefs = result.to_frame().set_index("term")
    rows = []
    for k in range(window[0], window[1] + 1):
        name = event_dummy(k)
        if name in coefs.index:
            rows.append({"k": k, **coefs.loc[name].to_dict()})
        else:
            rows.append(
                {"k": k, "coef": 0.0, "se": np.nan, "t": np.nan, "p": np.nan,
                 "ci_low": np.nan, "ci_high": np.nan}
            )
    return pd.DataFrame(rows)


def _subset(stacked: StackedPanel, event_ids: np.ndarray) -> StackedPanel:
    frame = stacked.frame[stacked.frame["event_id"].isin(event_ids)].reset_index(drop=True)
    return StackedPanel(
        frame=frame, window=stacked.window, outcome=stacked.outcome, controls=stacked.controls
    )


def severity_split(stacked: StackedPanel) -> Dict[str, StackedPanel]:
    """Split events at the median log loss into high and low severity halves"""
    per_event = stacked.frame.groupby("event_id")["log_loss"].first()
    median = per_event.median()
    return {
        "high_severity": _subset(stacked, per_event.index[per_event >= median].to_numpy()),
        "low_severity": _subset(stacked, per_event.index[per_event < median].to_numpy()),
    }


def event_study_variants(
    panel: MarketPanel,
    events: EventCatalog,
    window: Tuple[int, int] = (-5, 3),
    controls: Sequence[str] = ("vix", "dxy", "btc_return"),
    difference_outcome: bool = False,
) -> Dict[str, RegressionResult]:
    """Baseline plus the robustness variants: no controls, wider window, severity halves"""
    stacked = build_stacked_panel(panel, events, window=window, controls=controls)
    results = {
        "baseline": event_study(stacked, difference_outcome=difference_outcome),
        "no_controls": event_study(stacked, controls=(), difference_outcome=difference_outcome),
    }
    wide = build_stacked_panel(panel, events, window=(-5, 5), controls=controls)
    results["window_5_5"] = event_study(wide, difference_outcome=difference_outcome)
    for name, half in severity_split(stacked).items():
        if half.n_events == 0:
            logger.warning("Severity half '%s' is empty; skipped", name)
            continue
        try:
            results[name] = event_study(half, difference_outcome=difference_outcome)
        except EstimatorError as e:
            logger.warning("Severity half '%s' skipped: %s", name, e)
    return results


def se_comparison(stacked: StackedPanel, difference_outcome: bool = False) -> pd.DataFrame:
    """Same point estimates under event-clustered, date-clustered and HC3 errors"""
    fits = {
        "se_event_cluster": event_study(stacked, difference_outcome=difference_outcome),
        "se_date_cluster": event_study(
            stacked, difference_outcome=difference_outcome, cluster="date"
        ),
        "se_hc3": event_study(stacked, difference_outcome=difference_outcome, se_flavor="HC3"),
    }
    base = dynamic_table(fits["se_event_cluster"], stacked.window)[["k", "coef"]]
    for name, fit in fits.items():
        base[name] = dynamic_table(fit, stacked.window)["se"].to_numpy()
    return base

