"""
Dynamic difference-in-differences of the treated spread against control assets
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import EventCatalog, MarketPanel, StackedPanel
from app.services.datagen.panels import build_did_panel
from app.services.econ.event_study import BASELINE_DAY, PRETREND_DAYS, PRETREND_TEST, event_dummy
from app.services.econ.linear import RegressionResult, joint_f_test, ols

logger = logging.getLogger(__name__)


def treated_dummy(k: int) -> str:
    """Name of the relative-day x treated interaction"""
    return "treat_" + event_dummy(k)


def did_event_study(did: StackedPanel, baseline: int = BASELINE_DAY) -> RegressionResult:
    """beta_k on relative day x treated with asset and date effects absorbed per event

    Asset-by-event and date-by-event fixed effects are absorbed; errors are clustered by
    event, falling back to HC1 when there is a single event.
    """
    frame = did.frame
    treat = frame["treat"].to_numpy(dtype=float)
    if treat.max() < 1 or treat.min() > 0:
        raise DataError("cross-asset comparison needs treated and control rows")

    days = [k for k in did.window_days if k != baseline]
    design = pd.DataFrame({treated_dummy(k): (frame["k"] == k) * treat for k in days})
    event = frame["event_id"].astype(str)
    keys = [event + "|" + frame["asset"].astype(str), event + "|" + frame["date"].astype(str)]

    warnings: List[str] = []
    if frame["event_id"].nunique() > 1:
        fit = ols(design, frame["spread"], fixed_effects=keys, se_flavor="cluster",
                  clusters=frame["event_id"], cluster_name="event")
    else:
        message = "single event; cluster SEs unavailable, using HC1"
        logger.warning(message)
        warnings.append(message)
        fit = ols(design, frame["spread"], fixed_effects=keys, se_flavor="HC1")
    fit.warnings = warnings + fit.warnings

    pre = [treated_dummy(k) for k in range(PRETREND_DAYS[0], PRETREND_DAYS[1] + 1) if k in days]
    if pre and fit.df_resid > 0:
        joint_f_test(fit, pre, PRETREND_TEST)
    return fit


def did_table(result: RegressionResult, window: Tuple[int, int]) -> pd.DataFrame:
    """One row per relative day with the baseline normalized to zero"""
    coefs = result.to_frame().set_index("term")
    rows = []
    for k in range(window[0], window[1] + 1):
        name = treated_dummy(k)
        values = coefs.loc[name].to_dict() if name in coefs.index else {"coef": 0.0}
        rows.append({"k": k, **values})
    return pd.DataFrame(rows)


def did_by_control_group(
    panel: MarketPanel,
    events: EventCatalog,
    treat_asset: str = "aa_nonfin",
    window: Tuple[int, int] = (-5, 5),
    control_assets: Optional[Sequence[str]] = None,
) -> Dict[str, RegressionResult]:
    """Pooled comparison plus one comparison against each control asset alone"""
    controls = list(control_assets) if control_assets else [
        a for a in panel.assets() if a != treat_asset
    ]
    results = {
        "pooled": did_event_study(
            build_did_panel(panel, events, treat_asset, window, controls)
        )
    }
    for asset in controls:
        results[asset] = did_event_study(
            build_did_panel(panel, events, treat_asset, window, [asset])
        )
    return results
