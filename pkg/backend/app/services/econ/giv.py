"""
Granular instrument construction and the two-stage estimate of the spread multiplier
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from linearmodels.iv import IV2SLS

from app.core.exceptions import DataError, EstimatorError
from app.core.panels import EventCatalog, MarketPanel
from app.services.datagen.panels import build_stacked_panel
from app.services.econ.linear import (
    RegressionResult,
    fixed_effect_dummies,
    joint_f_test,
    ols,
    residualize,
)
from app.services.econ.replicates import run_replicates
from app.services.econ.structural import eta_recovery

logger = logging.getLogger(__name__)

MULTIPLIER_SCALE = 1e8
INSTRUMENT = "z_giv"
INTERACTION = "post_x_cum_flow"
CUM_INSTRUMENT = "post_x_cum_z"
DEFAULT_MACRO = ("vix", "dxy", "btc_return")
SUBSAMPLE_SPLIT = "2022-05-07"


@dataclass
class GivSeries:
    """Daily instrument with the protocol residuals and weights that built it"""

    z: pd.Series
    residuals: pd.DataFrame
    weights: pd.DataFrame
    demeaned: bool = True


@dataclass
class TslsResult:
    """First and second stage fits plus the multiplier in bps per $100M"""

    first_stage: RegressionResult
    second_stage: RegressionResult
    first_stage_f: float
    multiplier: float
    multiplier_se: float
    weak_instrument: bool
    stage2_frame: pd.DataFrame
    stage2_controls: Tuple[str, ...] = ()
    warnings: List[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "first_stage_coef": self.first_stage.coef(INSTRUMENT),
            "first_stage_se": self.first_stage.se_of(INSTRUMENT),
            "first_stage_f": self.first_stage_f,
            "weak_instrument": self.weak_instrument,
            "second_stage_coef": self.second_stage.coef(INTERACTION),
            "second_stage_se": self.second_stage.se_of(INTERACTION),
            "multiplier_bps_per_100m": self.multiplier,
            "multiplier_se": self.multiplier_se,
            "n_events": int(self.stage2_frame["event_id"].nunique()),
        }


def build_giv(shocks: pd.DataFrame, weights: pd.DataFrame, demean: bool = True) -> GivSeries:
    """Size-weighted sum of de-meaned protocol shocks

    ``weights`` holds prior-day market shares S_{i,t-1}; a missing weight marks a protocol
    as inactive that day. The common component is the equal-weighted mean shock over the
    active protocols.
    """
    shocks = shocks.reindex(index=weights.index, columns=weights.columns).fillna(0.0)
    s = weights.to_numpy(dtype=float)
    g = shocks.to_numpy(dtype=float)
    active = ~np.isnan(s)

    orphan = (g != 0) & ~active
    if orphan.any():
        day, col = np.argwhere(orphan)[0]
        raise DataError(
            f"missing TVL weight for shocked protocol {weights.columns[col]} "
            f"on {weights.index[day].date()}"
        )
    if np.any(s[active] < 0) or np.any(s[active] > 1):
        raise DataError("market-share weights must lie in [0, 1]")
    totals = np.nansum(s, axis=1)
    if np.any(totals > 1.0 + 1e-9):
        day = int(np.argmax(totals))
        raise DataError(f"weights sum to {totals[day]:.6f} > 1 on {weights.index[day].date()}")

    counts = active.sum(axis=1)
    common = np.zeros(len(g))
    if demean:
        sums = np.where(active, g, 0.0).sum(axis=1)
        np.divide(sums, counts, out=common, where=counts > 0)
    u = np.where(active, g - common[:, None], np.nan)
    z = np.nansum(np.where(active, s * u, 0.0), axis=1)
    return GivSeries(
        z=pd.Series(z, index=weights.index, name=INSTRUMENT),
        residuals=pd.DataFrame(u, index=weights.index, columns=weights.columns),
        weights=weights,
        demeaned=demean,
    )


def macro_factors(panel: MarketPanel) -> pd.DataFrame:
    """Daily changes of the level controls and the crypto return, first day zero"""
    frame = panel.frame
    factors = pd.DataFrame(index=frame.index)
    for column in ("vix", "dxy"):
        if column in frame.columns:
            factors["d_" + column] = frame[column].diff().fillna(0.0)
    if "btc_return" in frame.columns:
        factors["btc_return"] = frame["btc_return"]
    return factors


def abnormal_spread(
    panel: MarketPanel, outcome: str = "cp_spread_bps", factors: Optional[pd.DataFrame] = None
) -> pd.Series:
    """Cumulated residual spread changes after removing the macro factors"""
    change = panel.frame[outcome].diff().fillna(0.0)
    if factors is None or factors.shape[1] == 0:
        return change.cumsum().rename("abnormal_spread")
    # only factor-driven movement is removed; the sample drift stays
    resid = residualize(change, factors) + change.mean()
    return pd.Series(np.cumsum(resid), index=panel.frame.index, name="abnormal_spread")


def first_stage(
    panel: MarketPanel,
    giv: GivSeries,
    flow: str = "net_redemption_usd",
    instrument_lag: int = 1,
    nw_lag: int = 1,
    controls: Sequence[str] = (),
) -> RegressionResult:
    """Aggregate flow on the lagged instrument with Newey-West errors"""
    z = giv.z.reindex(panel.dates).shift(instrument_lag)
    design = pd.DataFrame({INSTRUMENT: z})
    for c in controls:
        design[c] = panel.frame[c]
    keep = design.notna().all(axis=1).to_numpy()
    return ols(
        design[keep],
        panel.frame[flow].to_numpy(dtype=float)[keep],
        se_flavor="newey_west",
        nw_lag=nw_lag,
    )


def _instrument_f(fit: RegressionResult) -> float:
    t = fit.tvalues[fit.index(INSTRUMENT)]
    return float(t**2) if np.isfinite(t) else float("inf")


def _second_stage(
    frame: pd.DataFrame, controls: Sequence[str] = ()
) -> RegressionResult:
    """2SLS of the abnormal spread on the instrumented cumulative outflow

    Exogenous: post, controls and event dummies. The cumulative post-event flow is
    instrumented by the cumulative lagged instrument; errors cluster by event.
    """
    exog = pd.DataFrame({"post": frame["post"].to_numpy(dtype=float)})
    for c in controls:
        exog[c] = frame[c].to_numpy(dtype=float)
    names = [*exog.columns, INTERACTION]
    dummies = fixed_effect_dummies([frame["event_id"]], len(frame))
    exog = pd.concat([exog, dummies], axis=1)
    endog = pd.DataFrame({INTERACTION: frame[INTERACTION].to_numpy(dtype=float)})
    instruments = pd.DataFrame({CUM_INSTRUMENT: frame[CUM_INSTRUMENT].to_numpy(dtype=float)})
    dependent = pd.Series(frame["abnormal_spread"].to_numpy(dtype=float), name="abnormal_spread")
    if np.ptp(instruments[CUM_INSTRUMENT]) == 0:
        raise EstimatorError("the cumulative instrument does not vary across stacked rows")

    groups = frame["event_id"].to_numpy()
    n_clusters = len(np.unique(groups))
    df_resid = len(frame) - exog.shape[1] - 1
    if df_resid <= 0:
        raise EstimatorError(f"not enough rows ({len(frame)}) for the second stage")
    try:
        model = IV2SLS(dependent, exog, endog, instruments)
        if n_clusters > 1:
            fit = model.fit(
                cov_type="clustered", clusters=groups, debiased=True
            )
            tag = "cluster(event)"
        else:
            fit = model.fit(cov_type="unadjusted", debiased=True)
            tag = "classical"
    except ValueError as e:
        raise EstimatorError(f"second stage failed: {e}") from e
    cov = fit.cov.loc[names, names].to_numpy(dtype=float)
    return RegressionResult(
        names=names,
        params=fit.params[names].to_numpy(dtype=float),
        cov=cov,
        se_flavor=tag,
        n_obs=int(fit.nobs),
        df_resid=n_clusters - 1 if n_clusters > 1 else df_resid,
        r2=float(fit.rsquared),
        adj_r2=float(fit.rsquared_adj),
        resid=np.asarray(fit.resids, dtype=float),
        n_clusters=n_clusters if n_clusters > 1 else None,
    )


def tsls(
    panel: MarketPanel,
    giv: GivSeries,
    events: EventCatalog,
    flow: str = "net_redemption_usd",
    outcome: str = "cp_spread_bps",
    instrument_lag: int = 1,
    nw_lag: int = 1,
    post_window: Tuple[int, int] = (-5, 3),
    macro: Sequence[str] = DEFAULT_MACRO,
    first_stage_controls: Sequence[str] = (),
    stage2_controls: Sequence[str] = (),
    weak_f: float = 10.0,
) -> TslsResult:
    """Two-stage estimate of the spread response to instrumented outflows

    The daily first stage projects the aggregate flow on Z_{t-lag} and supplies the
    instrument F. The second stage is a 2SLS on the stacked windows: the abnormal spread on
    Post and the post-event flow cumulated from the event day, instrumented by the lagged
    instrument cumulated the same way, with event fixed effects and event clustering.
    """
    warnings: List[str] = []
    stage1 = first_stage(panel, giv, flow, instrument_lag, nw_lag, first_stage_controls)
    f_stat = _instrument_f(stage1)
    weak = f_stat < weak_f
    if weak:
        message = f"weak instrument: first-stage F = {f_stat:.2f} < {weak_f:g}"
        logger.warning(message)
        warnings.append(message)

    z_lag = giv.z.reindex(panel.dates).shift(instrument_lag).fillna(0.0)
    names = [m for m in macro if m in ("vix", "dxy", "btc_return")]
    factors = macro_factors(panel)
    factors = factors[[("d_" + m) if m != "btc_return" else m for m in names]]
    aux = panel.frame.copy()
    aux["abnormal_spread"] = abnormal_spread(panel, outcome, factors)
    aux["z_lag"] = z_lag.to_numpy()
    stacked = build_stacked_panel(
        MarketPanel(aux),
        events,
        window=post_window,
        controls=tuple(stage2_controls),
        outcome="abnormal_spread",
        extra=(flow, "z_lag"),
    )
    frame = stacked.frame
    by_event = frame["event_id"]
    frame[INTERACTION] = (frame[flow] * frame["post"]).groupby(by_event).cumsum()
    frame[CUM_INSTRUMENT] = (frame["z_lag"] * frame["post"]).groupby(by_event).cumsum()
    warnings.extend(stacked.warnings)

    stage2 = _second_stage(frame, stage2_controls)
    beta = stage2.coef(INTERACTION)
    result = TslsResult(
        first_stage=stage1,
        second_stage=stage2,
        first_stage_f=f_stat,
        multiplier=beta * MULTIPLIER_SCALE,
        multiplier_se=stage2.se_of(INTERACTION) * MULTIPLIER_SCALE,
        weak_instrument=weak,
        stage2_frame=frame,
        stage2_controls=tuple(stage2_controls),
        warnings=warnings + stage2.warnings,
    )
    logger.info(
        "2SLS multiplier %.3f bps/$100M (SE %.3f), first-stage F %.2f",
        result.multiplier, result.multiplier_se, f_stat,
    )
    return result


def eta_bootstrap(
    result: TslsResult,
    lambda_price: float = 1.0,
    n_boot: int = 1000,
    rng_seed: Optional[int] = None,
    threads: int = 1,
) -> pd.DataFrame:
    """Bootstrap distribution of eta from resampling whole events with replacement"""
    frame = result.stage2_frame
    blocks = {e: g for e, g in frame.groupby("event_id")}
    ids = np.asarray(list(blocks))

    def replicate(_: int, rng: np.random.Generator) -> float:
        drawn = rng.choice(ids, size=len(ids), replace=True)
        sample = pd.concat(
            [blocks[e].assign(event_id=j) for j, e in enumerate(drawn)], ignore_index=True
        )
        try:
            fit = _second_stage(sample, result.stage2_controls)
        except EstimatorError:
            return float("nan")
        return 1.0 - fit.coef(INTERACTION) * MULTIPLIER_SCALE / lambda_price

    draws = np.asarray(run_replicates(replicate, n_boot, rng_seed, threads))
    failed = int(np.isnan(draws).sum())
    if failed:
        logger.warning("%d of %d bootstrap replicates were singular", failed, n_boot)
    return pd.DataFrame({"replicate": np.arange(n_boot), "eta": draws})


def eta_subsample(
    result: TslsResult,
    split_date: str = SUBSAMPLE_SPLIT,
    lambda_price: float = 1.0,
) -> pd.DataFrame:
    """eta recovered separately for events before and after a split date"""
    frame = result.stage2_frame
    split = pd.Timestamp(split_date)
    rows = []
    for label, mask in (
        ("before", frame["event_date"] < split),
        ("after", frame["event_date"] >= split),
    ):
        part = frame[mask]
        if part["event_id"].nunique() < 2:
            logger.warning("Subsample '%s' has fewer than two events; skipped", label)
            continue
        fit = _second_stage(part, result.stage2_controls)
        beta = fit.coef(INTERACTION) * MULTIPLIER_SCALE
        se = fit.se_of(INTERACTION) * MULTIPLIER_SCALE
        row = eta_recovery(beta, se, [lambda_price]).iloc[0].to_dict()
        rows.append({"subsample": label, "n_events": int(part["event_id"].nunique()),
                     "beta_bps": beta, "se_bps": se, **row})
    return pd.DataFrame(rows)


def macro_orthogonality(
    giv: GivSeries, panel: MarketPanel, factors: Optional[pd.DataFrame] = None
) -> RegressionResult:
    """Instrument on concurrent macro factors with a joint F test of all slopes"""
    factors = macro_factors(panel) if factors is None else factors
    z = giv.z.reindex(factors.index)
    fit = ols(factors, z, se_flavor="HC1")
    joint_f_test(fit, [str(c) for c in factors.columns], "macro_joint")
    return fit


def instrument_lag_structure(
    panel: MarketPanel,
    giv: GivSeries,
    flow: str = "net_redemption_usd",
    lags: Sequence[int] = (0, 1, 2, 3),
    nw_lag: int = 1,
) -> pd.DataFrame:
    """First-stage strength at each instrument lag"""
    rows = []
    for lag in lags:
        fit = first_stage(panel, giv, flow, instrument_lag=lag, nw_lag=nw_lag)
        i = fit.index(INSTRUMENT)
        rows.append(
            {
                "lag": lag,
                "coef": float(fit.params[i]),
                "t": float(fit.tvalues[i]),
                "p": float(fit.pvalues[i]),
                "adj_r2": fit.adj_r2,
            }
        )
    return pd.DataFrame(rows)


def demean_comparison(shocks: pd.DataFrame, weights: pd.DataFrame) -> Dict[str, object]:
    """Instrument built with and without the common-shock correction, side by side"""
    standard = build_giv(shocks, weights, demean=True).z
    raw = build_giv(shocks, weights, demean=False).z
    describe = pd.DataFrame(
        {
            name: {"mean": s.mean(), "sd": s.std(), "min": s.min(), "max": s.max()}
            for name, s in (("standard", standard), ("no_demean", raw))
        }
    ).T
    fit = ols(pd.DataFrame({"z_no_demean": raw.to_numpy()}), standard, se_flavor="HC1")
    return {
        "describe": describe,
        "correlation": float(np.corrcoef(standard, raw)[0, 1]),
        "regression": fit,
    }
