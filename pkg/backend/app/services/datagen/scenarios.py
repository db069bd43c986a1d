"""
Known-truth data-generating processes for estimator recovery checks

Every builder returns its ground truth alongside the data so recovery tests and the
``simulate --scenario`` command never have to guess the true values.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.exceptions import ConfigError
from app.core.panels import EventCatalog, MarketPanel, MonthlyPanel
from app.services.datagen.events import (
    event_positions,
    gen_events,
    trading_calendar,
    with_panel_gas,
)
from app.services.datagen.market import AR1Spec, MarketConfig, ar1_series, gen_market
from app.services.datagen.protocols import ProtocolPanel, gen_protocol_panel
from app.services.econ.giv import build_giv
from app.services.structmodel.params import NoiseConfig, StructuralParams
from app.services.structmodel.transmission import PRICE_UNIT_USD

logger = logging.getLogger(__name__)

START = "2021-01-04"
GAS_THRESHOLD_GWEI = 32.93
ML_STEP_GWEI = 36.0
MULTIPLIER_BPS = -2.73
STEP_REDEMPTION_USD = 1e8


@dataclass
class Scenario:
    """Synthetic panel, its events and the values estimators should recover"""

    name: str
    panel: MarketPanel
    events: EventCatalog
    truth: Dict[str, float]
    protocols: Optional[ProtocolPanel] = None
    extras: Dict[str, object] = field(default_factory=dict)


def _window_mask(
    calendar: pd.DatetimeIndex, events: EventCatalog, days: Tuple[int, int]
) -> np.ndarray:
    """Per-day, per-event indicator of relative days within ``days``"""
    positions = event_positions(events, calendar)
    offsets = np.arange(len(calendar))[:, None] - positions[None, :]
    return (offsets >= days[0]) & (offsets <= days[1])


def _neutral_market(
    rng_seed: Optional[int],
    n_events: int,
    n_days: int,
    min_gap_days: int,
    noise_sd: float,
    did_assets: Tuple[str, ...] = ("a2p2", "aa_fin"),
    params: Optional[StructuralParams] = None,
) -> Tuple[MarketPanel, EventCatalog]:
    """Structural market, by default with eta = 1 so redemptions leave spreads untouched"""
    seeds = np.random.SeedSequence(rng_seed).generate_state(2)
    calendar = trading_calendar(START, periods=n_days)
    events = gen_events(n_events, int(seeds[0]), calendar, window=(-5, 5),
                        min_gap_days=min_gap_days)
    market = gen_market(
        MarketConfig(did_assets=did_assets), events, params or StructuralParams(eta=1.0),
        int(seeds[1]), noise=NoiseConfig(noise_sd_bps=noise_sd, reversion=0.0),
        calendar=calendar,
    )
    return market, with_panel_gas(events, market)


def step_params(
    delta_0: float,
    redemption_usd: float = STEP_REDEMPTION_USD,
    float_usd: float = NoiseConfig().float_usd,
    lambda_price: float = 1.0,
) -> StructuralParams:
    """Calibration whose every exploit redeems ``redemption_usd`` and moves spreads by delta_0

    Crypto returns are switched off, the panic premium fires on any loss and the exit
    friction is negligible, so the event-day change is lambda * (1 - eta) * R exactly.
    """
    units = redemption_usd / PRICE_UNIT_USD
    return StructuralParams(
        rho0=0.0,
        rho1=0.0,
        rho2=redemption_usd / float_usd,
        omega_bar=1.0 - 1e-12,
        psi=1e-12,
        eta=1.0 - delta_0 / (lambda_price * units),
        lambda_price=lambda_price,
    )


def event_study_dgp(
    rng_seed: Optional[int] = None,
    n_events: int = 50,
    n_days: int = 1000,
    delta_0: float = -3.0,
    noise_sd: float = 1.0,
) -> Scenario:
    """Permanent level shift of ``delta_0`` bps from each event day on

    The shift is the structural response to a fixed redemption on every exploit day, with
    eta chosen so that lambda * (1 - eta) * R equals delta_0.
    """
    params = step_params(delta_0)
    market, events = _neutral_market(rng_seed, n_events, n_days, 12, noise_sd, params=params)
    frame = market.frame.copy()
    frame["aa_nonfin"] = frame["cp_spread_bps"]
    truth = {**market.truth, "delta_0": delta_0}
    return Scenario("event_study", MarketPanel(frame, market.states, truth), events, truth)


def threshold_dgp(
    rng_seed: Optional[int] = None,
    n_events: int = 50,
    n_days: int = 1000,
    gamma: float = GAS_THRESHOLD_GWEI,
    beta_low: float = -2.4,
    beta_high: float = 2.2,
    noise_sd: float = 1.0,
    unit_usd: float = 1e8,
) -> Scenario:
    """Post-event redemptions whose sign flips when gas at the exploit exceeds gamma"""
    market, events = _neutral_market(rng_seed, n_events, n_days, 12, 1.0)
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed).spawn(1)[0])
    gas = np.exp(rng.normal(np.log(gamma), 0.45, len(events)))

    frame = market.frame.copy()
    positions = event_positions(events, market.dates)
    frame.iloc[positions, frame.columns.get_loc("gas_gwei")] = gas
    effect = np.where(gas <= gamma, beta_low, beta_high)
    post = _window_mask(market.dates, events, (0, 3))
    frame["net_redemption_usd"] = unit_usd * (
        rng.normal(0.0, noise_sd, len(frame)) + post.astype(float) @ effect
    )
    catalog = events.frame.copy()
    catalog["gas_gwei"] = gas
    truth = {
        **market.truth,
        "threshold.gamma": gamma,
        "threshold.beta_low_usd": beta_low * unit_usd,
        "threshold.beta_high_usd": beta_high * unit_usd,
    }
    return Scenario("threshold", MarketPanel(frame, market.states, truth),
                    EventCatalog(catalog), truth)


def giv_dgp(
    rng_seed: Optional[int] = None,
    n_events: int = 50,
    n_days: int = 1000,
    multiplier: float = MULTIPLIER_BPS,
    first_stage: float = -1e11,
    noisy: bool = True,
    relevant: bool = True,
) -> Scenario:
    """Flows driven by the lagged instrument and a confounder; spreads priced off flows

    The confounder moves both flows and spreads, so only the instrumented flow recovers
    ``multiplier``. ``noisy=False`` removes every disturbance.
    """
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(rng_seed).spawn(8)]
    calendar = trading_calendar(START, periods=n_days)
    events = gen_events(n_events, int(streams[0].integers(2**32)), calendar,
                        window=(-5, 5), min_gap_days=12)
    protocols = gen_protocol_panel(events, calendar, rng_seed=int(streams[1].integers(2**32)))
    z = build_giv(protocols.shocks, protocols.weights).z.to_numpy()
    z_lag = np.concatenate([[0.0], z[:-1]])
    n = len(calendar)
    scale = 1.0 if noisy else 0.0

    vix = ar1_series(AR1Spec(19.44, 5.28, 0.97), n, streams[2])
    dxy = ar1_series(AR1Spec(101.04, 5.80, 0.995), n, streams[3])
    btc = ar1_series(AR1Spec(0.0018, 0.0394, 0.0), n, streams[4])
    confounder = streams[5].normal(0.0, 1.0, n) * scale
    flow = (
        (first_stage * z_lag if relevant else 0.0)
        + 2e7 * confounder
        + streams[6].normal(0.0, 2e7, n) * scale
    )
    if not relevant:
        flow = flow + streams[6].normal(0.0, 3e8, n) * (z != 0)
    d_vix = np.diff(vix, prepend=vix[0])
    change = (
        multiplier * flow / 1e8
        + scale * 0.5 * d_vix
        + 0.8 * confounder
        + streams[7].normal(0.0, 0.5, n) * scale
    )
    change[0] = 0.0
    frame = pd.DataFrame(
        {
            "cp_spread_bps": 12.34 + np.cumsum(change),
            "vix": vix,
            "dxy": dxy,
            "btc_return": btc,
            "gas_gwei": np.full(n, GAS_THRESHOLD_GWEI),
            "net_redemption_usd": flow,
        },
        index=calendar,
    )
    truth = {"giv.multiplier_bps": multiplier, "giv.first_stage": first_stage,
             "giv.noisy": float(noisy), "giv.relevant": float(relevant)}
    panel = MarketPanel(frame, truth=truth)
    return Scenario("giv", panel, with_panel_gas(events, panel), truth, protocols=protocols)


def did_dgp(
    rng_seed: Optional[int] = None,
    n_events: int = 20,
    n_days: int = 800,
    effect: float = -5.0,
    noise_sd: float = 1.0,
) -> Scenario:
    """Treated spread drops by ``effect`` on days +1..+5; control assets do not move"""
    market, events = _neutral_market(rng_seed, n_events, n_days, 15, noise_sd)
    frame = market.frame.copy()
    frame["aa_nonfin"] += effect * _window_mask(market.dates, events, (1, 5)).sum(axis=1)
    frame["cp_spread_bps"] = frame["aa_nonfin"]
    truth = {**market.truth, "did.effect": effect}
    return Scenario("did", MarketPanel(frame, market.states, truth), events, truth)


def gbr_dgp(
    rng_seed: Optional[int] = None,
    n: int = 400,
    step_gwei: float = ML_STEP_GWEI,
    step_bps: float = -4.0,
    noise_sd: float = 0.5,
) -> Tuple[pd.DataFrame, pd.Series, Dict[str, float]]:
    """Spread response that steps down once gas passes ``step_gwei``

    VIX carries a smaller linear effect and log loss a smaller one still, so the
    importance ordering is gas, VIX, loss.
    """
    rng = np.random.default_rng(rng_seed)
    gas = rng.uniform(10.0, 70.0, n)
    vix = rng.normal(20.0, 5.0, n)
    log_loss = rng.normal(16.98, 1.97, n)
    target = (
        step_bps * (gas > step_gwei)
        - 0.2 * (vix - 20.0)
        - 0.1 * (log_loss - 16.98)
        + rng.normal(0.0, noise_sd, n)
    )
    features = pd.DataFrame({"gas": gas, "vix": vix, "loss": log_loss})
    return features, pd.Series(target, name="d_spread"), {"gbr.step_gwei": step_gwei}


def monthly_dgp(
    rng_seed: Optional[int] = None,
    n_months: int = 48,
    theta: float = -1.0,
    noise_sd: float = 0.5,
) -> Tuple[MonthlyPanel, Dict[str, float]]:
    """Monthly spreads whose hack-month narrowing scales with the prime CP share"""
    rng = np.random.default_rng(rng_seed)
    months = pd.period_range("2021-01", periods=n_months, freq="M")
    hack = rng.permutation(np.arange(n_months) % 2).astype(float)
    pcs = rng.normal(0.0, 1.0, n_months)
    pcs_z = (pcs - pcs.mean()) / pcs.std()
    vix = rng.normal(20.0, 4.0, n_months)
    dxy = rng.normal(101.0, 3.0, n_months)
    btc = rng.normal(0.0, 0.02, n_months)
    spread = (
        12.0 + 1.0 * hack + 0.5 * pcs_z + theta * hack * pcs_z + 0.2 * (vix - 20.0)
        + rng.normal(0.0, noise_sd, n_months)
    )
    frame = pd.DataFrame(
        {
            "month": months,
            "spread_m": spread,
            "d_spread_m": np.concatenate([[np.nan], np.diff(spread)]),
            "hack_month": hack,
            "pcs": pcs,
            "pcs_z": pcs_z,
            "vix": vix,
            "dxy": dxy,
            "btc_return": btc,
            "n_days": 9,
        }
    )
    return MonthlyPanel(frame), {"monthly.theta": theta}


SCENARIOS: Dict[str, Callable[..., Scenario]] = {
    "event_study": event_study_dgp,
    "threshold": threshold_dgp,
    "giv": giv_dgp,
    "did": did_dgp,
}


def build_scenario(name: str, rng_seed: Optional[int]) -> Scenario:
    """Look up a panel-producing scenario by name"""
    try:
        builder = SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario '{name}'; choose from {', '.join(sorted(SCENARIOS))}"
        ) from None
    logger.info("Building scenario '%s'", name)
    return builder(rng_seed=rng_seed)
