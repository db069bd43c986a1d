"""
Synthetic daily market panels driven by the structural model
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from app.core.exceptions import DataError
from app.core.panels import EventCatalog, MarketPanel
from app.services.datagen.events import daily_losses, trading_calendar
from app.services.structmodel.params import NoiseConfig, StructuralParams
from app.services.structmodel.simulation import simulate_path

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AR1Spec:
    """Stationary AR(1) with a target unconditional mean and standard deviation"""

    mean: float
    sd: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not -1.0 < self.phi < 1.0:
            raise DataError("AR(1) coefficient must lie strictly inside (-1, 1)")
        if self.sd < 0:
            raise DataError("AR(1) standard deviation must be non-negative")


@dataclass(frozen=True)
class MarketConfig:
    """Exogenous market processes and observation layer of a synthetic panel"""

    start: str = "2021-01-04"
    end: str = "2024-12-31"
    vix: AR1Spec = AR1Spec(19.44, 5.28, 0.97)
    dxy: AR1Spec = AR1Spec(101.04, 5.80, 0.995)
    btc_return: AR1Spec = AR1Spec(0.0018, 0.0394, 0.0)
    event_return: float = -0.02
    vix_beta_bps: float = 0.5
    gas_noise_sd: float = 0.3
    flow_noise_usd: float = 50e6
    usdc_share: float = 0.4
    did_assets: Tuple[str, ...] = ("a2p2", "aa_fin")
    did_baselines: Dict[str, float] = field(
        default_factory=lambda: {"a2p2": 25.0, "aa_fin": 14.0, "sofr": 2.0, "abcp": 16.0}
    )
    did_noise_sd: float = 1.0

    def calendar(self) -> pd.DatetimeIndex:
        return trading_calendar(self.start, self.end)


def ar1_series(spec: AR1Spec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) path started from its unconditional distribution"""
    innovation_sd = spec.sd * np.sqrt(1.0 - spec.phi**2)
    shocks = rng.normal(0.0, innovation_sd, n)
    shocks[0] = rng.normal(0.0, spec.sd)
    return spec.mean + lfilter([1.0], [1.0, -spec.phi], shocks)


def gen_market(
    config: MarketConfig,
    events: EventCatalog,
    params: StructuralParams,
    rng_seed: Optional[int],
    noise: Optional[NoiseConfig] = None,
    calendar: Optional[pd.DatetimeIndex] = None,
) -> MarketPanel:
    """Simulate a market panel around an event catalog

    VIX, DXY and BTC returns are AR(1) processes with the configured moments; exploit days
    add ``event_return`` to the crypto return. Spreads come from the structural path plus a
    VIX loading; control-asset spreads for the cross-asset comparison share the VIX loading
    but do not respond to exploits.
    """
    noise = noise or NoiseConfig()
    calendar = calendar if calendar is not None else config.calendar()
    if len(calendar) < 2:
        raise DataError("market calendar needs at least two days")
    events.check_within(calendar)

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(rng_seed).spawn(6)]
    n = len(calendar)
    vix = ar1_series(config.vix, n, streams[0])
    dxy = ar1_series(config.dxy, n, streams[1])
    btc = ar1_series(config.btc_return, n, streams[2])
    losses = daily_losses(events, calendar)
    btc = btc + config.event_return * (losses.to_numpy() > 0)

    path = simulate_path(
        losses,
        pd.Series(btc, index=calendar),
        params,
        noise,
        rng_seed=int(streams[3].integers(2**32)),
    )
    frame = path.frame.copy()
    frame["cp_spread_bps"] += config.vix_beta_bps * (vix - config.vix.mean)
    frame["gas_gwei"] = frame["gas_gwei"] * np.exp(streams[4].normal(0.0, config.gas_noise_sd, n))
    frame["net_redemption_usd"] += streams[4].normal(0.0, config.flow_noise_usd, n)
    frame["net_redemption_usdc"] = config.usdc_share * frame["net_redemption_usd"]
    frame["net_redemption_usdt"] = (1.0 - config.usdc_share) * frame["net_redemption_usd"]
    frame["vix"] = vix
    frame["dxy"] = dxy
    frame["aa_nonfin"] = frame["cp_spread_bps"]
    for asset in config.did_assets:
        base = config.did_baselines.get(asset, noise.baseline_spread_bps)
        frame[asset] = (
            base
            + config.vix_beta_bps * (vix - config.vix.mean)
            + streams[5].normal(0.0, config.did_noise_sd, n)
        )

    truth = dict(path.truth)
    truth.update({f"noise.{k}": float(v) for k, v in asdict(noise).items()})
    truth["market.vix_beta_bps"] = config.vix_beta_bps
    truth["market.event_return"] = config.event_return
    logger.info("Simulated market panel: %d days, %d events", n, len(events))
    return MarketPanel(frame=frame, states=path.states, truth=truth)
