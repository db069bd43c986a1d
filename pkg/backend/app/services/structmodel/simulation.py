"""
Daily path simulation through the structural transmission chain
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from app.core.exceptions import AlignmentError
from app.core.panels import MarketPanel
from app.services.structmodel.params import FlowState, NetworkState, NoiseConfig, StructuralParams
from app.services.structmodel.transmission import flow_state, network_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DayState:
    """Intermediate model state for one simulated day"""

    date: pd.Timestamp
    network: NetworkState
    flow: FlowState
    latent_spread_bps: float


def simulate_path(
    shock_series: pd.Series,
    exogenous_series: pd.Series,
    params: StructuralParams,
    noise_config: Optional[NoiseConfig] = None,
    rng_seed: Optional[int] = None,
) -> MarketPanel:
    """Simulate spreads, gas and redemptions from per-day USD losses and crypto returns

    Args:
        shock_series: USD exploit losses per calendar day (0 on quiet days)
        exogenous_series: daily crypto returns on the same calendar
        params: structural calibration
        noise_config: observation layer (baseline, noise SD, float size, loss unit) and the
            daily reversion of the latent spread toward the baseline; reversion 0 makes the
            latent spread the baseline plus the running sum of spread changes
        rng_seed: seed of the observation-noise generator

    Returns:
        MarketPanel whose ``states`` hold one DayState per date
    """
    noise_config = noise_config or NoiseConfig()
    if not shock_series.index.equals(exogenous_series.index):
        raise AlignmentError("shock and exogenous series must share the same calendar")
    dates = pd.DatetimeIndex(shock_series.index)

    rng = np.random.default_rng(rng_seed)
    noise = (
        rng.normal(0.0, noise_config.noise_sd_bps, len(dates))
        if noise_config.noise_sd_bps > 0
        else np.zeros(len(dates))
    )

    losses = shock_series.to_numpy(dtype=float) / noise_config.loss_unit_usd
    returns = exogenous_series.to_numpy(dtype=float)

    states: List[DayState] = []
    baseline = noise_config.baseline_spread_bps
    level = baseline
    spread = np.empty(len(dates))
    gas = np.empty(len(dates))
    redemption = np.empty(len(dates))
    for i, date in enumerate(dates):
        network = network_state(losses[i], params)
        flow = flow_state(returns[i], network, params, noise_config.float_usd)
        level += flow.spread_change - noise_config.reversion * (level - baseline)
        states.append(DayState(date, network, flow, level))
        spread[i] = level + noise[i]
        gas[i] = network.friction
        redemption[i] = flow.net_redemption * noise_config.float_usd

    frame = pd.DataFrame(
        {
            "cp_spread_bps": spread,
            "gas_gwei": gas,
            "btc_return": returns,
            "net_redemption_usd": redemption,
        },
        index=pd.DatetimeIndex(dates, name="date"),
    )
    logger.debug("Simulated %d days, %d shock days", len(dates), int((losses > 0).sum()))
    return MarketPanel(frame=frame, states=tuple(states), truth=params.to_dict())
