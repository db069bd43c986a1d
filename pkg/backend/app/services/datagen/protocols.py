"""
Synthetic protocol-level TVL, market shares and exploit shocks for the granular instrument
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from app.core.exceptions import DataError
from app.core.panels import EventCatalog

logger = logging.getLogger(__name__)


@dataclass
class ProtocolPanel:
    """Daily protocol TVL, prior-day market shares S_{i,t-1} and shocks g_{i,t}"""

    tvl: pd.DataFrame
    weights: pd.DataFrame
    shocks: pd.DataFrame


def protocol_shocks(events: EventCatalog, calendar: pd.DatetimeIndex) -> pd.DataFrame:
    """Daily protocol shocks g = -loss / TVL before the exploit, zero on quiet days"""
    if len(events) == 0:
        return pd.DataFrame(index=calendar)
    events.check_within(calendar)
    frame = events.frame.assign(g=-events.frame["loss_usd"] / events.frame["tvl_usd"])
    table = frame.pivot_table(index="date", columns="protocol", values="g", aggfunc="sum")
    table.columns.name = None
    return table.reindex(calendar).fillna(0.0)


def gen_protocol_panel(
    events: EventCatalog,
    calendar: pd.DatetimeIndex,
    n_protocols: int = 20,
    rng_seed: Optional[int] = None,
    covered_share: float = 0.6,
    tvl_log_sd: float = 1.0,
    daily_vol: float = 0.02,
) -> ProtocolPanel:
    """Random-walk protocol TVLs whose shares of total DeFi TVL sum to ``covered_share``

    Exploited protocols lose the drained amount on the event day. Protocols named in the
    catalog but outside ``protocol_00..`` are added as extra columns.
    """
    if not 0.0 < covered_share <= 1.0:
        raise DataError("covered_share must lie in (0, 1]")
    rng = np.random.default_rng(rng_seed)
    names: List[str] = [f"protocol_{i:02d}" for i in range(n_protocols)]
    if len(events):
        names += sorted(set(events.frame["protocol"]) - set(names))
    n, m = len(calendar), len(names)

    level = np.exp(rng.normal(np.log(1e9), tvl_log_sd, m))
    steps = rng.normal(-0.5 * daily_vol**2, daily_vol, (n, m))
    steps[0] = 0.0
    tvl = level[None, :] * np.exp(np.cumsum(steps, axis=0))
    tvl = pd.DataFrame(tvl, index=calendar, columns=names)

    shocks = protocol_shocks(events, calendar).reindex(columns=names).fillna(0.0)
    # a drained protocol keeps (1 + g) of its TVL from the event day on
    retained = np.cumprod(1.0 + shocks.to_numpy(), axis=0)
    tvl = tvl * retained

    market = tvl.sum(axis=1) / covered_share
    weights = tvl.div(market, axis=0).shift(1)
    weights.iloc[0] = weights.iloc[1] if n > 1 else tvl.iloc[0] / market.iloc[0]
    logger.info("Generated protocol panel: %d protocols over %d days", m, n)
    return ProtocolPanel(tvl=tvl, weights=weights, shocks=shocks)
