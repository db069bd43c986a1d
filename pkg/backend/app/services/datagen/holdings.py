"""
Synthetic monthly money-fund holdings shares
"""
import logging
from typing import Iterable, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def gen_holdings(
    months: pd.PeriodIndex,
    hack_months: Iterable[pd.Period],
    rng_seed: Optional[int] = None,
    prime_effect: float = 0.026,
    noise_sd: float = 0.02,
    base_prime: float = 0.25,
    base_treasury: float = 0.45,
) -> pd.DataFrame:
    """Prime CP, Treasury and repo shares with a hack-month tilt toward prime CP

    Shares carry a calendar-month pattern and a yearly drift; in hack months prime CP gains
    ``prime_effect`` at the expense of Treasuries. Repo is the remainder.
    """
    rng = np.random.default_rng(rng_seed)
    months = pd.PeriodIndex(months, freq="M")
    hack = months.isin(pd.PeriodIndex(list(hack_months), freq="M")).astype(float)
    seasonal = rng.normal(0.0, 0.01, 12)[months.month - 1]
    years = np.asarray(months.year - months.year.min(), dtype=float)
    drift = 0.005 * years

    noise = rng.normal(0, noise_sd, len(months))
    prime = base_prime + seasonal + drift + prime_effect * hack + noise
    treasury = base_treasury - seasonal - prime_effect * hack + rng.normal(0, noise_sd, len(months))
    frame = pd.DataFrame(
        {
            "month": months,
            "prime_cp_share": prime,
            "treasury_share": treasury,
            "repo_share": 1.0 - prime - treasury,
            "hack_month": hack,
        }
    )
    logger.info("Generated holdings for %d months (%d hack months)", len(frame), int(hack.sum()))
    return frame
