"""
Outlier handling shared by the estimators
"""
from typing import Union

import numpy as np
import pandas as pd

from app.core.exceptions import DataError, DomainError

Values = Union[np.ndarray, pd.Series]


def winsorize(values: Values, lower_pct: float = 1.0, upper_pct: float = 99.0) -> Values:
    """Clip values to their empirical percentiles

    Percentiles use linear interpolation between order statistics, so 1..100 at (5, 95)
    clips to [5.95, 95.05]. NaNs are ignored when locating the bounds and kept as NaN.
    A Series comes back as a Series with the same index.
    """
    if not 0.0 <= lower_pct < upper_pct <= 100.0:
        raise DomainError("winsorization needs 0 <= lower < upper <= 100")
    array = np.asarray(values, dtype=float)
    if array.size == 0 or np.isnan(array).all():
        raise DataError("cannot winsorize an empty series")
    low, high = np.nanpercentile(array, [lower_pct, upper_pct], method="linear")
    clipped = np.clip(array, low, high)
    if isinstance(values, pd.Series):
        return pd.Series(clipped, index=values.index, name=values.name)
    return clipped
