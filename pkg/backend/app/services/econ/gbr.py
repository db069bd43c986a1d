"""
Gradient-boosted response surface and curvature-based threshold detection
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.ensemble import GradientBoostingRegressor
from sklearn.inspection import partial_dependence

from app.core.exceptions import DataError, NoElbowError
from app.core.panels import EventCatalog, MarketPanel
from app.services.ingest.cleaning import winsorize

logger = logging.getLogger(__name__)

MIN_ROWS = 20
MIN_CURVE_POINTS = 5
FEATURES = ("gas", "vix", "loss")


@dataclass
class GbrModel:
    """Fitted boosting ensemble with normalized impurity-reduction importances"""

    estimator: Optional[GradientBoostingRegressor]
    feature_names: List[str]
    importances: Dict[str, float]
    learning_rate: float
    n_trees: int
    train_features: pd.DataFrame
    constant: float = 0.0
    warnings: List[str] = field(default_factory=list)

    def predict(self, features: pd.DataFrame) -> np.ndarray:
        x = features[self.feature_names].to_numpy(dtype=float)
        if self.estimator is None:
            return np.full(len(x), self.constant)
        return self.estimator.predict(x)

    def partial_response(self, feature: str, grid_points: int = 100) -> pd.DataFrame:
        """Average prediction over the training rows as ``feature`` sweeps its range"""
        if feature not in self.feature_names:
            raise DataError(f"model has no feature '{feature}'")
        x = self.train_features[self.feature_names].to_numpy(dtype=float)
        column = self.feature_names.index(feature)
        if self.estimator is None:
            grid = np.linspace(x[:, column].min(), x[:, column].max(), grid_points)
            return pd.DataFrame({"x": grid, "y": np.full(grid_points, self.constant)})
        pd_result = partial_dependence(
            self.estimator, x, [column], grid_resolution=grid_points, kind="average",
            percentiles=(0.0, 1.0),
        )
        grid = pd_result["grid_values"][0] if "grid_values" in pd_result else pd_result["values"][0]
        return pd.DataFrame({"x": np.asarray(grid), "y": np.asarray(pd_result["average"][0])})

    def importance_table(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {"feature": list(self.importances), "importance": list(self.importances.values())}
        )
        return frame.sort_values("importance", ascending=False, kind="mergesort")


def fit_gbr(
    features: pd.DataFrame,
    target: Sequence[float],
    n_trees: int = 300,
    max_depth: int = 3,
    learning_rate: float = 0.05,
    winsor_pct: float = 5.0,
    rng_seed: Optional[int] = 0,
) -> GbrModel:
    """Squared-error boosting of depth-limited trees on a winsorized target

    A target without variation after winsorizing yields a zero-tree model that predicts
    its mean, with all importances zero.
    """
    if len(features) < MIN_ROWS:
        raise DataError(f"boosting needs at least {MIN_ROWS} rows, got {len(features)}")
    names = [str(c) for c in features.columns]
    y = np.asarray(target, dtype=float)
    if len(y) != len(features):
        raise DataError("features and target lengths differ")
    if winsor_pct > 0:
        y = winsorize(y, winsor_pct, 100.0 - winsor_pct)

    if np.ptp(y) == 0.0:
        message = "target is constant; returning a zero-tree model"
        logger.warning(message)
        return GbrModel(
            estimator=None,
            feature_names=names,
            importances={n: 0.0 for n in names},
            learning_rate=learning_rate,
            n_trees=0,
            train_features=features.reset_index(drop=True),
            constant=float(y.mean()),
            warnings=[message],
        )

    estimator = GradientBoostingRegressor(
        loss="squared_error",
        n_estimators=n_trees,
        max_depth=max_depth,
        learning_rate=learning_rate,
        random_state=rng_seed,
    )
    estimator.fit(features.to_numpy(dtype=float), y)
    importances = dict(zip(names, map(float, estimator.feature_importances_)))
    logger.info("Boosting importances: %s", {k: round(v, 3) for k, v in importances.items()})
    return GbrModel(
        estimator=estimator,
        feature_names=names,
        importances=importances,
        learning_rate=learning_rate,
        n_trees=n_trees,
        train_features=features.reset_index(drop=True),
    )


def _snap(x: np.ndarray, value: float) -> float:
    distance = np.abs(x - value)
    nearest = np.flatnonzero(np.isclose(distance, distance.min(), rtol=0.0, atol=1e-12))
    # exact halfway points resolve to the lower grid value
    return float(x[nearest[0]])


def elbow_detect(x: Sequence[float], y: Sequence[float], smooth_window: int = 3) -> float:
    """Grid point of maximum discrete curvature |f''| / (1 + f'^2)^(3/2)

    The curve is first smoothed by a centered moving average; only points whose window
    and both neighbors are complete are scored. Ties resolve to the grid point nearest the
    middle of the tied points.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if len(xs) < MIN_CURVE_POINTS or len(xs) != len(ys):
        raise DataError(f"elbow detection needs at least {MIN_CURVE_POINTS} paired samples")
    if np.any(np.diff(xs) <= 0):
        raise DataError("elbow detection needs strictly increasing x")

    smooth = pd.Series(ys).rolling(smooth_window, center=True, min_periods=1).mean().to_numpy()
    half = smooth_window // 2
    idx = np.arange(half + 1, len(xs) - half - 1)
    if len(idx) == 0:
        raise DataError("curve is too short for the smoothing window")

    h_left = xs[idx] - xs[idx - 1]
    h_right = xs[idx + 1] - xs[idx]
    slope_left = (smooth[idx] - smooth[idx - 1]) / h_left
    slope_right = (smooth[idx + 1] - smooth[idx]) / h_right
    second = 2.0 * (slope_right - slope_left) / (h_left + h_right)
    first = (smooth[idx + 1] - smooth[idx - 1]) / (h_left + h_right)

    scale = (np.ptp(smooth) + 1e-300) / np.min(np.diff(xs)) ** 2
    if np.max(np.abs(second)) <= 1e-9 * scale:
        raise NoElbowError("no elbow: the curve has no curvature")
    curvature = np.abs(second) / (1.0 + first**2) ** 1.5
    peak = curvature.max()
    tied = xs[idx][curvature >= peak * (1.0 - 1e-9)]
    return _snap(xs, 0.5 * (tied.min() + tied.max()))


def gbr_threshold(model: GbrModel, feature: str = "gas", grid_points: int = 100,
                  smooth_window: int = 3) -> float:
    """Elbow of the partial response along one feature"""
    curve = model.partial_response(feature, grid_points)
    return elbow_detect(curve["x"].to_numpy(), curve["y"].to_numpy(), smooth_window)


def event_features(
    panel: MarketPanel,
    events: EventCatalog,
    horizon: int = 1,
    outcome: str = "cp_spread_bps",
) -> Tuple[pd.DataFrame, pd.Series]:
    """Per-event gas, VIX and log loss, with the spread change from day -1 to ``horizon``"""
    events.check_within(panel.dates)
    position = panel.dates.get_indexer(events.dates)
    keep = (position >= 1) & (position + horizon < len(panel.dates))
    if (~keep).any():
        logger.warning("Dropping %d event(s) too close to the panel edges", int((~keep).sum()))
    pos = position[keep]
    frame = events.frame[keep]
    spread = panel.frame[outcome].to_numpy(dtype=float)
    features = pd.DataFrame(
        {
            "gas": frame["gas_gwei"].to_numpy(dtype=float),
            "vix": panel.frame["vix"].to_numpy(dtype=float)[pos],
            "loss": np.log(frame["loss_usd"].to_numpy(dtype=float)),
        }
    )
    target = pd.Series(spread[pos + horizon] - spread[pos - 1], name="d_spread")
    return features, target
