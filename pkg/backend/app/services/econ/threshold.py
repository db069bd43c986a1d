"""
Panel threshold regression with a bootstrap test for the threshold effect

The outcome is regressed on Post x 1(q <= gamma) and Post x 1(q > gamma) with event fixed
effects. gamma minimizes the residual sum of squares over a trimmed grid; a 95% set comes
from inverting the likelihood-ratio statistic at the asymptotic 7.35 cutoff, and the
no-threshold null is tested by resampling residuals of the linear model.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.core.exceptions import EstimatorError, TrimmingError
from app.core.panels import StackedPanel
from app.services.econ.linear import RegressionResult, ols
from app.services.econ.replicates import run_replicates

logger = logging.getLogger(__name__)

LR_CRITICAL_95 = 7.35
REGIME_LOW = "post_low"
REGIME_HIGH = "post_high"

GridRule = Union[str, Sequence[float]]


@dataclass
class ThresholdResult:
    """Estimated threshold, its confidence set, bootstrap p and regime coefficients"""

    gamma_hat: float
    ci_95: Tuple[float, float]
    bootstrap_p: float
    f_stat: float
    beta_low: float
    se_low: float
    beta_high: float
    se_high: float
    grid: np.ndarray
    ssr: np.ndarray
    lr: np.ndarray
    regression: RegressionResult
    n_bootstrap: int = 0
    warnings: List[str] = field(default_factory=list)

    def grid_frame(self) -> pd.DataFrame:
        """SSR and LR statistic per candidate, for plotting"""
        return pd.DataFrame({"gamma": self.grid, "ssr": self.ssr, "lr": self.lr})

    def summary(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "ci_low": self.ci_95[0],
            "ci_high": self.ci_95[1],
            "bootstrap_p": self.bootstrap_p,
            "f_stat": self.f_stat,
            "beta_low": self.beta_low,
            "se_low": self.se_low,
            "beta_high": self.beta_high,
            "se_high": self.se_high,
            "n_bootstrap": self.n_bootstrap,
            "n_candidates": int(len(self.grid)),
        }


def threshold_grid(q: np.ndarray, rule: GridRule = "unique", trim: float = 0.15) -> np.ndarray:
    """Candidate thresholds leaving at least ``trim`` of the rows in each regime

    Rules: "unique" (sorted distinct values), "quantiles:N" (N evenly spaced quantiles)
    or an explicit list of values.
    """
    if not 0.0 <= trim < 0.5:
        raise TrimmingError("trim fraction must lie in [0, 0.5)")
    if isinstance(rule, str):
        if rule == "unique":
            candidates = np.unique(q)
        elif rule.startswith("quantiles:"):
            n = int(rule.split(":", 1)[1])
            candidates = np.unique(np.quantile(q, np.linspace(0.0, 1.0, n)))
        else:
            raise EstimatorError(f"unknown threshold grid rule '{rule}'")
    else:
        candidates = np.unique(np.asarray(list(rule), dtype=float))
    below = (q[None, :] <= candidates[:, None]).mean(axis=1)
    keep = (below >= trim) & (1.0 - below >= trim)
    # an explicit single candidate is honored as long as both regimes are populated
    if len(candidates) == 1 and not isinstance(rule, str):
        keep = (below > 0) & (below < 1)
    if not keep.any():
        raise TrimmingError(
            f"all {len(candidates)} threshold candidates leave a regime below {trim:.0%} of rows"
        )
    return candidates[keep]


def _demean_by_event(matrix: np.ndarray, event_ids: np.ndarray) -> np.ndarray:
    """Subtract each event's column means, the event fixed effects of the split search"""
    frame = pd.DataFrame(matrix)
    return (frame - frame.groupby(event_ids).transform("mean")).to_numpy()


class _GridSSR:
    """Least-squares SSR of every candidate split for any within-transformed outcome"""

    def __init__(self, base: np.ndarray, regimes: np.ndarray):
        self.base = base
        self.regimes = regimes
        k = base.shape[1]
        g = regimes.shape[1]
        btb = base.T @ base
        btd = base.T @ regimes
        dtd = np.einsum("ij,ij->j", regimes, regimes)
        moments = np.empty((g, k + 1, k + 1))
        moments[:, :k, :k] = btb
        moments[:, :k, k] = btd.T
        moments[:, k, :k] = btd.T
        moments[:, k, k] = dtd
        self.inverse = np.linalg.pinv(moments)
        self.null_inverse = np.linalg.pinv(btb)

    def null_ssr(self, y: np.ndarray) -> float:
        v = self.base.T @ y
        return float(y @ y - v @ self.null_inverse @ v)

    def ssr(self, y: np.ndarray) -> np.ndarray:
        g = self.regimes.shape[1]
        shared = np.broadcast_to(self.base.T @ y, (g, self.base.shape[1]))
        v = np.column_stack([shared, self.regimes.T @ y])
        fitted = np.einsum("gi,gij,gj->g", v, self.inverse, v)
        return np.maximum(float(y @ y) - fitted, 0.0)


def _confidence_set(
    grid: np.ndarray, lr: np.ndarray, gamma_hat: float, critical: float
) -> Tuple[float, float]:
    if len(grid) == 1:
        return gamma_hat, gamma_hat
    accepted = grid[lr <= critical]
    upper_index = int(np.searchsorted(grid, accepted.max(), side="right"))
    # any gamma up to the next candidate produces the same sample split
    upper = grid[upper_index] if upper_index < len(grid) else accepted.max()
    return float(accepted.min()), float(upper)


def threshold_regression(
    stacked: StackedPanel,
    threshold_var: str = "gas_event",
    post_var: str = "post",
    controls: Optional[Sequence[str]] = None,
    grid: GridRule = "unique",
    trim: float = 0.15,
    n_bootstrap: int = 1000,
    lr_critical: float = LR_CRITICAL_95,
    rng_seed: Optional[int] = None,
    threads: int = 1,
    outcome: Optional[str] = None,
) -> ThresholdResult:
    """Estimate a single threshold in the post-event response

    Args:
        stacked: stacked panel carrying the outcome, threshold and post columns
        threshold_var: column holding the threshold variable q
        post_var: post-event indicator
        controls: control columns, default the panel's own controls
        grid: candidate rule, see ``threshold_grid``
        trim: minimum share of rows on each side of a candidate
        n_bootstrap: residual bootstrap replications (0 skips the test)
        lr_critical: cutoff for the likelihood-ratio confidence set
        rng_seed: seed of the bootstrap
        threads: bootstrap worker cap
        outcome: dependent variable, default the panel outcome
    """
    frame = stacked.frame
    controls = list(stacked.controls if controls is None else controls)
    outcome = outcome or stacked.outcome
    for column in [threshold_var, post_var, outcome, *controls]:
        if column not in frame.columns:
            raise EstimatorError(f"column '{column}' is not in the stacked panel")

    q = frame[threshold_var].to_numpy(dtype=float)
    post = frame[post_var].to_numpy(dtype=float)
    candidates = threshold_grid(q, grid, trim)
    event_ids = frame["event_id"].to_numpy()

    raw = np.column_stack(
        [
            frame[outcome].to_numpy(dtype=float),
            post,
            frame[controls].to_numpy(dtype=float).reshape(len(frame), len(controls)),
            post[:, None] * (q[:, None] <= candidates[None, :]),
        ]
    )
    within = _demean_by_event(raw, event_ids)
    y = within[:, 0]
    base = within[:, 1 : 2 + len(controls)]
    regimes = within[:, 2 + len(controls) :]
    engine = _GridSSR(base, regimes)

    ssr = engine.ssr(y)
    best = int(np.argmin(ssr))
    gamma_hat = float(candidates[best])
    ssr_min = float(ssr[best])
    n = len(y)
    if ssr_min <= 0:
        raise EstimatorError("threshold model fits the outcome exactly; statistics undefined")
    lr = n * (ssr - ssr_min) / ssr_min
    ci = _confidence_set(candidates, lr, gamma_hat, lr_critical)

    ssr_null = engine.null_ssr(y)
    f_stat = n * (ssr_null - ssr_min) / ssr_min
    p_value = _bootstrap_p(engine, y, f_stat, event_ids, n_bootstrap, rng_seed, threads)

    design = pd.DataFrame(
        {
            REGIME_LOW: post * (q <= gamma_hat),
            REGIME_HIGH: post * (q > gamma_hat),
        }
    )
    for c in controls:
        design[c] = frame[c].to_numpy(dtype=float)
    fit = ols(
        design,
        frame[outcome],
        fixed_effects=[frame["event_id"]],
        se_flavor="cluster" if stacked.n_events > 1 else "classical",
        clusters=frame["event_id"],
        cluster_name="event",
    )
    logger.info(
        "Threshold %.3f (95%% set [%.3f, %.3f]), F = %.2f, bootstrap p = %.3f",
        gamma_hat, ci[0], ci[1], f_stat, p_value,
    )
    return ThresholdResult(
        gamma_hat=gamma_hat,
        ci_95=ci,
        bootstrap_p=p_value,
        f_stat=float(f_stat),
        beta_low=fit.coef(REGIME_LOW),
        se_low=fit.se_of(REGIME_LOW),
        beta_high=fit.coef(REGIME_HIGH),
        se_high=fit.se_of(REGIME_HIGH),
        grid=candidates,
        ssr=ssr,
        lr=lr,
        regression=fit,
        n_bootstrap=n_bootstrap,
        warnings=list(fit.warnings),
    )


def _bootstrap_p(
    engine: _GridSSR,
    y: np.ndarray,
    f_stat: float,
    event_ids: np.ndarray,
    n_bootstrap: int,
    rng_seed: Optional[int],
    threads: int,
) -> float:
    if n_bootstrap <= 0:
        return float("nan")
    coef = engine.null_inverse @ (engine.base.T @ y)
    fitted = engine.base @ coef
    resid = y - fitted
    n = len(y)

    def replicate(_: int, rng: np.random.Generator) -> float:
        draw = resid[rng.integers(0, n, n)]
        y_star = fitted + _demean_by_event(draw[:, None], event_ids)[:, 0]
        ssr1 = float(engine.ssr(y_star).min())
        ssr0 = engine.null_ssr(y_star)
        return n * (ssr0 - ssr1) / ssr1 if ssr1 > 0 else np.inf

    stats = np.asarray(run_replicates(replicate, n_bootstrap, rng_seed, threads))
    return float((1 + np.sum(stats >= f_stat)) / (n_bootstrap + 1))
