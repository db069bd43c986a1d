"""
Least squares with fixed effects and robust covariance estimators

This is the shared backbone of the event-study, threshold, IV, local-projection and
monthly regressions. Fixed effects enter as dummy columns and statsmodels does the fit
with every covariance flavor. ``RegressionResult`` keeps only the regressors of interest.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy import linalg, stats
from statsmodels.stats.sandwich_covariance import S_hac_simple, weights_bartlett

from app.core.exceptions import DomainError, EstimatorError, RankDeficiencyError

logger = logging.getLogger(__name__)

SE_FLAVORS = ("classical", "HC0", "HC1", "HC3", "cluster", "newey_west")

ArrayLike = Union[np.ndarray, pd.Series, Sequence[float]]

FixedEffects = Optional[Union[pd.DataFrame, Sequence[ArrayLike]]]


@dataclass
class JointTest:
    """Wald F test of a set of linear zero restrictions"""

    name: str
    f_stat: float
    df1: int
    df2: int
    p_value: float


@dataclass
class RegressionResult:
    """Coefficients, covariance and diagnostics of one regression"""

    names: List[str]
    params: np.ndarray
    cov: np.ndarray
    se_flavor: str
    n_obs: int
    df_resid: int
    r2: float
    adj_r2: float
    resid: np.ndarray
    n_clusters: Optional[int] = None
    joint_tests: List[JointTest] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        k = len(self.names)
        if self.params.shape != (k,) or self.cov.shape != (k, k):
            raise EstimatorError("coefficient and covariance dimensions disagree")
        self.cov = 0.5 * (self.cov + self.cov.T)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tvalues(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.se

    @property
    def pvalues(self) -> np.ndarray:
        return 2.0 * stats.t.sf(np.abs(self.tvalues), max(self.df_resid, 1))

    @property
    def ssr(self) -> float:
        return float(self.resid @ self.resid)

    def conf_int(self, alpha: float = 0.05) -> np.ndarray:
        """Confidence bounds from the t distribution with the result's df"""
        crit = stats.t.ppf(1.0 - alpha / 2.0, max(self.df_resid, 1))
        return np.column_stack([self.params - crit * self.se, self.params + crit * self.se])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no coefficient named '{name}'") from None

    def coef(self, name: str) -> float:
        return float(self.params[self.index(name)])

    def se_of(self, name: str) -> float:
        return float(self.se[self.index(name)])

    def test(self, name: str) -> JointTest:
        """Get a stored joint test by name"""
        for jt in self.joint_tests:
            if jt.name == name:
                return jt
        raise KeyError(f"no joint test named '{name}'")

    def to_frame(self) -> pd.DataFrame:
        """Coefficient table: term, coef, se, t, p, ci_low, ci_high"""
        ci = self.conf_int()
        return pd.DataFrame(
            {
                "term": self.names,
                "coef": self.params,
                "se": self.se,
                "t": self.tvalues,
                "p": self.pvalues,
                "ci_low": ci[:, 0],
                "ci_high": ci[:, 1],
            }
        )


def _key_columns(keys: FixedEffects, n: int) -> List[np.ndarray]:
    if keys is None:
        return []
    if isinstance(keys, pd.DataFrame):
        columns = [keys[c].to_numpy() for c in keys.columns]
    else:
        columns = [np.asarray(k) for k in keys]
    for col in columns:
        if len(col) != n:
            raise EstimatorError("fixed-effect key length does not match the data")
    return columns


def _numeric_rank(matrix: np.ndarray) -> Tuple[int, np.ndarray]:
    _, r, piv = linalg.qr(matrix, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return 0, piv
    rank = int(np.sum(diag > diag[0] * max(matrix.shape) * np.finfo(float).eps * 10))
    return rank, piv


def fixed_effect_dummies(keys: FixedEffects, n: int) -> pd.DataFrame:
    """Linearly independent dummy columns spanning every fixed-effect key

    Redundant levels (one per connected block of crossed keys) are dropped.
    """
    columns = _key_columns(keys, n)
    if not columns:
        return pd.DataFrame(index=range(n))
    dummies = pd.concat(
        [
            pd.get_dummies(pd.Series(col), prefix=f"fe{j}", prefix_sep=":", dtype=float)
            for j, col in enumerate(columns)
        ],
        axis=1,
    )
    if len(columns) == 1:
        return dummies
    rank, piv = _numeric_rank(dummies.to_numpy())
    return dummies.iloc[:, np.sort(piv[:rank])]


def _check_rank(x: np.ndarray, names: List[str]) -> None:
    if x.shape[1] == 0:
        return
    scale = np.abs(x).max(axis=0)
    dead = [names[j] for j in np.flatnonzero(scale <= 1e-12)]
    if dead:
        raise RankDeficiencyError("design has no variation after absorbing fixed effects", dead)
    rank, piv = _numeric_rank(x / scale)
    if rank < x.shape[1]:
        raise RankDeficiencyError(
            "design matrix is rank deficient", [names[j] for j in sorted(piv[rank:])]
        )


def newey_west(residuals: ArrayLike, design: ArrayLike, lag: int) -> np.ndarray:
    """Bartlett-kernel HAC covariance of OLS coefficients

    ``(X'X)^-1 S (X'X)^-1`` with S the unnormalized Bartlett-weighted sum of score
    autocovariances; lag 0 is the HC0 sandwich.
    """
    u = np.asarray(residuals, dtype=float).ravel()
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    _check_lag(lag, len(u))
    bread = np.linalg.inv(x.T @ x)
    meat = S_hac_simple(x * u[:, None], nlags=lag, weights_func=weights_bartlett)
    return bread @ meat @ bread


def _check_lag(lag: int, n: int) -> None:
    if lag < 0:
        raise DomainError("Newey-West lag must be non-negative")
    if lag >= n:
        raise EstimatorError(f"Newey-West lag {lag} must be smaller than the sample size {n}")


def _fit_options(
    se_flavor: str, clusters: Optional[ArrayLike], nw_lag: int, n: int, cluster_name: str
) -> Tuple[Dict[str, object], str, Optional[int]]:
    """statsmodels ``fit`` keywords, the flavor tag and the cluster count"""
    if se_flavor == "classical":
        return {}, "classical", None
    if se_flavor in ("HC0", "HC1", "HC3"):
        return {"cov_type": se_flavor}, se_flavor, None
    if se_flavor == "cluster":
        if clusters is None:
            raise EstimatorError("cluster SEs requested without cluster labels")
        groups = pd.factorize(np.asarray(clusters), sort=True)[0]
        if len(groups) != n:
            raise EstimatorError("cluster labels do not match the data")
        g = int(groups.max()) + 1
        if g < 2:
            raise EstimatorError("cluster SEs need at least two clusters")
        options = {"cov_type": "cluster", "cov_kwds": {"groups": groups}}
        return options, f"cluster({cluster_name})", g
    _check_lag(nw_lag, n)
    options = {"cov_type": "HAC", "cov_kwds": {"maxlags": nw_lag, "use_correction": False}}
    return options, f"NeweyWest({nw_lag})", None


def ols(
    design: pd.DataFrame,
    outcome: ArrayLike,
    fixed_effects: FixedEffects = None,
    se_flavor: str = "classical",
    clusters: Optional[ArrayLike] = None,
    nw_lag: int = 0,
    add_intercept: Optional[bool] = None,
    cluster_name: str = "cluster",
) -> RegressionResult:
    """Ordinary least squares with fixed effects, fitted by statsmodels

    Args:
        design: regressors, one column per coefficient
        outcome: dependent variable
        fixed_effects: one or more key columns, expanded into dummies
        se_flavor: classical | HC0 | HC1 | HC3 | cluster | newey_west
        clusters: cluster labels when ``se_flavor == "cluster"``
        nw_lag: bandwidth when ``se_flavor == "newey_west"``
        add_intercept: defaults to True without fixed effects, False with them
        cluster_name: label written into the SE flavor tag
    """
    if se_flavor not in SE_FLAVORS:
        raise EstimatorError(f"unknown SE flavor '{se_flavor}'")
    y = np.asarray(outcome, dtype=float).ravel()
    n = len(y)
    if len(design) != n:
        raise EstimatorError("design and outcome lengths differ")

    dummies = fixed_effect_dummies(fixed_effects, n)
    if add_intercept is None:
        add_intercept = dummies.shape[1] == 0
    x_frame = design.reset_index(drop=True).astype(float)
    if add_intercept and "const" not in x_frame.columns:
        x_frame.insert(0, "const", 1.0)
    names = [str(c) for c in x_frame.columns]
    x = x_frame.to_numpy()
    k = x.shape[1]

    d = dummies.to_numpy()
    df_resid = n - k - d.shape[1]
    if df_resid < 0:
        raise EstimatorError(f"not enough observations ({n}) for {k + d.shape[1]} parameters")
    net = x - d @ np.linalg.lstsq(d, x, rcond=None)[0] if d.shape[1] else x
    _check_rank(net, names)

    model = sm.OLS(y, np.column_stack([x, d]) if d.shape[1] else x)
    warnings: List[str] = []
    if df_resid == 0:
        fit = model.fit()
        message = "model is exactly identified; standard errors are undefined"
        logger.warning(message)
        warnings.append(message)
        return RegressionResult(
            names=names,
            params=np.asarray(fit.params[:k], dtype=float),
            cov=np.full((k, k), np.nan),
            se_flavor=se_flavor,
            n_obs=n,
            df_resid=0,
            r2=float(fit.rsquared),
            adj_r2=float("nan"),
            resid=np.asarray(fit.resid, dtype=float),
            warnings=warnings,
        )

    options, tag, n_clusters = _fit_options(se_flavor, clusters, nw_lag, n, cluster_name)
    fit = model.fit(**options)
    cov = np.asarray(fit.cov_params(), dtype=float)[:k, :k]
    return RegressionResult(
        names=names,
        params=np.asarray(fit.params[:k], dtype=float),
        cov=cov,
        se_flavor=tag,
        n_obs=n,
        df_resid=n_clusters - 1 if n_clusters else df_resid,
        r2=float(fit.rsquared),
        adj_r2=float(fit.rsquared_adj),
        resid=np.asarray(fit.resid, dtype=float),
        n_clusters=n_clusters,
        warnings=warnings,
    )


def joint_f_test(result: RegressionResult, names: Sequence[str], label: str) -> JointTest:
    """Wald F test that all named coefficients are zero; stored on the result"""
    idx = [result.index(nm) for nm in names]
    if not idx:
        raise EstimatorError("joint test needs at least one coefficient")
    b = result.params[idx]
    v = result.cov[np.ix_(idx, idx)]
    q = len(idx)
    wald = float(b @ np.linalg.pinv(v) @ b)
    f_stat = wald / q
    df2 = max(result.df_resid, 1)
    test = JointTest(label, f_stat, q, df2, float(stats.f.sf(f_stat, q, df2)))
    result.joint_tests.append(test)
    return test


def residualize(outcome: ArrayLike, factors: pd.DataFrame) -> np.ndarray:
    """Residuals of the outcome on the factors plus an intercept"""
    y = np.asarray(outcome, dtype=float).ravel()
    f = factors.astype(float)
    if f.shape[1]:
        _check_rank(f.to_numpy(), [str(c) for c in f.columns])
    x = sm.add_constant(f, has_constant="add")
    fit = sm.OLS(y, x.to_numpy()).fit()
    resid = np.asarray(fit.resid, dtype=float)
    return resid - resid.mean()
