"""
Pydantic models for the JSON result files written by the commands
"""
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from app.services.econ.giv import TslsResult
from app.services.econ.linear import RegressionResult
from app.services.econ.placebo import PlaceboResult
from app.services.econ.threshold import ThresholdResult


def _float(value: float) -> Optional[float]:
    value = float(value)
    return value if np.isfinite(value) else None


class CoefficientRow(BaseModel):
    """One regression coefficient with its inference"""
    term: str
    coef: Optional[float]
    se: Optional[float]
    t: Optional[float]
    p: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]


class JointTestSummary(BaseModel):
    """Wald F test of a group of coefficients"""
    name: str
    f_stat: Optional[float]
    df1: int
    df2: int
    p_value: Optional[float]


class RegressionSummary(BaseModel):
    """Coefficients and diagnostics of one regression"""
    label: str
    se_flavor: str
    n_obs: int
    df_resid: int
    r2: Optional[float]
    n_clusters: Optional[int] = None
    coefficients: List[CoefficientRow]
    joint_tests: List[JointTestSummary] = []
    warnings: List[str] = []

    @classmethod
    def from_result(cls, label: str, result: RegressionResult) -> "RegressionSummary":
        rows = [
            CoefficientRow(**{k: (_float(v) if k != "term" else v) for k, v in row.items()})
            for row in result.to_frame().to_dict(orient="records")
        ]
        tests = [
            JointTestSummary(
                name=jt.name,
                f_stat=_float(jt.f_stat),
                df1=jt.df1,
                df2=jt.df2,
                p_value=_float(jt.p_value),
            )
            for jt in result.joint_tests
        ]
        return cls(
            label=label,
            se_flavor=result.se_flavor,
            n_obs=result.n_obs,
            df_resid=result.df_resid,
            r2=_float(result.r2),
            n_clusters=result.n_clusters,
            coefficients=rows,
            joint_tests=tests,
            warnings=list(result.warnings),
        )


class ThresholdSummary(BaseModel):
    """Threshold estimate, confidence set and regime coefficients"""
    gamma_hat: float
    ci_low: float
    ci_high: float
    bootstrap_p: Optional[float]
    f_stat: Optional[float]
    beta_low: Optional[float]
    se_low: Optional[float]
    beta_high: Optional[float]
    se_high: Optional[float]
    n_bootstrap: int
    warnings: List[str] = []

    @classmethod
    def from_result(cls, result: ThresholdResult) -> "ThresholdSummary":
        return cls(
            gamma_hat=result.gamma_hat,
            ci_low=result.ci_95[0],
            ci_high=result.ci_95[1],
            bootstrap_p=_float(result.bootstrap_p),
            f_stat=_float(result.f_stat),
            beta_low=_float(result.beta_low),
            se_low=_float(result.se_low),
            beta_high=_float(result.beta_high),
            se_high=_float(result.se_high),
            n_bootstrap=result.n_bootstrap,
            warnings=list(result.warnings),
        )


class TslsSummary(BaseModel):
    """Instrumented multiplier with first-stage strength"""
    multiplier_bps_per_100m: Optional[float]
    multiplier_se: Optional[float]
    first_stage_f: Optional[float]
    weak_instrument: bool
    n_events: int
    first_stage: RegressionSummary
    second_stage: RegressionSummary
    warnings: List[str] = []

    @classmethod
    def from_result(cls, result: TslsResult) -> "TslsSummary":
        return cls(
            multiplier_bps_per_100m=_float(result.multiplier),
            multiplier_se=_float(result.multiplier_se),
            first_stage_f=_float(result.first_stage_f),
            weak_instrument=result.weak_instrument,
            n_events=int(result.stage2_frame["event_id"].nunique()),
            first_stage=RegressionSummary.from_result("first_stage", result.first_stage),
            second_stage=RegressionSummary.from_result("second_stage", result.second_stage),
            warnings=list(result.warnings),
        )


class PlaceboSummary(BaseModel):
    """Empirical p-values and the pool they were drawn from"""
    n_draws: int
    pool_size: int
    diagnostics: Dict[str, int]
    p_values: Dict[str, Optional[float]]
    warnings: List[str] = []

    @classmethod
    def from_result(cls, result: PlaceboResult) -> "PlaceboSummary":
        return cls(
            n_draws=result.n_draws,
            pool_size=result.pool_size,
            diagnostics=dict(result.diagnostics),
            p_values={f"k{k:+d}": _float(p) for k, p in zip(result.ks, result.p_values)},
            warnings=list(result.warnings),
        )


class CalibrationSummary(BaseModel):
    """Structural recovery, robust portfolio and run-threshold results"""
    beta_bps: float
    se_bps: float
    eta_baseline: Optional[float]
    eta_ci: List[Optional[float]]
    max_deviation_from_reference: Optional[float]
    xi_star: float
    w_star: float
    eta_implied: float
    regime: str
    corner_psi: Optional[float]
    global_game: Dict[str, float]


class ManifestEntry(BaseModel):
    """One output file"""
    path: str
    size: int
    sha256: str


class Manifest(BaseModel):
    """Every file a command wrote"""
    command: str
    seed: int
    files: List[ManifestEntry]
