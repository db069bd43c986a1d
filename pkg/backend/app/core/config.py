"""
Application configuration

Environment overrides come from ``Settings``; everything else is a ``RunConfig`` loaded
from one YAML file. Precedence: defaults < YAML < environment < command-line flags.
"""
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings

from app.core.exceptions import ConfigError
from app.services.ambiguity.robust_control import JumpAsset, Preferences
from app.services.datagen.market import AR1Spec, MarketConfig
from app.services.globalgame.thresholds import GameParams, GasMap
from app.services.structmodel.params import NoiseConfig, StructuralParams

logger = logging.getLogger(__name__)

# Load .env file from project root (two levels up from this file)
# backend/app/core/config.py -> backend/app -> backend -> project_root
project_root = Path(__file__).parent.parent.parent.parent
env_file_path = project_root / ".env"
load_dotenv(dotenv_path=env_file_path)


class Settings(BaseSettings):
    """Environment overrides (LR_*)"""

    config_path: Optional[Path] = None
    seed: Optional[int] = None
    output_dir: Optional[Path] = None
    panel_path: Optional[Path] = None
    events_path: Optional[Path] = None
    threads: Optional[int] = None
    log_level: str = "INFO"

    class Config:
        env_prefix = "LR_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        extra = "ignore"  # Ignore extra fields in .env file


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


DEFAULT_CONTROLS = ["vix", "dxy", "btc_return"]


def _check_window(window: Tuple[int, int]) -> Tuple[int, int]:
    lo, hi = window
    if not (lo <= -1 and hi >= 0):
        raise ValueError(f"window {window} must contain days -1 and 0")
    return window


Window = Annotated[Tuple[int, int], AfterValidator(_check_window)]


class PathsConfig(_Block):
    panel: Optional[Path] = None
    events: Optional[Path] = None
    holdings: Optional[Path] = None
    weights: Optional[Path] = None
    output_dir: Path = Path("output")
    blackout: Optional[Path] = None
    holidays: Optional[Path] = None


class StructuralConfig(_Block):
    """StructuralParams plus the observation layer"""

    kappa: float = 0.002
    phi0: float = 20.0
    phi1: float = 200.0
    gamma_c: float = 2.0
    rho0: float = 0.0
    rho1: float = 0.003
    rho2: float = 0.002
    psi: float = 0.01
    omega_bar: float = 0.7
    eta: float = 3.73
    lambda_price: float = 1.0
    float_usd: float = 130e9
    baseline_spread_bps: float = 12.34
    noise_sd_bps: float = 1.0
    spread_reversion: float = 0.05

    @model_validator(mode="after")
    def _domains(self) -> "StructuralConfig":
        # DomainError is a ValueError, so pydantic reports it as a validation error
        self.params()
        self.noise()
        return self

    def params(self) -> StructuralParams:
        observation = {"float_usd", "baseline_spread_bps", "noise_sd_bps", "spread_reversion"}
        fields = self.model_dump(exclude=observation)
        return StructuralParams(**fields)

    def noise(self) -> NoiseConfig:
        return NoiseConfig(
            baseline_spread_bps=self.baseline_spread_bps,
            noise_sd_bps=self.noise_sd_bps,
            float_usd=self.float_usd,
            reversion=self.spread_reversion,
        )


class AR1Block(_Block):
    mean: float
    sd: float = Field(ge=0)
    phi: float = Field(default=0.0, gt=-1, lt=1)

    def spec(self) -> AR1Spec:
        return AR1Spec(self.mean, self.sd, self.phi)


class SimulationConfig(_Block):
    start: str = "2021-01-04"
    end: str = "2024-12-31"
    n_events: int = Field(default=50, ge=0)
    min_gap_days: int = Field(default=0, ge=0)
    event_window: Window = (-5, 3)
    loss_log_mean: float = 16.98
    loss_log_sd: float = Field(default=1.97, ge=0)
    n_protocols: int = Field(default=20, ge=1)
    vix: AR1Block = AR1Block(mean=19.44, sd=5.28, phi=0.97)
    dxy: AR1Block = AR1Block(mean=101.04, sd=5.80, phi=0.995)
    btc_return: AR1Block = AR1Block(mean=0.0018, sd=0.0394, phi=0.0)
    vix_beta_bps: float = 0.5
    gas_noise_sd: float = Field(default=0.3, ge=0)
    flow_noise_usd: float = Field(default=50e6, ge=0)
    n_holdings_months: int = Field(default=48, ge=0)
    scenario: Optional[str] = None

    def market_config(self) -> MarketConfig:
        return MarketConfig(
            start=self.start,
            end=self.end,
            vix=self.vix.spec(),
            dxy=self.dxy.spec(),
            btc_return=self.btc_return.spec(),
            vix_beta_bps=self.vix_beta_bps,
            gas_noise_sd=self.gas_noise_sd,
            flow_noise_usd=self.flow_noise_usd,
        )


class EventStudyConfig(_Block):
    window: Window = (-5, 3)
    controls: List[str] = Field(default_factory=lambda: list(DEFAULT_CONTROLS))
    outcome: str = "cp_spread_bps"
    difference_outcome: bool = False
    cluster: Literal["event", "date"] = "event"


class ThresholdConfig(_Block):
    window: Window = (-5, 3)
    grid: Union[str, List[float]] = "unique"
    trim: float = Field(default=0.15, ge=0, lt=0.5)
    n_bootstrap: int = Field(default=1000, ge=0)
    controls: List[str] = Field(default_factory=lambda: list(DEFAULT_CONTROLS))
    lr_critical: float = Field(default=7.35, gt=0)
    threshold_var: str = "gas_event"
    outcome: str = "net_redemption_usd"


class GivConfig(_Block):
    instrument_lag: int = Field(default=1, ge=0)
    nw_lag: int = Field(default=1, ge=0)
    post_window: Window = (-5, 3)
    weak_f: float = 10.0
    flow: str = "net_redemption_usd"
    macro: List[str] = Field(default_factory=lambda: list(DEFAULT_CONTROLS))
    first_stage_controls: List[str] = Field(default_factory=list)
    stage2_controls: List[str] = Field(default_factory=list)
    n_eta_bootstrap: int = Field(default=1000, ge=0)
    split_date: str = "2022-05-07"


class LocalProjectionsConfig(_Block):
    horizons: int = Field(default=6, ge=0)
    shock: Literal["binary", "log_loss"] = "binary"
    n_lags: int = Field(default=1, ge=0)
    controls: List[str] = Field(default_factory=lambda: ["vix", "dxy"])


class PlaceboConfig(_Block):
    n_draws: int = Field(default=500, ge=1)
    n_dates: int = Field(default=50, ge=1)
    exclusion_days: int = Field(default=10, ge=0)
    vix_tol: Optional[float] = Field(default=None, gt=0)
    spread_tol: Optional[float] = Field(default=None, gt=0)


class DidConfig(_Block):
    window: Window = (-5, 5)
    treat_asset: str = "aa_nonfin"
    control_assets: Optional[List[str]] = None


class MonthlyConfig(_Block):
    spec: Literal["level", "change"] = "level"
    nw_lag: int = Field(default=1, ge=0)
    controls: List[str] = Field(default_factory=lambda: list(DEFAULT_CONTROLS))


class GbrConfig(_Block):
    n_trees: int = Field(default=300, ge=0)
    max_depth: int = Field(default=3, ge=1)
    learning_rate: float = Field(default=0.05, gt=0, le=1)
    winsor_pct: float = Field(default=5.0, ge=0, lt=50)
    grid_points: int = Field(default=100, ge=5)
    smooth_window: int = Field(default=3, ge=1)
    horizon: int = Field(default=1, ge=0)


class PreferencesBlock(_Block):
    gamma_r: float = 2.0
    delta_d: float = 0.03
    psi_amb: float = 1.5
    a_scale: float = 1.0

    @model_validator(mode="after")
    def _domains(self) -> "PreferencesBlock":
        self.build()
        return self

    def build(self) -> Preferences:
        return Preferences(**self.model_dump())


class AssetBlock(_Block):
    mu: float = 0.04
    sigma: float = 0.2
    lambda_jump: float = 0.5
    loss_l: float = 0.5

    @model_validator(mode="after")
    def _domains(self) -> "AssetBlock":
        self.build()
        return self

    def build(self) -> JumpAsset:
        return JumpAsset(**self.model_dump())


class GameBlock(_Block):
    phi0_g: float = 0.1
    gamma_g: float = 0.3
    lambda_g: float = 2.0
    ambiguity_a: float = 2.0

    @model_validator(mode="after")
    def _domains(self) -> "GameBlock":
        self.build()
        return self

    def build(self) -> GameParams:
        return GameParams(**self.model_dump())


class GasMapBlock(_Block):
    slope: float = 0.0
    intercept: float = 32.93

    def build(self) -> GasMap:
        return GasMap(self.slope, self.intercept)


class CalibrationConfig(_Block):
    beta_bps: float = -2.73
    se_bps: float = Field(default=0.88, ge=0)
    lambda_grid: List[float] = Field(default_factory=lambda: [0.5, 0.75, 1.0, 1.25, 1.5, 2.0])
    preferences: PreferencesBlock = PreferencesBlock()
    asset: AssetBlock = AssetBlock()
    psi_grid: List[float] = Field(
        default_factory=lambda: [0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0]
    )
    game: GameBlock = GameBlock()
    gas_map: GasMapBlock = GasMapBlock()

    @field_validator("lambda_grid", "psi_grid")
    @classmethod
    def _positive(cls, values: List[float]) -> List[float]:
        if not values or min(values) <= 0:
            raise ValueError("grid must be non-empty and strictly positive")
        return values


class RunConfig(_Block):
    """Validated configuration of one toolkit run"""

    seed: int = 42
    threads: int = Field(default=1, ge=1)
    paths: PathsConfig = PathsConfig()
    structural: StructuralConfig = StructuralConfig()
    simulation: SimulationConfig = SimulationConfig()
    event_study: EventStudyConfig = EventStudyConfig()
    threshold: ThresholdConfig = ThresholdConfig()
    giv: GivConfig = GivConfig()
    local_projections: LocalProjectionsConfig = LocalProjectionsConfig()
    placebo: PlaceboConfig = PlaceboConfig()
    did: DidConfig = DidConfig()
    monthly: MonthlyConfig = MonthlyConfig()
    gbr: GbrConfig = GbrConfig()
    calibration: CalibrationConfig = CalibrationConfig()


def _merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML mapping"""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return data


def _env_overrides(env: Settings) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    paths: Dict[str, Any] = {}
    if env.seed is not None:
        overrides["seed"] = env.seed
    if env.threads is not None:
        overrides["threads"] = env.threads
    if env.output_dir is not None:
        paths["output_dir"] = env.output_dir
    if env.panel_path is not None:
        paths["panel"] = env.panel_path
    if env.events_path is not None:
        paths["events"] = env.events_path
    if paths:
        overrides["paths"] = paths
    return overrides


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    env: Optional[Settings] = None,
) -> RunConfig:
    """Build the run configuration from YAML, environment and explicit overrides"""
    env = env if env is not None else Settings()
    path = path if path is not None else env.config_path
    data = read_yaml(path) if path is not None else {}
    data = _merge(data, _env_overrides(env))
    data = _merge(data, overrides or {})
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    logger.info("Loaded configuration%s", f" from {path}" if path else " (defaults)")
    return config


def config_schema() -> Dict[str, Any]:
    """JSON schema of RunConfig"""
    return RunConfig.model_json_schema()
