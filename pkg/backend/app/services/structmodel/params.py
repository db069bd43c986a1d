"""
Parameter and state records of the structural transmission model
"""
from dataclasses import asdict, dataclass
from typing import Dict

from app.core.exceptions import DomainError


@dataclass(frozen=True)
class StructuralParams:
    """Calibration record for all three sectors of the model

    Redemption coefficients are fractions of the stablecoin float; the price impact
    ``lambda_price`` is in bps per $100M of net supply.
    """

    kappa: float = 0.002  # 1 / loss unit
    phi0: float = 20.0  # Gwei
    phi1: float = 200.0  # Gwei
    gamma_c: float = 2.0
    rho0: float = 0.0
    rho1: float = 0.003
    rho2: float = 0.002
    psi: float = 0.01  # 1 / Gwei
    omega_bar: float = 0.7
    eta: float = 3.73
    lambda_price: float = 1.0

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise DomainError("kappa must be non-negative")
        if self.phi1 <= 0:
            raise DomainError("phi1 must be positive")
        if self.gamma_c < 1:
            raise DomainError("gamma_c must be at least 1")
        if self.psi <= 0:
            raise DomainError("psi must be positive")
        if not 0.0 < self.omega_bar < 1.0:
            raise DomainError("omega_bar must lie strictly inside (0, 1)")
        if self.lambda_price <= 0:
            raise DomainError("lambda_price must be positive")
        if self.rho2 < 0:
            raise DomainError("rho2 must be non-negative")

    def to_dict(self) -> Dict[str, float]:
        """Plain mapping, used for ground-truth sidecars"""
        return {k: float(v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class NetworkState:
    """Sector I state for one day"""

    intensity: float
    availability: float
    friction: float


@dataclass(frozen=True)
class FlowState:
    """Sector II/III flows for one day"""

    crypto_return: float
    demand: float
    net_redemption: float
    spread_change: float
    net_supply: float


@dataclass(frozen=True)
class NoiseConfig:
    """Observation layer wrapped around a simulated path"""

    baseline_spread_bps: float = 12.34
    noise_sd_bps: float = 1.0
    float_usd: float = 130e9
    loss_unit_usd: float = 1e6
    reversion: float = 0.05  # daily pull of the latent spread toward the baseline

    def __post_init__(self) -> None:
        if self.noise_sd_bps < 0:
            raise DomainError("noise_sd_bps must be non-negative")
        if not 0.0 <= self.reversion <= 1.0:
            raise DomainError("reversion must lie in [0, 1]")
        if self.float_usd <= 0 or self.loss_unit_usd <= 0:
            raise DomainError("float_usd and loss_unit_usd must be positive")
