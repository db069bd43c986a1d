"""
Run thresholds of the vanishing-noise global game with congestion costs
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Protocol, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from app.core.exceptions import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GameParams:
    """Exit-cost function C(A) = phi0_g + gamma_g A^lambda_g and ambiguity exponent"""

    phi0_g: float = 0.1
    gamma_g: float = 0.3
    lambda_g: float = 2.0
    ambiguity_a: float = 2.0

    def __post_init__(self) -> None:
        if self.gamma_g < 0 or self.phi0_g < 0:
            raise DomainError("congestion cost coefficients must be non-negative")
        if self.lambda_g < 1:
            raise DomainError("lambda_g must be at least 1")
        if self.ambiguity_a < 1:
            raise DomainError("ambiguity exponent must be at least 1")


@dataclass(frozen=True)
class GasMap:
    """Affine bridge from the fundamental threshold to Gwei"""

    slope: float = 0.0
    intercept: float = 32.93


class AmbiguityDistortion(Protocol):
    """Distorted probability weighting with Psi(p) <= p on [0, 1]"""

    def value(self, p: float) -> float:
        ...

    def inverse(self, q: float) -> float:
        ...


@dataclass(frozen=True)
class PowerDistortion:
    """Psi(p) = p^a"""

    a: float

    def value(self, p: float) -> float:
        return float(p**self.a)

    def inverse(self, q: float) -> float:
        return float(q ** (1.0 / self.a))


class TabulatedDistortion:
    """Distortion given on a grid, inverted with a monotone cubic spline"""

    def __init__(self, p: Sequence[float], psi: Sequence[float]):
        p_arr = np.asarray(p, dtype=float)
        psi_arr = np.asarray(psi, dtype=float)
        if p_arr.shape != psi_arr.shape or len(p_arr) < 2:
            raise DomainError("tabulated distortion needs matching grids of length >= 2")
        if np.any(np.diff(p_arr) <= 0) or np.any(np.diff(psi_arr) <= 0):
            raise DomainError("tabulated distortion must be strictly increasing")
        if np.any(psi_arr > p_arr + 1e-12):
            logger.warning("Tabulated distortion exceeds p somewhere; it does not express aversion")
        self._forward = PchipInterpolator(p_arr, psi_arr)
        self._backward = PchipInterpolator(psi_arr, p_arr)
        self._q_range = (psi_arr[0], psi_arr[-1])

    def value(self, p: float) -> float:
        return float(self._forward(p))

    def inverse(self, q: float) -> float:
        lo, hi = self._q_range
        return float(self._backward(np.clip(q, lo, hi)))


def avg_congestion(params: GameParams) -> float:
    """Average exit cost over a uniform run size, phi0 + gamma / (lambda + 1)"""
    return params.phi0_g + params.gamma_g / (params.lambda_g + 1.0)


def run_threshold(c_bar: float) -> float:
    """Ambiguity-neutral run threshold on fundamentals"""
    if not 0.0 <= c_bar <= 1.0:
        raise DomainError("average congestion must lie in [0, 1]")
    return 1.0 - c_bar


def ambiguous_threshold(
    c_bar: float,
    ambiguity_a: float = 1.0,
    distortion: Optional[AmbiguityDistortion] = None,
) -> float:
    """Threshold when survival beliefs are distorted by Psi: solves Psi(theta) = 1 - C"""
    if not 0.0 <= c_bar < 1.0:
        raise DomainError("average congestion must lie in [0, 1)")
    if distortion is None:
        if ambiguity_a < 1:
            raise DomainError("ambiguity exponent must be at least 1")
        distortion = PowerDistortion(ambiguity_a)
    return distortion.inverse(1.0 - c_bar)


def gas_threshold(theta_amb: float, gas_map: GasMap) -> float:
    """Map a fundamental threshold to an observable gas level"""
    return gas_map.slope * (1.0 - theta_amb) + gas_map.intercept


def threshold_report(
    params: GameParams,
    gas_map: GasMap,
    distortion: Optional[AmbiguityDistortion] = None,
) -> Dict[str, float]:
    """Collect C-bar, both thresholds and the implied gas level"""
    c_bar = avg_congestion(params)
    theta = run_threshold(c_bar)
    theta_amb = ambiguous_threshold(c_bar, params.ambiguity_a, distortion)
    return {
        "c_bar": c_bar,
        "theta_star": theta,
        "theta_star_amb": theta_amb,
        "gas_threshold_gwei": gas_threshold(theta_amb, gas_map),
    }
