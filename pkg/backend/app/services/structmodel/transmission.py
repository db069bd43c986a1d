"""
Closed-form transmission chain from an exploit to the money-market spread

Every function accepts scalars or numpy arrays and broadcasts.
"""
from typing import Union

import numpy as np

from app.core.exceptions import DomainError
from app.services.structmodel.params import FlowState, NetworkState, StructuralParams

Number = Union[float, np.ndarray]

# R is converted to this many USD per unit before the price-impact step ($100M)
PRICE_UNIT_USD = 1e8


def availability(intensity: Number, kappa: float) -> Number:
    """Bridge availability after an attack of the given size, clamped to [0, 1]"""
    intensity = np.asarray(intensity, dtype=float)
    if kappa < 0 or np.any(intensity < 0):
        raise DomainError("availability requires non-negative intensity and kappa")
    result = np.clip(1.0 - kappa * intensity, 0.0, 1.0)
    return float(result) if result.ndim == 0 else result


def friction(omega: Number, phi0: float, phi1: float, gamma_c: float) -> Number:
    """Gas cost implied by availability omega"""
    omega = np.asarray(omega, dtype=float)
    if np.any((omega < 0.0) | (omega > 1.0)):
        raise DomainError("availability must lie in [0, 1]")
    result = phi0 + phi1 * np.power(1.0 - omega, gamma_c)
    return float(result) if result.ndim == 0 else result


def redemption_demand(crypto_return: Number, omega: Number, params: StructuralParams) -> Number:
    """Potential redemption demand as a fraction of float

    The panic premium switches on strictly below ``omega_bar``.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any((omega < 0.0) | (omega > 1.0)):
        raise DomainError("availability must lie in [0, 1]")
    panic = (omega < params.omega_bar).astype(float)
    result = params.rho0 + params.rho1 * (-np.asarray(crypto_return, dtype=float))
    result = result + params.rho2 * panic
    return float(result) if np.ndim(result) == 0 else result


def net_redemption(demand: Number, friction_gwei: Number, psi: float) -> Number:
    """Realized redemption: demand discounted by the exit friction"""
    friction_gwei = np.asarray(friction_gwei, dtype=float)
    if psi < 0 or np.any(friction_gwei < 0):
        raise DomainError("net_redemption requires psi >= 0 and friction >= 0")
    result = np.asarray(demand, dtype=float) / (1.0 + psi * friction_gwei)
    return float(result) if result.ndim == 0 else result


def excess_supply(redemption: Number, eta: float) -> Number:
    """Net safe-asset supply: reserve liquidation minus flight-to-quality demand"""
    result = (1.0 - eta) * np.asarray(redemption, dtype=float)
    return float(result) if result.ndim == 0 else result


def spread_change(redemption: Number, eta: float, lambda_price: float) -> Number:
    """Spread response in bps; ``redemption`` measured in $100M units"""
    if lambda_price <= 0:
        raise DomainError("lambda_price must be positive")
    result = lambda_price * np.asarray(excess_supply(redemption, eta), dtype=float)
    return float(result) if result.ndim == 0 else result


def network_state(intensity: float, params: StructuralParams) -> NetworkState:
    """Compose availability and friction for one day"""
    omega = availability(intensity, params.kappa)
    phi = friction(omega, params.phi0, params.phi1, params.gamma_c)
    return NetworkState(intensity=float(intensity), availability=omega, friction=phi)


def flow_state(
    crypto_return: float,
    network: NetworkState,
    params: StructuralParams,
    float_usd: float,
) -> FlowState:
    """Compose redemption and spread response for one day"""
    demand = redemption_demand(crypto_return, network.availability, params)
    realized = net_redemption(demand, network.friction, params.psi)
    units = realized * float_usd / PRICE_UNIT_USD
    return FlowState(
        crypto_return=float(crypto_return),
        demand=float(demand),
        net_redemption=float(realized),
        spread_change=float(spread_change(units, params.eta, params.lambda_price)),
        net_supply=float(excess_supply(realized, params.eta)),
    )
