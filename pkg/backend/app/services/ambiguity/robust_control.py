"""
Robust portfolio choice with an ambiguous exploit (jump) intensity

Nature distorts the reference hack intensity by a factor xi, penalized by relative
entropy with tolerance psi_amb. With CRRA value J(W) = A W^(1-g) / (1-g) the worst-case
distortion has a closed form in the exposure wL, so the investor's first-order condition
reduces to a scalar root-finding problem in w. Wealth is normalized to 1 throughout.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from app.core.exceptions import DomainError, SolverError

logger = logging.getLogger(__name__)

# Above this exp() overflows a double
_MAX_LOG_XI = 700.0


@dataclass(frozen=True)
class Preferences:
    """Investor preferences"""

    gamma_r: float = 2.0
    delta_d: float = 0.03
    psi_amb: float = 1.5
    a_scale: float = 1.0

    def __post_init__(self) -> None:
        if min(self.gamma_r, self.delta_d, self.psi_amb, self.a_scale) <= 0:
            raise DomainError("preferences must be strictly positive")
        if self.gamma_r == 1.0:
            raise DomainError("gamma_r = 1 (log utility) is not supported")


@dataclass(frozen=True)
class JumpAsset:
    """Risky DeFi position with diffusive risk and exploit jumps"""

    mu: float = 0.04
    sigma: float = 0.2
    lambda_jump: float = 0.5
    loss_l: float = 0.5

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise DomainError("sigma must be positive")
        if self.lambda_jump < 0:
            raise DomainError("lambda_jump must be non-negative")
        if not 0.0 < self.loss_l <= 1.0:
            raise DomainError("loss_l must lie in (0, 1]")


@dataclass(frozen=True)
class RobustSolution:
    """Joint solution of the portfolio FOC and the worst-case distortion"""

    xi_star: float
    w_star: float
    eta_implied: float
    foc_residual: float
    regime: str  # interior | corner | saturated
    ln_xi: float

    @property
    def is_interior(self) -> bool:
        return self.regime == "interior"


def _value(wealth: float, prefs: Preferences) -> float:
    return prefs.a_scale * wealth ** (1.0 - prefs.gamma_r) / (1.0 - prefs.gamma_r)


def _marginal_value(wealth: float, prefs: Preferences) -> float:
    return prefs.a_scale * wealth ** (-prefs.gamma_r)


def concavity_gap(wealth: float, exposure: float, prefs: Preferences) -> float:
    """Jensen gap J(W) - J(W(1-wL)) - wL J_W(W) W of the CRRA value function"""
    if wealth <= 0:
        raise DomainError("wealth must be positive")
    if not 0.0 <= exposure < 1.0:
        raise DomainError("exposure wL must lie in [0, 1)")
    after = wealth * (1.0 - exposure)
    return (
        _value(wealth, prefs)
        - _value(after, prefs)
        - exposure * _marginal_value(wealth, prefs) * wealth
    )


def _log_distortion(exposure: float, prefs: Preferences) -> float:
    if not 0.0 <= exposure < 1.0:
        raise DomainError("exposure wL must lie in [0, 1)")
    drop = _value(1.0, prefs) - _value(1.0 - exposure, prefs)
    return (drop + exposure * _marginal_value(1.0, prefs)) / prefs.psi_amb


def log_distortion_from_gap(w: float, prefs: Preferences, asset: JumpAsset) -> float:
    """Alternative form of ln xi* built from the concavity gap"""
    exposure = w * asset.loss_l
    gap = concavity_gap(1.0, exposure, prefs)
    return (gap + 2.0 * exposure * _marginal_value(1.0, prefs)) / prefs.psi_amb


def worst_case_distortion(w: float, prefs: Preferences, asset: JumpAsset) -> float:
    """Nature's optimal intensity multiplier xi* for weight w"""
    ln_xi = _log_distortion(w * asset.loss_l, prefs)
    return float(np.exp(min(ln_xi, _MAX_LOG_XI)))


def eta_from_distortion(xi_star: float) -> float:
    """Safe-asset amplification factor under the jump-dominance approximation"""
    if xi_star <= 0:
        raise DomainError("xi_star must be positive")
    return float(xi_star)


class RobustPortfolioSolver:
    """Solves the robust first-order condition for the optimal risky weight"""

    def __init__(
        self,
        prefs: Preferences,
        asset: JumpAsset,
        epsilon: float = 1e-6,
        min_weight: float = 1e-6,
        tolerance: float = 1e-10,
    ):
        self.prefs = prefs
        self.asset = asset
        self.epsilon = epsilon
        self.min_weight = min_weight
        self.tolerance = tolerance

    @property
    def upper_bound(self) -> float:
        """Largest admissible weight: no short or levered positions, no total wipeout"""
        return min(1.0, (1.0 - self.epsilon) / self.asset.loss_l)

    def foc(self, w: float) -> float:
        """Marginal robust excess return at weight w"""
        p, a = self.prefs, self.asset
        exposure = w * a.loss_l
        xi = worst_case_distortion(w, p, a)
        jump = a.lambda_jump * xi * a.loss_l * ((1.0 - exposure) ** (-p.gamma_r) - 1.0)
        return a.mu - p.gamma_r * w * a.sigma**2 - jump

    def _solution(self, w: float, regime: str) -> RobustSolution:
        ln_xi = min(_log_distortion(w * self.asset.loss_l, self.prefs), _MAX_LOG_XI)
        xi = float(np.exp(ln_xi))
        residual = abs(self.foc(w)) if regime == "interior" else 0.0
        return RobustSolution(
            xi_star=xi,
            w_star=w,
            eta_implied=eta_from_distortion(xi),
            foc_residual=residual,
            regime=regime,
            ln_xi=ln_xi,
        )

    def solve(self) -> RobustSolution:
        """Get the optimal weight and the worst-case distortion at that weight"""
        cap = self.upper_bound
        at_zero = self.foc(0.0)
        if at_zero <= 0.0:
            return self._solution(0.0, "corner")

        at_cap = self.foc(cap)
        if not np.isfinite(at_cap):
            raise SolverError(
                "first-order condition is not finite at the upper bracket",
                {"w": cap, "foc": at_cap},
            )
        if at_cap > 0.0:
            logger.warning("FOC still positive at the weight cap %.6f; position saturated", cap)
            return self._solution(cap, "saturated")

        try:
            w, info = brentq(
                self.foc, 0.0, cap, xtol=1e-15, rtol=8.9e-16, maxiter=500, full_output=True
            )
        except (RuntimeError, ValueError) as e:
            raise SolverError(
                "root search failed", {"foc_at_0": at_zero, "foc_at_cap": at_cap, "error": e}
            ) from e
        if not info.converged:
            raise SolverError("root search did not converge", {"iterations": info.iterations})

        if w < self.min_weight:
            return self._solution(0.0, "corner")
        solution = self._solution(float(w), "interior")
        if solution.foc_residual > self.tolerance:
            logger.warning(
                "FOC residual %.3e exceeds tolerance %.1e", solution.foc_residual, self.tolerance
            )
        return solution

    def sweep(self, psi_grid: Iterable[float]) -> pd.DataFrame:
        """Solve across ambiguity tolerances"""
        rows = []
        for psi in psi_grid:
            solver = self._with_psi(float(psi))
            sol = solver.solve()
            rows.append(
                {
                    "psi": float(psi),
                    "xi_star": sol.xi_star,
                    "w_star": sol.w_star,
                    "eta": sol.eta_implied,
                    "regime": sol.regime,
                }
            )
        return pd.DataFrame(rows)

    def corner_threshold(self, psi_start: Optional[float] = None, max_steps: int = 40) -> float:
        """Largest tolerance at which the investor exits the risky position

        Scans psi downward by factors of 10 until the corner appears, then bisects
        in log space between the last interior and first corner tolerance.
        """
        hi = psi_start if psi_start is not None else self.prefs.psi_amb
        if self._with_psi(hi).solve().regime == "corner":
            return hi
        lo = hi
        for _ in range(max_steps):
            lo = lo / 10.0
            if self._with_psi(lo).solve().regime == "corner":
                break
            hi = lo
        else:
            raise SolverError("no corner regime found", {"smallest_psi": lo})

        for _ in range(60):
            mid = float(np.sqrt(lo * hi))
            if self._with_psi(mid).solve().regime == "corner":
                lo = mid
            else:
                hi = mid
        return lo

    def _with_psi(self, psi: float) -> "RobustPortfolioSolver":
        prefs = Preferences(
            gamma_r=self.prefs.gamma_r,
            delta_d=self.prefs.delta_d,
            psi_amb=psi,
            a_scale=self.prefs.a_scale,
        )
        return RobustPortfolioSolver(
            prefs, self.asset, self.epsilon, self.min_weight, self.tolerance
        )


def optimal_weight(prefs: Preferences, asset: JumpAsset, **kwargs: float) -> RobustSolution:
    """Solve the robust portfolio problem with default solver settings"""
    return RobustPortfolioSolver(prefs, asset, **kwargs).solve()
