"""
calibrate: eta recovery, robust portfolio choice and run thresholds from parameter blocks
"""
import argparse
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from app.cli.commands import command_dir
from app.cli.output import OutputWriter
from app.cli.schemas import CalibrationSummary
from app.core.config import RunConfig
from app.core.dependencies import get_knowledge_base
from app.core.exceptions import SolverError
from app.services.ambiguity.robust_control import RobustPortfolioSolver
from app.services.econ.structural import eta_recovery
from app.services.globalgame.thresholds import (
    GameParams,
    ambiguous_threshold,
    avg_congestion,
    threshold_report,
)

logger = logging.getLogger(__name__)

AMBIGUITY_EXPONENTS = (1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("calibrate", help="Structural calibration report")
    parser.set_defaults(handler=run)


def _reference_deviation(table: pd.DataFrame, beta: float, se: float) -> Optional[float]:
    """Largest gap to the reference eta rows, when the inputs match the reference estimate"""
    kb = get_knowledge_base()
    reference = kb.multiplier()
    if not (np.isclose(beta, reference["beta_bps_per_100m"])
            and np.isclose(se, reference["se_bps_per_100m"])):
        return None
    gaps = []
    for row in kb.expected_eta_rows():
        match = table[np.isclose(table["lambda"], row["lambda"])]
        if len(match):
            gaps.append(abs(float(match["eta"].iloc[0]) - row["eta"]))
            gaps.append(abs(float(match["se_eta"].iloc[0]) - row["se_eta"]))
    return max(gaps) if gaps else None


def game_curve(
    params: GameParams, exponents: Sequence[float] = AMBIGUITY_EXPONENTS
) -> pd.DataFrame:
    """Ambiguity-adjusted run threshold across ambiguity exponents"""
    c_bar = avg_congestion(params)
    return pd.DataFrame(
        {
            "ambiguity_a": list(exponents),
            "theta_star_amb": [ambiguous_threshold(c_bar, a) for a in exponents],
            "theta_star": 1.0 - c_bar,
        }
    )


def run(args: argparse.Namespace, config: RunConfig) -> Path:
    """Write the eta table, the Psi sweep, the run-threshold curve and a JSON summary"""
    cal = config.calibration
    writer = OutputWriter(command_dir(config, "calibrate"), "calibrate", config.seed)

    eta_table = eta_recovery(cal.beta_bps, cal.se_bps, cal.lambda_grid)
    writer.write_frame("eta_recovery.csv", eta_table)

    solver = RobustPortfolioSolver(cal.preferences.build(), cal.asset.build())
    solution = solver.solve()
    writer.write_frame("psi_sweep.csv", solver.sweep(cal.psi_grid))
    try:
        corner: Optional[float] = solver.corner_threshold()
    except SolverError as e:
        logger.warning("No exit corner found: %s", e)
        corner = None

    game = cal.game.build()
    report = threshold_report(game, cal.gas_map.build())
    writer.write_frame("global_game.csv", game_curve(game))

    baseline = eta_table[np.isclose(eta_table["lambda"], 1.0)]
    summary = CalibrationSummary(
        beta_bps=cal.beta_bps,
        se_bps=cal.se_bps,
        eta_baseline=float(baseline["eta"].iloc[0]) if len(baseline) else None,
        eta_ci=(
            [float(baseline["ci_low"].iloc[0]), float(baseline["ci_high"].iloc[0])]
            if len(baseline) else []
        ),
        max_deviation_from_reference=_reference_deviation(eta_table, cal.beta_bps, cal.se_bps),
        xi_star=solution.xi_star,
        w_star=solution.w_star,
        eta_implied=solution.eta_implied,
        regime=solution.regime,
        corner_psi=corner,
        global_game=report,
    )
    writer.write_json("calibration.json", summary)
    return writer.finalize()
