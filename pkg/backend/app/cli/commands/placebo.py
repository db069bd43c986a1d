"""
placebo: covariate-matched pseudo-event inference for the event study
"""
import argparse
import logging
from pathlib import Path

from app.cli.commands import command_dir, load_events, load_panel
from app.cli.output import OutputWriter
from app.cli.schemas import PlaceboSummary
from app.core.config import RunConfig
from app.services.datagen.panels import build_stacked_panel
from app.services.econ.event_study import event_study
from app.services.econ.placebo import placebo

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("placebo", help="Placebo p-values for the event study")
    parser.add_argument("--draws", type=int, default=None, help="Override placebo.n_draws")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: RunConfig) -> Path:
    """Write the per-day p-value table and the raw placebo draws"""
    es, cfg = config.event_study, config.placebo
    panel = load_panel(config)
    events = load_events(config, panel)
    stacked = build_stacked_panel(panel, events, es.window, es.controls, es.outcome)
    real = event_study(
        stacked, es.controls, difference_outcome=es.difference_outcome, cluster=es.cluster
    )
    result = placebo(
        real,
        panel,
        events,
        window=es.window,
        controls=es.controls,
        vix_tol=cfg.vix_tol,
        spread_tol=cfg.spread_tol,
        exclusion_days=cfg.exclusion_days,
        n_draws=args.draws if args.draws is not None else cfg.n_draws,
        n_dates=cfg.n_dates,
        rng_seed=config.seed,
        threads=config.threads,
        difference_outcome=es.difference_outcome,
        outcome=es.outcome,
    )
    writer = OutputWriter(command_dir(config, "placebo"), "placebo", config.seed)
    writer.write_frame("placebo.csv", result.table())
    writer.write_frame("placebo_draws.csv", result.draws_frame())
    writer.write_json("placebo.json", PlaceboSummary.from_result(result))
    return writer.finalize()
