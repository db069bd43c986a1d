"""
simulate: synthetic panel, event catalog, protocol weights, holdings and ground truth
"""
import argparse
import logging
from pathlib import Path
from typing import Dict, Union

import numpy as np

from app.cli.commands import SIMULATE_DIR, command_dir
from app.cli.output import OutputWriter
from app.core.config import RunConfig
from app.services.datagen.events import gen_events, trading_calendar, with_panel_gas
from app.services.datagen.holdings import gen_holdings
from app.services.datagen.market import gen_market
from app.services.datagen.protocols import gen_protocol_panel
from app.services.datagen.scenarios import SCENARIOS, Scenario, build_scenario
from app.services.datagen.truth import write_ground_truth
from app.services.ingest.events import read_date_list
from app.services.ingest.writers import write_events, write_holdings, write_panel, write_weights

logger = logging.getLogger(__name__)

STRUCTURAL = "structural"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="Generate a synthetic panel and event catalog")
    parser.add_argument(
        "--scenario",
        choices=[STRUCTURAL, *sorted(SCENARIOS)],
        default=None,
        help="Known-truth scenario instead of the configured structural simulation",
    )
    parser.add_argument("--n-events", type=int, default=None, help="Override simulation.n_events")
    parser.set_defaults(handler=run)


def structural_run(config: RunConfig) -> Scenario:
    """Simulate from the configured structural model"""
    sim = config.simulation
    seeds = np.random.SeedSequence(config.seed).generate_state(4)
    holidays = read_date_list(config.paths.holidays) if config.paths.holidays else None
    blackout = read_date_list(config.paths.blackout) if config.paths.blackout else None
    calendar = trading_calendar(sim.start, sim.end, holidays=holidays)

    events = gen_events(
        sim.n_events,
        int(seeds[0]),
        calendar,
        loss_log_mean=sim.loss_log_mean,
        loss_log_sd=sim.loss_log_sd,
        window=sim.event_window,
        blackout=blackout,
        min_gap_days=sim.min_gap_days,
        n_protocols=sim.n_protocols,
    )
    params = config.structural.params()
    market = gen_market(
        sim.market_config(),
        events,
        params,
        int(seeds[1]),
        noise=config.structural.noise(),
        calendar=calendar,
    )
    events = with_panel_gas(events, market)
    protocols = gen_protocol_panel(
        events, calendar, n_protocols=sim.n_protocols, rng_seed=int(seeds[2])
    )
    months = calendar.to_period("M").unique()
    holdings = gen_holdings(
        months[: sim.n_holdings_months],
        events.dates.to_period("M").unique(),
        rng_seed=int(seeds[3]),
    )
    truth = {**market.truth, **{f"params.{k}": v for k, v in params.to_dict().items()}}
    return Scenario(
        STRUCTURAL, market, events, truth, protocols=protocols, extras={"holdings": holdings}
    )


def run(args: argparse.Namespace, config: RunConfig) -> Path:
    """Write panel.csv, events.csv, ground_truth.txt and, when available, weights/holdings"""
    if args.n_events is not None:
        config = config.model_copy(
            update={"simulation": config.simulation.model_copy(update={"n_events": args.n_events})}
        )
    name = args.scenario or config.simulation.scenario or STRUCTURAL
    scenario = structural_run(config) if name == STRUCTURAL else build_scenario(name, config.seed)

    writer = OutputWriter(command_dir(config, SIMULATE_DIR), "simulate", config.seed)
    writer.register(write_panel(scenario.panel, writer.path("panel.csv")))
    writer.register(write_events(scenario.events, writer.path("events.csv")))
    if scenario.protocols is not None:
        writer.register(write_weights(scenario.protocols.weights, writer.path("weights.csv")))
    holdings = scenario.extras.get("holdings")
    if holdings is not None and len(holdings):
        writer.register(write_holdings(holdings, writer.path("holdings.csv")))

    truth: Dict[str, Union[float, str]] = dict(scenario.truth)
    truth["scenario"] = scenario.name
    truth["seed"] = float(config.seed)
    writer.register(write_ground_truth(writer.path("ground_truth.txt"), truth))
    logger.info(
        "Simulated %d days and %d events (%s)",
        len(scenario.panel.frame), len(scenario.events), scenario.name,
    )
    return writer.finalize()
