"""
Shared input loading for the commands
"""
import logging
from pathlib import Path
from typing import Optional

from app.core.config import RunConfig
from app.core.exceptions import ConfigError
from app.core.panels import EventCatalog, MarketPanel
from app.services.ingest.events import parse_events
from app.services.ingest.writers import read_panel

logger = logging.getLogger(__name__)

SIMULATE_DIR = "simulate"


def command_dir(config: RunConfig, name: str) -> Path:
    """Output directory of one command"""
    return Path(config.paths.output_dir) / name


def input_path(config: RunConfig, configured: Optional[Path], default_name: str) -> Path:
    """Configured input file, or the file ``simulate`` wrote into the output directory"""
    path = Path(configured) if configured is not None else (
        command_dir(config, SIMULATE_DIR) / default_name
    )
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    return path


def load_panel(config: RunConfig) -> MarketPanel:
    path = input_path(config, config.paths.panel, "panel.csv")
    logger.info("Reading panel from %s", path)
    return read_panel(path)


def load_events(
    config: RunConfig, panel: MarketPanel, use_disclosure: bool = True
) -> EventCatalog:
    path = input_path(config, config.paths.events, "events.csv")
    logger.info("Reading events from %s", path)
    return parse_events(path, calendar=panel.dates, use_disclosure=use_disclosure)
