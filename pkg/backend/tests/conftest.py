"""
Pytest configuration and fixtures for the liquidity-recycling tests
"""
import os
from pathlib import Path
from typing import Generator

import numpy as np
import pandas as pd
import pytest

# Keep developer .env overrides out of the tests
for _name in list(os.environ):
    if _name.startswith("LR_"):
        del os.environ[_name]

from app.core.config import RunConfig
from app.core.dependencies import reset_singletons
from app.core.panels import EventCatalog, MarketPanel
from app.services.datagen.events import gen_events, trading_calendar, with_panel_gas
from app.services.datagen.market import MarketConfig, gen_market
from app.services.structmodel.params import NoiseConfig, StructuralParams


@pytest.fixture(autouse=True)
def fresh_singletons() -> Generator[None, None, None]:
    """Drop cached settings between tests"""
    reset_singletons()
    yield
    reset_singletons()


@pytest.fixture
def structural_params() -> StructuralParams:
    """Default calibration"""
    return StructuralParams()


@pytest.fixture
def calendar() -> pd.DatetimeIndex:
    """Three years of weekdays"""
    return trading_calendar("2021-01-04", periods=780)


@pytest.fixture
def toy_events(calendar) -> EventCatalog:
    """Twenty well-separated events"""
    return gen_events(20, 7, calendar, window=(-5, 5), min_gap_days=15)


@pytest.fixture
def toy_market(calendar, toy_events) -> MarketPanel:
    """Structural panel around the toy events"""
    return gen_market(MarketConfig(), toy_events, StructuralParams(), 11, calendar=calendar)


@pytest.fixture
def toy_catalog(toy_events, toy_market) -> EventCatalog:
    """Toy events carrying gas at the event day"""
    return with_panel_gas(toy_events, toy_market)


@pytest.fixture
def flat_panel() -> MarketPanel:
    """Deterministic 60-day panel: constant spread with a -2 bps step on day 30"""
    dates = trading_calendar("2022-01-03", periods=60)
    spread = np.full(60, 10.0)
    spread[30:] -= 2.0
    frame = pd.DataFrame(
        {
            "cp_spread_bps": spread,
            "vix": 20.0 + np.sin(np.arange(60)),
            "dxy": 100.0 + np.cos(np.arange(60)),
            "btc_return": 0.01 * np.sin(0.5 * np.arange(60)),
            "gas_gwei": 30.0,
            "net_redemption_usd": 0.0,
        },
        index=dates,
    )
    return MarketPanel(frame)


def make_catalog(dates, loss=5e7, gas=30.0) -> EventCatalog:
    """Catalog with one row per date"""
    dates = pd.DatetimeIndex(dates)
    n = len(dates)
    return EventCatalog(
        pd.DataFrame(
            {
                "date": dates,
                "protocol": [f"protocol_{i:02d}" for i in range(n)],
                "chain": "ethereum",
                "loss_usd": np.broadcast_to(loss, n).astype(float),
                "tvl_usd": np.broadcast_to(loss, n).astype(float) * 4.0,
                "gas_gwei": np.broadcast_to(gas, n).astype(float),
            }
        )
    )


@pytest.fixture
def catalog_factory():
    """Build event catalogs from a list of dates"""
    return make_catalog


@pytest.fixture
def noise_free() -> NoiseConfig:
    """Observation layer without noise or reversion"""
    return NoiseConfig(noise_sd_bps=0.0, reversion=0.0)


@pytest.fixture
def run_config(tmp_path) -> RunConfig:
    """Small, fast configuration writing into a temporary directory"""
    return RunConfig.model_validate(
        {
            "seed": 5,
            "paths": {"output_dir": str(tmp_path / "out")},
            "simulation": {
                "start": "2021-01-04",
                "end": "2023-06-30",
                "n_events": 30,
                "min_gap_days": 12,
                "event_window": [-5, 5],
            },
            "threshold": {"n_bootstrap": 20},
            "giv": {"n_eta_bootstrap": 20},
            "placebo": {"n_draws": 10, "n_dates": 20},
        }
    )


@pytest.fixture
def config_file(tmp_path) -> Path:
    """YAML file with the run_config settings"""
    path = tmp_path / "run.yaml"
    path.write_text(
        "seed: 5\n"
        f"paths:\n  output_dir: {(tmp_path / 'out').as_posix()}\n"
        "simulation:\n"
        "  start: '2021-01-04'\n"
        "  end: '2023-06-30'\n"
        "  n_events: 30\n"
        "  min_gap_days: 12\n"
        "  event_window: [-5, 5]\n"
        "threshold:\n  n_bootstrap: 20\n"
        "giv:\n  n_eta_bootstrap: 20\n"
        "placebo:\n  n_draws: 10\n  n_dates: 20\n",
        encoding="utf-8",
    )
    return path


STEP_POSITIONS = (10, 25, 40)


@pytest.fixture
def stepped_panel(flat_panel) -> MarketPanel:
    """Spread drops by exactly 2 bps on each of three event days and stays there"""
    frame = flat_panel.frame.copy()
    steps = np.zeros(len(frame))
    for pos in STEP_POSITIONS:
        steps[pos:] -= 2.0
    frame["cp_spread_bps"] = 10.0 + steps
    return MarketPanel(frame)


@pytest.fixture
def stepped_events(stepped_panel) -> EventCatalog:
    """Events on the step days with small, medium and large losses"""
    dates = stepped_panel.dates[list(STEP_POSITIONS)]
    return make_catalog(dates, loss=np.array([1e6, 5e7, 4e8]))
