"""
estimate: run one estimator on the configured panel and event catalog
"""
import argparse
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd

from app.cli.commands import command_dir, input_path, load_events, load_panel
from app.cli.output import OutputWriter
from app.cli.schemas import RegressionSummary, ThresholdSummary, TslsSummary
from app.core.config import RunConfig
from app.core.exceptions import NoElbowError, ToolkitError
from app.services.datagen.panels import (
    aggregate_monthly,
    build_did_panel,
    build_stacked_panel,
    monthly_windows,
)
from app.services.datagen.protocols import protocol_shocks
from app.services.econ.did import did_by_control_group, did_event_study, did_table
from app.services.econ.event_study import (
    dynamic_table,
    event_study,
    event_study_variants,
    se_comparison,
)
from app.services.econ.gbr import event_features, fit_gbr, gbr_threshold
from app.services.econ.giv import (
    build_giv,
    demean_comparison,
    eta_bootstrap,
    eta_subsample,
    instrument_lag_structure,
    macro_orthogonality,
    tsls,
)
from app.services.econ.local_projections import irf_table, local_projections, shock_series
from app.services.econ.mechanism import holdings_regression, state_dependence_monthly, welch_table
from app.services.econ.structural import eta_recovery, friction_regression, structural_break
from app.services.econ.threshold import threshold_regression
from app.services.ingest.writers import read_holdings, read_weights

logger = logging.getLogger(__name__)

ESTIMATORS = ("event-study", "threshold", "giv", "lp", "did", "monthly", "gbr")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("estimate", help="Run one estimator")
    parser.add_argument("which", choices=ESTIMATORS)
    parser.add_argument(
        "--bootstrap", type=int, default=None,
        help="Bootstrap replications (threshold test, eta distribution)",
    )
    parser.set_defaults(handler=run)


def _stack_results(results: Dict[str, pd.DataFrame], key: str) -> pd.DataFrame:
    frames = [frame.assign(**{key: name}) for name, frame in results.items()]
    return pd.concat(frames, ignore_index=True)[[key, *frames[0].columns]]


def _event_study(config: RunConfig, writer: OutputWriter) -> None:
    cfg = config.event_study
    panel = load_panel(config)
    events = load_events(config, panel)
    stacked = build_stacked_panel(panel, events, cfg.window, cfg.controls, cfg.outcome)
    result = event_study(
        stacked, cfg.controls, difference_outcome=cfg.difference_outcome, cluster=cfg.cluster
    )
    writer.write_frame("event_study.csv", dynamic_table(result, cfg.window))
    writer.write_json("event_study.json", RegressionSummary.from_result("event_study", result))
    writer.write_frame("se_comparison.csv", se_comparison(stacked, cfg.difference_outcome))

    notes: List[str] = list(stacked.warnings)
    try:
        variants = event_study_variants(
            panel, events, cfg.window, cfg.controls, cfg.difference_outcome
        )
        tables = {name: fit.to_frame() for name, fit in variants.items()}
        writer.write_frame("event_study_variants.csv", _stack_results(tables, "variant"))
    except ToolkitError as e:
        logger.warning("Robustness variants skipped: %s", e)
        notes.append(f"robustness variants skipped: {e}")
    try:
        writer.write_frame("friction.csv", friction_regression(events).to_frame())
    except ToolkitError as e:
        logger.warning("Friction regression skipped: %s", e)
        notes.append(f"friction regression skipped: {e}")
    try:
        breaks = structural_break(panel, events)
        tables = {name: fit.to_frame() for name, fit in breaks.items()}
        writer.write_frame("structural_break.csv", _stack_results(tables, "sample"))
    except ToolkitError as e:
        logger.warning("Level-shift regression skipped: %s", e)
        notes.append(f"level-shift regression skipped: {e}")
    if "disclosure_date" in events.frame.columns:
        # t=0 is the disclosure day above; rerun on the occurrence day
        occurred = load_events(config, panel, use_disclosure=False)
        stacked = build_stacked_panel(panel, occurred, cfg.window, cfg.controls, cfg.outcome)
        fit = event_study(stacked, cfg.controls, difference_outcome=cfg.difference_outcome)
        writer.write_frame("event_study_occurrence.csv", dynamic_table(fit, cfg.window))
    writer.write_json("notes.json", {"warnings": notes})


def _threshold(config: RunConfig, writer: OutputWriter, n_bootstrap: int) -> None:
    cfg = config.threshold
    panel = load_panel(config)
    events = load_events(config, panel)
    stacked = build_stacked_panel(panel, events, cfg.window, cfg.controls, cfg.outcome)
    result = threshold_regression(
        stacked,
        threshold_var=cfg.threshold_var,
        controls=cfg.controls,
        grid=cfg.grid,
        trim=cfg.trim,
        n_bootstrap=n_bootstrap,
        lr_critical=cfg.lr_critical,
        rng_seed=config.seed,
        threads=config.threads,
    )
    writer.write_json("threshold.json", ThresholdSummary.from_result(result))
    writer.write_frame("threshold_grid.csv", result.grid_frame())
    writer.write_frame("threshold_coefficients.csv", result.regression.to_frame())


def _giv(config: RunConfig, writer: OutputWriter, n_bootstrap: int) -> None:
    cfg = config.giv
    panel = load_panel(config)
    events = load_events(config, panel)
    weights = read_weights(input_path(config, config.paths.weights, "weights.csv"))
    shocks = protocol_shocks(events, panel.dates)
    giv = build_giv(shocks, weights)
    result = tsls(
        panel,
        giv,
        events,
        flow=cfg.flow,
        outcome=config.event_study.outcome,
        instrument_lag=cfg.instrument_lag,
        nw_lag=cfg.nw_lag,
        post_window=cfg.post_window,
        macro=cfg.macro,
        first_stage_controls=cfg.first_stage_controls,
        stage2_controls=cfg.stage2_controls,
        weak_f=cfg.weak_f,
    )
    writer.write_json("giv.json", TslsSummary.from_result(result))
    writer.write_frame("giv_first_stage.csv", result.first_stage.to_frame())
    writer.write_frame("giv_second_stage.csv", result.second_stage.to_frame())
    writer.write_frame(
        "eta_recovery.csv",
        eta_recovery(result.multiplier, result.multiplier_se, config.calibration.lambda_grid),
    )
    writer.write_frame(
        "giv_lag_structure.csv",
        instrument_lag_structure(panel, giv, cfg.flow, nw_lag=cfg.nw_lag),
    )
    orthogonality = macro_orthogonality(giv, panel)
    writer.write_json("giv_macro_orthogonality.json",
                      RegressionSummary.from_result("macro_orthogonality", orthogonality))
    comparison = demean_comparison(shocks, weights)
    writer.write_frame(
        "giv_demean_comparison.csv",
        comparison["describe"].rename_axis("instrument").reset_index().assign(
            correlation=comparison["correlation"]
        ),
    )
    if n_bootstrap > 0:
        writer.write_frame(
            "eta_bootstrap.csv",
            eta_bootstrap(result, n_boot=n_bootstrap, rng_seed=config.seed,
                          threads=config.threads),
        )
    try:
        writer.write_frame("eta_subsample.csv", eta_subsample(result, cfg.split_date))
    except ToolkitError as e:
        logger.warning("Subsample split skipped: %s", e)


def _local_projections(config: RunConfig, writer: OutputWriter) -> None:
    cfg = config.local_projections
    panel = load_panel(config)
    events = load_events(config, panel)
    shock = shock_series(events, panel.dates, cfg.shock)
    results = local_projections(
        panel, shock, cfg.horizons, cfg.controls, cfg.n_lags, config.event_study.outcome
    )
    writer.write_frame("lp_irf.csv", irf_table(results))
    writer.write_json(
        "lp.json",
        {f"h{h}": RegressionSummary.from_result(f"h{h}", r).model_dump(mode="json")
         for h, r in results.items()},
    )


def _did(config: RunConfig, writer: OutputWriter) -> None:
    cfg = config.did
    panel = load_panel(config)
    events = load_events(config, panel)
    did = build_did_panel(panel, events, cfg.treat_asset, cfg.window, cfg.control_assets)
    result = did_event_study(did)
    writer.write_frame("did.csv", did_table(result, cfg.window))
    writer.write_json("did.json", RegressionSummary.from_result("did", result))
    groups = did_by_control_group(panel, events, cfg.treat_asset, cfg.window, cfg.control_assets)
    tables = {name: did_table(fit, cfg.window) for name, fit in groups.items()}
    writer.write_frame("did_by_control.csv", _stack_results(tables, "control_group"))


def _monthly(config: RunConfig, writer: OutputWriter) -> None:
    cfg = config.monthly
    panel = load_panel(config)
    events = load_events(config, panel)
    holdings = read_holdings(input_path(config, config.paths.holdings, "holdings.csv"))
    stacked = monthly_windows(
        panel, events, config.event_study.window, cfg.controls, config.event_study.outcome
    )
    prime_share = holdings.set_index("month")["prime_cp_share"]
    monthly = aggregate_monthly(stacked, panel, prime_share, events.dates, cfg.controls)
    result = state_dependence_monthly(monthly, cfg.spec, cfg.controls, cfg.nw_lag)
    writer.write_frame("monthly_panel.csv", monthly.frame.astype({"month": str}))
    writer.write_json("monthly.json", RegressionSummary.from_result(f"monthly_{cfg.spec}", result))
    writer.write_frame("holdings_regression.csv", holdings_regression(holdings).to_frame())
    writer.write_frame("holdings_welch.csv", welch_table(holdings))


def _gbr(config: RunConfig, writer: OutputWriter) -> None:
    cfg = config.gbr
    panel = load_panel(config)
    events = load_events(config, panel)
    features, target = event_features(panel, events, cfg.horizon, config.event_study.outcome)
    model = fit_gbr(
        features,
        target,
        n_trees=cfg.n_trees,
        max_depth=cfg.max_depth,
        learning_rate=cfg.learning_rate,
        winsor_pct=cfg.winsor_pct,
        rng_seed=config.seed,
    )
    warnings = list(model.warnings)
    try:
        elbow: Optional[float] = gbr_threshold(model, "gas", cfg.grid_points, cfg.smooth_window)
    except NoElbowError as e:
        logger.warning("No gas elbow: %s", e)
        warnings.append(str(e))
        elbow = None
    writer.write_frame("gbr_importance.csv", model.importance_table())
    writer.write_frame("gbr_partial_gas.csv", model.partial_response("gas", cfg.grid_points))
    writer.write_json(
        "gbr.json",
        {
            "elbow_gwei": elbow,
            "importances": model.importances,
            "n_events": len(features),
            "n_trees": model.n_trees,
            "warnings": warnings,
        },
    )


def run(args: argparse.Namespace, config: RunConfig) -> Path:
    """Dispatch to the chosen estimator and write its tables"""
    which = args.which
    writer = OutputWriter(
        command_dir(config, f"estimate_{which.replace('-', '_')}"), f"estimate {which}", config.seed
    )
    dispatch: Dict[str, Callable[[], None]] = {
        "event-study": lambda: _event_study(config, writer),
        "threshold": lambda: _threshold(
            config, writer,
            args.bootstrap if args.bootstrap is not None else config.threshold.n_bootstrap,
        ),
        "giv": lambda: _giv(
            config, writer,
            args.bootstrap if args.bootstrap is not None else config.giv.n_eta_bootstrap,
        ),
        "lp": lambda: _local_projections(config, writer),
        "did": lambda: _did(config, writer),
        "monthly": lambda: _monthly(config, writer),
        "gbr": lambda: _gbr(config, writer),
    }
    logger.info("Estimating %s", which)
    dispatch[which]()
    return writer.finalize()
