"""
report: Markdown summary of the JSON results in the output directory
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, List

from app.cli.commands import command_dir
from app.cli.output import MANIFEST, OutputWriter
from app.core.config import RunConfig, config_schema

logger = logging.getLogger(__name__)

REPORT_DIR = "report"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("report", help="Summarize results or publish the config schema")
    parser.add_argument("--schema", action="store_true", help="Write the RunConfig JSON schema")
    parser.set_defaults(handler=run)


def _render(value: Any, depth: int = 0) -> List[str]:
    pad = "  " * depth
    if isinstance(value, dict):
        lines = []
        for key, item in value.items():
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}- **{key}**:")
                lines.extend(_render(item, depth + 1))
            else:
                lines.append(f"{pad}- **{key}**: {_scalar(item)}")
        return lines
    if isinstance(value, list):
        if value and all(isinstance(v, dict) and "term" in v for v in value):
            return _coefficients(value, pad)
        return [f"{pad}- {_scalar(v)}" for v in value]
    return [f"{pad}{_scalar(value)}"]


def _scalar(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return "n/a" if value is None else str(value)


def _coefficients(rows: List[dict], pad: str) -> List[str]:
    lines = [f"{pad}| term | coef | se | t | p |", f"{pad}|---|---|---|---|---|"]
    for row in rows:
        cells = [row["term"]] + [_scalar(row.get(k)) for k in ("coef", "se", "t", "p")]
        lines.append(f"{pad}| " + " | ".join(cells) + " |")
    return lines


def run(args: argparse.Namespace, config: RunConfig) -> Path:
    """Stitch every result JSON below the output directory into report.md"""
    writer = OutputWriter(command_dir(config, REPORT_DIR), "report", config.seed)
    if args.schema:
        writer.write_json("config_schema.json", config_schema())
        return writer.finalize()

    root = Path(config.paths.output_dir)
    sources = sorted(
        p for p in root.rglob("*.json")
        if p.name != MANIFEST and p.parent.name != REPORT_DIR
    )
    lines = ["# Results", ""]
    for path in sources:
        lines.append(f"## {path.relative_to(root).as_posix()}")
        lines.append("")
        lines.extend(_render(json.loads(path.read_text(encoding="utf-8"))))
        lines.append("")
    if not sources:
        lines.append("No result files found.")
    logger.info("Report covers %d result file(s)", len(sources))
    writer.write_text("report.md", "\n".join(lines) + "\n")
    return writer.finalize()
