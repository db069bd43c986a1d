"""
Output directory handling: tables, JSON results and the content-hash manifest
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd
from pydantic import BaseModel

from app.cli.schemas import Manifest, ManifestEntry
from app.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class OutputWriter:
    """Writes a command's files into one directory and lists them in a manifest"""

    def __init__(self, directory: Union[str, Path], command: str, seed: int):
        self.directory = Path(directory)
        self.command = command
        self.seed = seed
        self._files: List[Path] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            marker = self.directory / ".write_check"
            marker.write_text("", encoding="utf-8")
            marker.unlink()
        except OSError as e:
            raise ConfigError(f"output directory {self.directory} is not writable: {e}") from e

    def path(self, name: str) -> Path:
        return self.directory / name

    def register(self, path: Path) -> Path:
        """Add a file written elsewhere to the manifest"""
        if path not in self._files:
            self._files.append(path)
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a table as CSV"""
        path = self.path(name)
        frame.to_csv(path, index=False, lineterminator="\n")
        logger.info("Wrote %s (%d rows)", path, len(frame))
        return self.register(path)

    def write_json(self, name: str, payload: Union[BaseModel, Dict[str, Any]]) -> Path:
        """Write a result object as indented JSON"""
        path = self.path(name)
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2)
        else:
            text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False, default=str)
        path.write_text(text + "\n", encoding="utf-8")
        logger.info("Wrote %s", path)
        return self.register(path)

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.write_text(text, encoding="utf-8")
        return self.register(path)

    def finalize(self) -> Path:
        """Write manifest.json: relative path, byte size and SHA-256 of every output"""
        entries = [
            ManifestEntry(
                path=p.relative_to(self.directory).as_posix(),
                size=p.stat().st_size,
                sha256=sha256_of(p),
            )
            for p in sorted(self._files)
        ]
        manifest = Manifest(command=self.command, seed=self.seed, files=entries)
        path = self.path(MANIFEST)
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info("Manifest lists %d file(s)", len(entries))
        return path
