"""
Reference calibration data: sample moments and headline anchors
"""
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from app.core.exceptions import ConfigError


class CalibrationKnowledgeBase:
    """Loads and provides access to calibration reference data"""

    def __init__(self, knowledge_path: Optional[Path] = None):
        self.knowledge_path = knowledge_path or Path(__file__).parent
        self._moments: Optional[Dict] = None
        self._anchors: Optional[Dict] = None

    def _load(self, name: str) -> Dict:
        path = self.knowledge_path / name
        try:
            with open(path, encoding="utf-8") as f:
                return yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ConfigError(f"calibration file not found: {path}") from None

    @property
    def moments(self) -> Dict:
        """Get sample moments of events and daily market series"""
        if self._moments is None:
            self._moments = self._load("market_moments.yaml")
        return self._moments

    @property
    def anchors(self) -> Dict:
        """Get headline estimates"""
        if self._anchors is None:
            self._anchors = self._load("anchors.yaml")
        return self._anchors

    def get_moment(self, group: str, variable: str) -> Optional[Dict[str, float]]:
        """Get the moments of one variable, e.g. ("daily", "vix")"""
        return self.moments.get(group, {}).get(variable)

    def lambda_grid(self) -> List[float]:
        """Get the price-impact grid of the eta sensitivity table"""
        return [float(v) for v in self.anchors["eta_sensitivity"]["lambda_grid"]]

    def expected_eta_rows(self) -> List[Dict[str, float]]:
        """Get the reference eta sensitivity rows"""
        return list(self.anchors["eta_sensitivity"]["expected"])

    def multiplier(self) -> Dict[str, Any]:
        """Get the reference multiplier estimate and its standard error"""
        return dict(self.anchors["multiplier"])

    def gas_anchor(self, kind: str = "threshold_gwei") -> float:
        """Get a gas anchor in Gwei"""
        return float(self.anchors["gas"][kind])
