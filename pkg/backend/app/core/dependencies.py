"""
Shared service instances for the command-line front end
"""
from typing import Optional

from app.core.config import Settings
from app.services.calibration import CalibrationKnowledgeBase

# Singleton instances
_settings: Optional[Settings] = None
_knowledge_base: Optional[CalibrationKnowledgeBase] = None


def get_settings() -> Settings:
    """Get or create Settings singleton"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def get_knowledge_base() -> CalibrationKnowledgeBase:
    """Get or create CalibrationKnowledgeBase singleton"""
    global _knowledge_base
    if _knowledge_base is None:
        _knowledge_base = CalibrationKnowledgeBase()
    return _knowledge_base


def reset_singletons() -> None:
    """Reset all singleton instances (useful when the environment changes)"""
    global _settings, _knowledge_base
    _settings = None
    _knowledge_base = None
