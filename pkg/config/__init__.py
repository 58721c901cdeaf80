"""
Configuration module for the risk-aware wireless FL simulator
"""

from .settings import Config, ConfigValidationError
from .logger import setup_logger, get_logger, log_exception, run_context

__all__ = ["Config", "ConfigValidationError", "setup_logger", "get_logger", "log_exception", "run_context"]
