"""
Runtime settings with validation and environment support
Author: Edgar McOchieng
"""

import os
from typing import Dict, Any
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class ConfigValidationError(Exception):
    """Raised when configuration validation fails"""
    pass


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == "true"


class Config:
    """
    Process-wide runtime settings read from the environment

    Experiment parameters (geometry, channel, trust, training, schedule) do
    not live here; they come from the experiment JSON file, see
    src.experiment. These settings only control how a run executes:
    logging, parallelism, progress display and default locations.
    """

    # Environment
    ENVIRONMENT = os.getenv("ENVIRONMENT", "development")

    #==========================================================================
    # Execution
    #==========================================================================
    MAX_WORKERS: int = int(os.getenv("MAX_WORKERS", "1"))
    SHOW_PROGRESS: bool = _env_bool("SHOW_PROGRESS", "true")

    #==========================================================================
    # Locations
    #==========================================================================
    DATA_DIR: str = os.getenv("DATA_DIR", "data/mnist")
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "runs")

    #==========================================================================
    # Logging Configuration
    #==========================================================================
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.getenv("LOG_FILE", "logs/simulator.log")
    LOG_TO_CONSOLE: bool = _env_bool("LOG_TO_CONSOLE", "true")
    LOG_FORMAT: str = os.getenv("LOG_FORMAT", "detailed")

    @classmethod
    def validate(cls) -> bool:
        """
        Validate runtime settings

        Returns:
            True if valid

        Raises:
            ConfigValidationError: If validation fails
        """
        errors = []

        if cls.MAX_WORKERS < 1 or cls.MAX_WORKERS > 64:
            errors.append("MAX_WORKERS must be between 1 and 64")

        if cls.LOG_LEVEL.upper() not in ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL is not a known level: {cls.LOG_LEVEL}")

        if cls.LOG_FORMAT not in ("simple", "detailed", "json"):
            errors.append("LOG_FORMAT must be one of: simple, detailed, json")

        if errors:
            raise ConfigValidationError("Configuration validation failed:\n  - " + "\n  - ".join(errors))

        return True

    @classmethod
    def to_dict(cls) -> Dict[str, Any]:
        """Convert runtime settings to a nested dictionary"""
        return {
            "environment": cls.ENVIRONMENT,
            "execution": {
                "max_workers": cls.MAX_WORKERS,
                "show_progress": cls.SHOW_PROGRESS,
            },
            "locations": {
                "data_dir": cls.DATA_DIR,
                "output_dir": cls.OUTPUT_DIR,
            },
            "logging": {
                "level": cls.LOG_LEVEL,
                "file": cls.LOG_FILE,
                "console": cls.LOG_TO_CONSOLE,
                "format": cls.LOG_FORMAT,
            },
        }

    @classmethod
    def print_config(cls):
        """Print runtime settings in formatted output"""
        config_dict = cls.to_dict()

        print("=" * 80)
        print("RUNTIME SETTINGS")
        print("=" * 80)
        print(f"\nEnvironment: {config_dict['environment'].upper()}\n")

        for section, values in config_dict.items():
            if section == "environment":
                continue

            print(f"\n{section.replace('_', ' ').title()}:")
            for key, value in values.items():
                print(f"  {key}: {value}")

        print("\n" + "=" * 80)


# Auto-validate on import (warning only)
try:
    Config.validate()
except ConfigValidationError as e:
    print(f"⚠️  Configuration Warning: {e}")
    print("Please check your .env file before running.")
