"""
Risk-Aware Wireless FL Simulator
================================

Deterministic simulator of federated learning over a cellular uplink with
Poisson-distributed base stations, 1/S-debiased aggregation, Beta-distributed
client trust and a dynamic SINR threshold schedule.

Author: Edgar McOchieng
License: MIT
Version: 1.0.0

Main Components:
- geometry: Network topology (PPP base stations, test cell, RB assignment)
- channel: Interference Laplace transform, success probability, SINR draws
- trust: Trust scores, categories and weight manipulation
- learning: Models, local momentum SGD and evaluation
- orchestrator: Rounds, aggregation, trust window and the three cases
- run_log / validation: Persistence and audits

Quick Start:
    >>> from src import ExperimentConfig, ExperimentCase, run_experiment
    >>> records = run_experiment(ExperimentConfig(rounds=10), ExperimentCase.RISK_AWARE)
    >>> records[-1].accuracy

For detailed documentation, see: docs/USAGE.md
"""

__version__ = "1.0.0"
__author__ = "Edgar McOchieng"
__license__ = "MIT"
__all__ = [
    "ExperimentConfig",
    "parse_config",
    "ExperimentCase",
    "prepare_experiment",
    "run_experiment",
    "write_run_log",
    "read_run_log",
    "validate_channel",
    "summarize_cases",
]

from .experiment import ExperimentConfig, parse_config
from .orchestrator import ExperimentCase, prepare_experiment, run_experiment
from .run_log import read_run_log, write_run_log
from .validation import summarize_cases, validate_channel
