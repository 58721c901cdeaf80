"""
Exception hierarchy for the simulator

Every failure the library raises derives from SimulationError so the CLI
can report it uniformly. Configuration problems raise ConfigValidationError,
shared with the runtime settings layer.
"""

from config.settings import ConfigValidationError

__all__ = [
    "SimulationError",
    "ConfigValidationError",
    "TopologyError",
    "ChannelDomainError",
    "QuadratureError",
    "UnreachableClientError",
    "TrustConfigError",
    "DatasetError",
    "DivergenceError",
    "AggregationError",
    "RunLogError",
]


class SimulationError(Exception):
    """Base class for all simulator errors"""
    pass


class TopologyError(SimulationError):
    """Raised when a network topology cannot be generated"""
    pass


class ChannelDomainError(SimulationError, ValueError):
    """Raised for channel inputs outside their domain (r <= 0, negative thresholds)"""
    pass


class QuadratureError(SimulationError):
    """Raised when the interference integral does not meet its tolerance"""
    pass


class UnreachableClientError(SimulationError, OverflowError):
    """Raised when a success probability falls below the debias floor"""
    pass


class TrustConfigError(SimulationError, ValueError):
    """Raised for invalid trust-model parameters"""
    pass


class DatasetError(SimulationError):
    """Raised for malformed dataset files or infeasible partitions"""
    pass


class DivergenceError(SimulationError):
    """Raised when local training produces non-finite loss or weights"""
    pass


class AggregationError(SimulationError):
    """Raised when aggregation is requested with no participants"""
    pass


class RunLogError(SimulationError):
    """Raised when run logs cannot be written or read"""
    pass
