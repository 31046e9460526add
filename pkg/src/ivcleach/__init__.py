"""Round-based simulator for LEACH and IVC-LEACH wireless sensor network clustering."""

__version__ = "0.1.0"

from .core import (
    ConfigError,
    DeadNodeChargeError,
    DomainError,
    FailureInjection,
    NodeRecord,
    Position,
    Protocol,
    RadioModel,
    Role,
    SimConfig,
)
from .election import GeographicKMeans
from .engine import ComparisonReport, RoundMetrics, SimResult, compare, lifetime_marks, run
from .valuation import NodeValuer, node_value

__all__ = [
    "ComparisonReport",
    "ConfigError",
    "DeadNodeChargeError",
    "DomainError",
    "FailureInjection",
    "GeographicKMeans",
    "NodeRecord",
    "NodeValuer",
    "Position",
    "Protocol",
    "RadioModel",
    "Role",
    "RoundMetrics",
    "SimConfig",
    "SimResult",
    "compare",
    "lifetime_marks",
    "node_value",
    "run",
]
