"""Streaming anomaly detection that adapts to concept drift.

A static autoencoder scores familiar data, an evidential controller measures
how unfamiliar each instance is, and a hypernetwork shifts the autoencoder's
weights per instance when it is. A sliding-window rule fine-tunes all three
on recent data when unfamiliar instances accumulate.
"""

__version__ = "0.1.0"

from hyperdrift.config import RunConfig, load_config, parse_config
from hyperdrift.engine import VARIANTS, StreamDecision, StreamRunner, apply_variant, run_stream, train
from hyperdrift.errors import (
    ConfigError,
    ContractError,
    DataError,
    DomainError,
    HyperdriftError,
    ShapeError,
    TrainingError,
    UndefinedMetricError,
)
from hyperdrift.ous import Snapshot
from hyperdrift.serialize import load_snapshot, save_snapshot

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "DomainError",
    "HyperdriftError",
    "RunConfig",
    "ShapeError",
    "Snapshot",
    "StreamDecision",
    "StreamRunner",
    "TrainingError",
    "UndefinedMetricError",
    "VARIANTS",
    "__version__",
    "apply_variant",
    "load_config",
    "load_snapshot",
    "parse_config",
    "run_stream",
    "save_snapshot",
    "train",
]
