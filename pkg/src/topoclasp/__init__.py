"""Topological contrastive graph classification.

Persistent-homology features computed on Heat Kernel Signature filtrations
are encoded by an MLP, structural features by a GIN, and the two views are
aligned with a bidirectional InfoNCE loss before a fused classifier.
"""

from topoclasp.errors import (
    ConfigError,
    ContractError,
    FormatError,
    IntegrityError,
    TopoclaspError,
    TrainingAborted,
)
from topoclasp.graphs import Dataset, Graph, parse_tu_dataset

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractError",
    "Dataset",
    "FormatError",
    "Graph",
    "IntegrityError",
    "TopoclaspError",
    "TrainingAborted",
    "parse_tu_dataset",
]
