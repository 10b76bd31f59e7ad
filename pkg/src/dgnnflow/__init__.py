"""Streaming inference for discrete-time dynamic graph neural networks."""

from .errors import DgnnError, IncompatibleExecutor, ShapeMismatch
from .graph import (
    CsrGraph,
    NodeStateStore,
    RenumberTable,
    Snapshot,
    TemporalEdge,
    TemporalEdgeList,
    WeightSet,
    validate_snapshot,
)
from .models import ModelKind, init_weights, run_sequence, zero_weights
from .preprocess import SeededFeatures, SplitterConfig, ZeroFeatures, preprocess

__version__ = "0.1.0"
