"""Execution engines: sequential baseline, V1 (cross-timestep overlap) and
V2 (node-level streaming), each with Baseline / O1 / O2 ablation levels."""

from __future__ import annotations

from ..graph import NodeStateStore, WeightSet
from ..models import ModelKind, check_compatible
from .buffers import NodeQueue, PingPongPair, PingPongViolation
from .config import STAGES, Ablation, PipelineConfig, RunResult, TimingRecorder, TimingReport, collect_timing
from .sequential import run_sequential
from .v1 import run_v1
from .v2 import run_v2

_RUNNERS = {"seq": run_sequential, "v1": run_v1, "v2": run_v2}


def execute(model: ModelKind, snapshots, w: WeightSet, cfg: PipelineConfig,
            states: NodeStateStore | None = None) -> RunResult:
    check_compatible(model, cfg.executor)
    return _RUNNERS[cfg.executor](model, snapshots, w, cfg, states)


__all__ = [
    "STAGES", "Ablation", "NodeQueue", "PingPongPair", "PingPongViolation", "PipelineConfig",
    "RunResult", "TimingRecorder", "TimingReport", "collect_timing", "execute",
    "run_sequential", "run_v1", "run_v2",
]
