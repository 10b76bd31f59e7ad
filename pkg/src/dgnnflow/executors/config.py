from __future__ import annotations

import enum
import threading
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DgnnError

STAGES = ("GL", "MP", "NT", "RNN")


class Ablation(enum.Enum):
    BASELINE = "baseline"  # stages strictly in order, no streaming
    O1 = "o1"              # + RNN sub-stages pipelined through FIFOs
    O2 = "o2"              # + GNN/RNN module overlap (ping-pong or node queues)

    @classmethod
    def parse(cls, value) -> "Ablation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DgnnError(f"unknown ablation level {value!r}") from None

    def __ge__(self, other: "Ablation") -> bool:
        order = [Ablation.BASELINE, Ablation.O1, Ablation.O2]
        return order.index(self) >= order.index(other)


EXECUTORS = ("seq", "v1", "v2")


@dataclass(frozen=True)
class PipelineConfig:
    """Executor choice and knobs.

    ``block_size`` is the number of nodes (or weight columns) carried by one
    FIFO item; 1 gives strict per-node streaming.
    ``rnn_workers`` applies from O1 up, ``gnn_workers`` at O2.
    """

    executor: str = "seq"
    ablation: Ablation = Ablation.O2
    gnn_workers: int = 1
    rnn_workers: int = 1
    queue_depth: int = 64
    block_size: int = 8
    seed: int = 1
    feedback: bool = False
    debug: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ablation", Ablation.parse(self.ablation))
        if self.executor not in EXECUTORS:
            raise DgnnError(f"unknown executor {self.executor!r}; expected one of {EXECUTORS}")
        for name in ("gnn_workers", "rnn_workers", "queue_depth", "block_size"):
            if int(getattr(self, name)) < 1:
                raise DgnnError(f"{name} must be >= 1")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ablation"] = self.ablation.value
        return d


class TimingRecorder:
    """Thread-safe per-snapshot stage clock. Stage times are busy time summed
    over all workers; latency is measured from completion timestamps."""

    def __init__(self, n_snapshots: int):
        self.stage_s = np.zeros((n_snapshots, len(STAGES)))
        self.completed = [None] * n_snapshots
        self.t_start: float | None = None
        self.weight_load_s = 0.0
        self._lock = threading.Lock()

    def add(self, stage: str, t: int, seconds: float) -> None:
        with self._lock:
            self.stage_s[t, STAGES.index(stage)] += seconds

    @contextmanager
    def stage(self, stage: str, t: int):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.add(stage, t, time.perf_counter() - t0)

    @contextmanager
    def weight_load(self):
        t0 = time.perf_counter()
        yield
        self.weight_load_s = time.perf_counter() - t0

    def start(self) -> None:
        self.t_start = time.perf_counter()

    def complete(self, t: int) -> None:
        self.completed[t] = time.perf_counter()


@dataclass
class TimingReport:
    per_snapshot_ms: list[float]
    stage_ms: list[dict]
    total_ms: float
    mean_ms: float
    weight_load_ms: float
    completion_ms: list[float]
    config: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return len(self.per_snapshot_ms)

    def stage_totals(self) -> dict:
        return {s: float(sum(row[s] for row in self.stage_ms)) for s in STAGES}

    def module_shares(self) -> dict:
        """GNN (MP + NT) vs RNN share of busy time, in percent."""
        tot = self.stage_totals()
        gnn = tot["MP"] + tot["NT"]
        rnn = tot["RNN"]
        if gnn + rnn <= 0:
            return {"gnn_pct": 0.0, "rnn_pct": 0.0}
        return {"gnn_pct": 100.0 * gnn / (gnn + rnn), "rnn_pct": 100.0 * rnn / (gnn + rnn)}

    def as_dict(self) -> dict:
        return {
            "per_snapshot_ms": self.per_snapshot_ms,
            "mean_ms": self.mean_ms,
            "total_ms": self.total_ms,
            "weight_load_ms": self.weight_load_ms,
            "stage_breakdown": {"per_snapshot": self.stage_ms, "totals_ms": self.stage_totals(),
                                "module_shares": self.module_shares()},
            "config": self.config,
        }


@dataclass
class RunResult:
    outputs: list
    recorder: TimingRecorder
    config: PipelineConfig
    model: object
    states: object = None
    weights: object = None
    buffers: list = field(default_factory=list)   # ping-pong pairs, for safety checks
    queue_stats: list = field(default_factory=list)  # per snapshot: {queue name: items put}

    def output_bytes(self) -> list[bytes]:
        return [o.to_bytes() for o in self.outputs]


def collect_timing(run: RunResult | None) -> TimingReport:
    if run is None or not run.outputs:
        cfg = run.config.as_dict() if run is not None else {}
        return TimingReport([], [], 0.0, 0.0, run.recorder.weight_load_s * 1e3 if run else 0.0, [], cfg)
    rec = run.recorder
    done = np.array(rec.completed, dtype=float)
    rel = (done - rec.t_start) * 1e3
    per = np.diff(np.concatenate([[0.0], rel]))
    stage_ms = [{s: float(v * 1e3) for s, v in zip(STAGES, row)} for row in rec.stage_s]
    cfg = run.config.as_dict()
    cfg["model"] = getattr(run.model, "value", str(run.model))
    return TimingReport(per.tolist(), stage_ms, float(rel[-1]), float(per.mean()),
                        rec.weight_load_s * 1e3, rel.tolist(), cfg)
