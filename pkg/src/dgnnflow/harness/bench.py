"""Benchmark driver: statistics, timed runs, oracle cross-checks, ablation sweeps."""

from __future__ import annotations

import os
import statistics
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import DgnnError
from ..executors import Ablation, PipelineConfig, collect_timing, execute
from ..graph import WeightSet
from ..models import ModelKind, check_compatible, init_weights
from ..preprocess import SeededFeatures, SplitterConfig, dataset_stats, preprocess
from ..reference import reference_run
from .datasets import DatasetSpec, load_temporal_csv, parse_synthetic, synthetic_edges
from .weights_io import load_weights

BC_ALPHA_SPLITTER = 1_814_400  # 3 weeks
UCI_SPLITTER = 86_400  # 1 day
KERNEL_RTOL = 1e-5


def available_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def default_workers() -> tuple[int, int]:
    n = available_threads()
    gnn = max(1, n // 2)
    return gnn, max(1, n - gnn)


@dataclass
class RunManifest:
    dataset: str = "synthetic"
    format: str = "bc-alpha"
    model: str = "evolvegcn"
    executor: str = "seq"
    ablation: str = "o2"
    splitter_seconds: int = BC_ALPHA_SPLITTER
    feature_dim: int = 32
    hidden_dim: int = 32
    seed: int = 1
    gnn_workers: int = field(default_factory=lambda: default_workers()[0])
    rnn_workers: int = field(default_factory=lambda: default_workers()[1])
    queue_depth: int = 64
    block_size: int = 8
    weights: str | None = None
    reference_weights: str | None = None
    feedback: bool = False

    def __post_init__(self):
        self.model_kind = ModelKind.parse(self.model)
        self.model = self.model_kind.value
        check_compatible(self.model_kind, self.executor)
        self.pipeline_config()  # validates knobs

    def pipeline_config(self, **overrides) -> PipelineConfig:
        kw = dict(executor=self.executor, ablation=self.ablation, gnn_workers=self.gnn_workers,
                  rnn_workers=self.rnn_workers, queue_depth=self.queue_depth,
                  block_size=self.block_size, seed=self.seed, feedback=self.feedback)
        kw.update(overrides)
        return PipelineConfig(**kw)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("model_kind", None)
        return d


@dataclass
class Prepared:
    snapshots: list
    stats: dict
    preprocess_ms: float
    load_ms: float


def prepare(m: RunManifest) -> Prepared:
    t0 = time.perf_counter()
    synth = parse_synthetic(m.dataset)
    if synth:
        T, N, D = synth
        edges = synthetic_edges(T, N, D, seed=m.seed)
        splitter = 1000
    else:
        edges = load_temporal_csv(DatasetSpec.from_format(m.dataset, m.format))
        splitter = m.splitter_seconds
    t1 = time.perf_counter()
    snaps = preprocess(edges, SplitterConfig(splitter), SeededFeatures(m.feature_dim, m.seed))
    t2 = time.perf_counter()
    return Prepared(snaps, dataset_stats(snaps).as_dict(), (t2 - t1) * 1e3, (t1 - t0) * 1e3)


def resolve_weights(m: RunManifest, path: str | None = None) -> tuple[WeightSet, float]:
    path = m.weights if path is None else path
    t0 = time.perf_counter()
    w = load_weights(path) if path else init_weights(m.model_kind, m.feature_dim, m.hidden_dim, m.seed)
    return w, (time.perf_counter() - t0) * 1e3


def bench(m: RunManifest, prepared: Prepared | None = None) -> dict:
    p = prepared or prepare(m)
    w, load_ms = resolve_weights(m)
    run = execute(m.model_kind, p.snapshots, w, m.pipeline_config())
    timing = collect_timing(run).as_dict()
    timing["weight_file_ms"] = load_ms
    return {
        "manifest": m.as_dict(),
        "stats": p.stats,
        "preprocess_ms": p.preprocess_ms,
        "timing": timing,
        "crosscheck": None,
    }


def _diff(a: np.ndarray, ref: np.ndarray) -> tuple[float, float, tuple[int, int] | None]:
    if a.size == 0:
        return 0.0, 0.0, None
    d = np.abs(a.astype(np.float64) - ref)
    idx = np.unravel_index(int(np.argmax(d)), d.shape)
    max_abs = float(d[idx])
    scale = float(np.abs(ref).max())
    rel = max_abs / scale if scale > 0 else (0.0 if max_abs == 0 else float("inf"))
    return max_abs, rel, (int(idx[0]), int(idx[1]))


def crosscheck(m: RunManifest, prepared: Prepared | None = None, rtol: float = KERNEL_RTOL) -> dict:
    """Configured executor vs sequential (must be byte-identical) and vs the
    dense float64 oracle (relative error at most ``rtol``, measured against
    the largest reference magnitude per snapshot). The oracle uses
    ``reference_weights`` when given, which is how a corrupted weight file shows up."""
    p = prepared or prepare(m)
    w, _ = resolve_weights(m)
    ref_w = load_weights(m.reference_weights) if m.reference_weights else w
    run = execute(m.model_kind, p.snapshots, w, m.pipeline_config())
    seq = execute(m.model_kind, p.snapshots, w, m.pipeline_config(executor="seq"))
    identical = run.output_bytes() == seq.output_bytes()
    dense = reference_run(m.model_kind, p.snapshots, ref_w, feedback=m.feedback)

    per = []
    worst = {"snapshot": None, "row": None, "col": None, "raw_node": None}
    max_abs = max_rel = 0.0
    for t, (out, ref) in enumerate(zip(run.outputs, dense)):
        a, r, loc = _diff(out.out_embed, ref)
        pipe_abs = float(np.abs(out.out_embed.astype(np.float64)
                                - seq.outputs[t].out_embed.astype(np.float64)).max(initial=0.0))
        per.append({"snapshot": t, "max_abs": a, "max_rel": r, "pipelined_vs_seq_max_abs": pipe_abs})
        if r > max_rel or (r == max_rel and a > max_abs):
            worst = {"snapshot": t, "row": loc and loc[0], "col": loc and loc[1],
                     "raw_node": int(out.local_to_raw[loc[0]]) if loc else None}
        max_abs, max_rel = max(max_abs, a), max(max_rel, r)
    passed = identical and max_rel <= rtol
    return {
        "manifest": m.as_dict(),
        "stats": p.stats,
        "timing": collect_timing(run).as_dict(),
        "crosscheck": {
            "max_abs": max_abs,
            "max_rel": max_rel,
            "rtol": rtol,
            "pipelined_identical": identical,
            "pass": passed,
            "worst": worst,
            "per_snapshot": per,
        },
    }


def ablation_sweep(m: RunManifest, repeats: int = 5, splits: list[tuple[int, int]] | None = None,
                   prepared: Prepared | None = None) -> dict:
    """Median per-snapshot latency for Baseline, O1 and O2 (``repeats`` runs
    each), speedups against Baseline, GNN/RNN time shares, and the O2 latency
    for each (gnn_workers, rnn_workers) split."""
    if repeats < 1:
        raise DgnnError("repeats must be >= 1")
    p = prepared or prepare(m)
    w, _ = resolve_weights(m)
    executor = m.executor if m.executor != "seq" else ("v1" if m.model_kind is ModelKind.WEIGHTS_EVOLVED else "v2")
    check_compatible(m.model_kind, executor)

    def measure(cfg: PipelineConfig):
        lat, shares, ref = [], [], None
        for _ in range(repeats):
            run = execute(m.model_kind, p.snapshots, w, cfg)
            rep = collect_timing(run)
            lat.append(float(np.median(rep.per_snapshot_ms)) if rep.per_snapshot_ms else 0.0)
            shares.append(rep.module_shares())
            outs = run.output_bytes()
            ref = outs if ref is None else ref
            if outs != ref:
                raise DgnnError("non-deterministic output across repeated runs")
        share = {k: statistics.median(s[k] for s in shares) for k in ("gnn_pct", "rnn_pct")}
        return statistics.median(lat), lat, share, ref

    rows = []
    base_out = None
    for level in Ablation:
        cfg = m.pipeline_config(executor=executor, ablation=level)
        med, lat, share, outs = measure(cfg)
        base_out = outs if base_out is None else base_out
        rows.append({"ablation": level.value, "median_ms": med, "runs_ms": lat, **share,
                     "identical_to_baseline": outs == base_out})
    base = rows[0]["median_ms"]
    for r in rows:
        r["speedup"] = base / r["median_ms"] if r["median_ms"] > 0 else 0.0

    split_rows = []
    for gw, rw in splits or []:
        cfg = m.pipeline_config(executor=executor, ablation=Ablation.O2, gnn_workers=gw, rnn_workers=rw)
        med, lat, share, _ = measure(cfg)
        split_rows.append({"gnn_workers": gw, "rnn_workers": rw, "median_ms": med, **share,
                           "speedup": base / med if med > 0 else 0.0})
    return {
        "manifest": replace(m, executor=executor).as_dict() if executor != m.executor else m.as_dict(),
        "stats": p.stats,
        "threads": available_threads(),
        "repeats": repeats,
        "ablation": rows,
        "worker_splits": split_rows,
    }


def render_table(report: dict) -> str:
    lines = []
    man = report.get("manifest", {})
    lines.append(f"model={man.get('model')} executor={man.get('executor')} ablation={man.get('ablation')} "
                 f"dataset={man.get('dataset')}")
    st = report.get("stats")
    if st:
        lines.append(f"{'snapshots':>10} {'avg nodes':>10} {'avg edges':>10} {'max nodes':>10} {'max edges':>10}")
        lines.append(f"{st['snapshots']:>10} {st['avg_nodes']:>10.1f} {st['avg_edges']:>10.1f} "
                     f"{st['max_nodes']:>10} {st['max_edges']:>10}")
    tm = report.get("timing")
    if tm:
        tot = tm["stage_breakdown"]["totals_ms"]
        lines.append(f"latency per snapshot: mean {tm['mean_ms']:.3f} ms, total {tm['total_ms']:.1f} ms, "
                     f"weight load {tm['weight_load_ms']:.3f} ms")
        lines.append("stage busy time (ms): " + "  ".join(f"{k} {v:.1f}" for k, v in tot.items()))
    cc = report.get("crosscheck")
    if cc:
        verdict = "PASS" if cc["pass"] else "FAIL"
        lines.append(f"crosscheck {verdict}: max_abs {cc['max_abs']:.3e}, max_rel {cc['max_rel']:.3e}, "
                     f"pipelined identical {cc['pipelined_identical']}")
        if not cc["pass"]:
            wst = cc["worst"]
            lines.append(f"  worst at snapshot {wst['snapshot']} row {wst['row']} col {wst['col']} "
                         f"(raw node {wst['raw_node']})")
    if "ablation" in report:
        lines.append(f"{'level':>9} {'median ms':>10} {'speedup':>8} {'GNN %':>7} {'RNN %':>7}")
        for r in report["ablation"]:
            lines.append(f"{r['ablation']:>9} {r['median_ms']:>10.3f} {r['speedup']:>8.2f} "
                         f"{r['gnn_pct']:>7.1f} {r['rnn_pct']:>7.1f}")
        for r in report.get("worker_splits", []):
            lines.append(f"  O2 gnn={r['gnn_workers']} rnn={r['rnn_workers']}: {r['median_ms']:.3f} ms "
                         f"(x{r['speedup']:.2f})")
    return "\n".join(lines)
