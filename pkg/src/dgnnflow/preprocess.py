"""Host-side preprocessing: time slicing, renumbering and COO -> CSR conversion."""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import DgnnError, EmptyEdgeList, EndpointNotInTable
from .graph import F32, CsrGraph, RenumberTable, Snapshot, TemporalEdgeList, validate_snapshot


@dataclass(frozen=True)
class SplitterConfig:
    window_seconds: int
    drop_empty: bool = True

    def __post_init__(self):
        if int(self.window_seconds) <= 0:
            raise DgnnError("window_seconds must be positive")


@dataclass(frozen=True, eq=False)
class EdgeGroup:
    """The COO edges of one time window, in input order."""

    window: int
    edges: TemporalEdgeList
    n_nodes: int

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def slice_snapshots(edges: TemporalEdgeList, cfg: SplitterConfig) -> list[EdgeGroup]:
    """Partition edges into fixed windows anchored at ``edges.t_min``."""
    if len(edges) == 0:
        raise EmptyEdgeList("cannot slice an empty edge list")
    width = int(cfg.window_seconds)
    win = (edges.time - edges.t_min) // width
    order = np.argsort(win, kind="stable")
    sorted_win = win[order]
    ids, starts = np.unique(sorted_win, return_index=True)
    bounds = list(starts) + [len(order)]
    present = {int(k): order[bounds[i]:bounds[i + 1]] for i, k in enumerate(ids)}

    windows = ids.tolist() if cfg.drop_empty else range(int(ids[-1]) + 1)
    groups = []
    empty = np.zeros(0, dtype=np.int64)
    for k in windows:
        idx = present.get(int(k), empty)
        sub = edges.take(idx)
        n_nodes = len(np.unique(np.concatenate([sub.src, sub.dst])))
        groups.append(EdgeGroup(int(k), sub, n_nodes))
    return groups


def build_renumber_table(group: EdgeGroup) -> RenumberTable:
    e = group.edges
    if len(e) == 0:
        raise EmptyEdgeList(f"window {group.window} has no edges")
    return RenumberTable(np.unique(np.concatenate([e.src, e.dst])))


def coo_to_csr(group: EdgeGroup, table: RenumberTable) -> CsrGraph:
    """Destination-major CSR; duplicate (src, dst) pairs merged by summing weights."""
    e = group.edges
    n = len(table)
    src = table.lookup(e.src)
    dst = table.lookup(e.dst)
    missing = (src < 0) | (dst < 0)
    if missing.any():
        i = int(np.argmax(missing))
        raise EndpointNotInTable(f"edge {int(e.src[i])}->{int(e.dst[i])} has an endpoint outside the table")
    if len(e) == 0:
        return CsrGraph.empty(n)
    key = dst * n + src
    order = np.argsort(key, kind="stable")
    key_sorted = key[order]
    uniq, first = np.unique(key_sorted, return_index=True)
    merged = np.add.reduceat(e.weight[order].astype(np.float64), first).astype(F32)
    u_dst = uniq // n
    u_src = uniq % n
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u_dst, minlength=n), out=row_ptr[1:])
    return CsrGraph(row_ptr, u_src.astype(np.int64), merged)


class ZeroFeatures:
    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, raw_ids) -> np.ndarray:
        return np.zeros((len(raw_ids), self.dim), dtype=F32)


class SeededFeatures:
    """Id-stable pseudo-random features in [-1, 1): same raw id, same row."""

    def __init__(self, dim: int, seed: int = 1):
        self.dim = dim
        self.seed = seed
        self._cache: dict[int, np.ndarray] = {}

    def row(self, raw_id: int) -> np.ndarray:
        r = self._cache.get(raw_id)
        if r is None:
            rng = np.random.default_rng([self.seed, raw_id])
            r = rng.uniform(-1.0, 1.0, self.dim).astype(F32)
            self._cache[raw_id] = r
        return r

    def __call__(self, raw_ids) -> np.ndarray:
        out = np.empty((len(raw_ids), self.dim), dtype=F32)
        for i, r in enumerate(np.asarray(raw_ids).tolist()):
            out[i] = self.row(r)
        return out


FeatureProvider = Callable[[np.ndarray], np.ndarray]


def build_snapshot(group: EdgeGroup, table: RenumberTable, csr: CsrGraph,
                   features: FeatureProvider, index: int | None = None) -> Snapshot:
    embed = np.ascontiguousarray(features(table.local_to_raw), dtype=F32)
    s = Snapshot(group.window if index is None else index, table, csr, embed,
                 raw_edge_count=group.n_edges)
    validate_snapshot(s)
    return s


def preprocess(edges: TemporalEdgeList, cfg: SplitterConfig,
               features: FeatureProvider) -> list[Snapshot]:
    """Slice, renumber and convert every window. Snapshot index = position in the sequence."""
    return list(iter_snapshots(slice_snapshots(edges, cfg), features))


def iter_snapshots(groups: list[EdgeGroup], features: FeatureProvider) -> Iterator[Snapshot]:
    for t, g in enumerate(groups):
        if g.n_edges == 0:
            # drop_empty=False keeps empty windows; they become zero-node snapshots
            yield Snapshot(t, RenumberTable([]), CsrGraph.empty(0),
                           np.zeros((0, getattr(features, "dim", 0)), dtype=F32))
            continue
        table = build_renumber_table(g)
        yield build_snapshot(g, table, coo_to_csr(g, table), features, index=t)


def staged_snapshots(groups: list[EdgeGroup], features: FeatureProvider,
                     depth: int = 2) -> Iterator[Snapshot]:
    """Like :func:`iter_snapshots`, but built on a host thread ``depth`` windows ahead
    of the consumer."""
    q: queue.Queue = queue.Queue(maxsize=max(1, depth))
    done = object()
    stop = threading.Event()

    def produce():
        try:
            for s in iter_snapshots(groups, features):
                while not stop.is_set():
                    try:
                        q.put(s, timeout=0.05)
                        break
                    except queue.Full:
                        continue
                if stop.is_set():
                    return
            q.put(done)
        except BaseException as exc:  # surfaced in the consumer
            q.put(exc)

    th = threading.Thread(target=produce, name="dgnn-staging", daemon=True)
    th.start()
    try:
        while True:
            item = q.get()
            if item is done:
                break
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop.set()
        th.join()


@dataclass(frozen=True)
class DatasetStats:
    snapshots: int
    avg_nodes: float
    avg_edges: float
    max_nodes: int
    max_edges: int
    avg_unique_edges: float = 0.0
    max_unique_edges: int = 0

    def as_dict(self) -> dict:
        return {
            "snapshots": self.snapshots,
            "avg_nodes": self.avg_nodes,
            "avg_edges": self.avg_edges,
            "max_nodes": self.max_nodes,
            "max_edges": self.max_edges,
            "avg_unique_edges": self.avg_unique_edges,
            "max_unique_edges": self.max_unique_edges,
            "averaged_over": "retained snapshots",
        }


def dataset_stats(snapshots: list[Snapshot]) -> DatasetStats:
    """Table-style statistics. ``edges`` counts raw interactions per window;
    ``unique_edges`` counts CSR entries after duplicate merging."""
    if not snapshots:
        return DatasetStats(0, 0.0, 0.0, 0, 0)
    nodes = np.array([s.n_nodes for s in snapshots])
    edges = np.array([s.raw_edge_count for s in snapshots])
    uniq = np.array([s.n_edges for s in snapshots])
    return DatasetStats(len(snapshots), float(nodes.mean()), float(edges.mean()),
                        int(nodes.max()), int(edges.max()), float(uniq.mean()), int(uniq.max()))
