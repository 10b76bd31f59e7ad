"""Domain types shared by preprocessing, kernels, models and executors.

All numeric payloads are float32. Node ids in raw datasets are opaque
non-negative integers; inside a snapshot nodes are addressed by dense local
indices assigned in ascending raw-id order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple

import numpy as np

from .errors import (
    ColIdxOutOfRange,
    DgnnError,
    EmbedShapeMismatch,
    NonFiniteValue,
    RenumberNotBijective,
    RowPtrNotMonotone,
    ShapeMismatch,
    ValidationError,
)

F32 = np.float32


class ColIdxNotSorted(ValidationError):
    """A CSR row lists its columns out of order or with duplicates."""


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    weight: float
    time: int


class TemporalEdgeList:
    """COO edge stream with timestamps, stored column-wise.

    Edges keep their input order; nothing here assumes they are sorted by time.
    """

    def __init__(self, src, dst, weight, time):
        self.src = np.asarray(src, dtype=np.int64).reshape(-1)
        self.dst = np.asarray(dst, dtype=np.int64).reshape(-1)
        self.weight = np.asarray(weight, dtype=F32).reshape(-1)
        self.time = np.asarray(time, dtype=np.int64).reshape(-1)
        n = len(self.src)
        if not (len(self.dst) == len(self.weight) == len(self.time) == n):
            raise ShapeMismatch("edge columns have different lengths")
        if n:
            if (self.src < 0).any() or (self.dst < 0).any():
                raise DgnnError("raw node ids must be non-negative")
            if not np.isfinite(self.weight).all():
                raise NonFiniteValue("edge weight is not finite")
            if (self.time < 0).any():
                raise DgnnError("edge time must be >= 0")
            self.t_min = int(self.time.min())
            self.t_max = int(self.time.max())
        else:
            self.t_min = self.t_max = 0

    @classmethod
    def from_edges(cls, edges) -> "TemporalEdgeList":
        edges = list(edges)
        if not edges:
            return cls([], [], [], [])
        src, dst, w, t = zip(*edges)
        return cls(src, dst, w, t)

    def __len__(self) -> int:
        return len(self.src)

    def __iter__(self) -> Iterator[TemporalEdge]:
        for s, d, w, t in zip(self.src.tolist(), self.dst.tolist(),
                              self.weight.tolist(), self.time.tolist()):
            yield TemporalEdge(s, d, w, t)

    def take(self, idx) -> "TemporalEdgeList":
        return TemporalEdgeList(self.src[idx], self.dst[idx], self.weight[idx], self.time[idx])


class RenumberTable:
    """Bijection raw node id <-> local index 0..n-1 (ascending raw id)."""

    def __init__(self, local_to_raw):
        self.local_to_raw = np.asarray(local_to_raw, dtype=np.int64).reshape(-1)
        self._raw_to_local: dict[int, int] | None = None

    def __len__(self) -> int:
        return len(self.local_to_raw)

    @property
    def raw_to_local(self) -> Mapping[int, int]:
        if self._raw_to_local is None:
            self._raw_to_local = {r: i for i, r in enumerate(self.local_to_raw.tolist())}
        return self._raw_to_local

    def lookup(self, raw_ids) -> np.ndarray:
        """Vectorized raw -> local. Returns -1 for ids not in the table."""
        raw_ids = np.asarray(raw_ids, dtype=np.int64)
        pos = np.searchsorted(self.local_to_raw, raw_ids)
        pos = np.minimum(pos, max(len(self.local_to_raw) - 1, 0))
        if len(self.local_to_raw) == 0:
            return np.full(raw_ids.shape, -1, dtype=np.int64)
        hit = self.local_to_raw[pos] == raw_ids
        return np.where(hit, pos, -1)

    def __eq__(self, other) -> bool:
        return isinstance(other, RenumberTable) and np.array_equal(self.local_to_raw, other.local_to_raw)


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Destination-major CSR: row v lists the in-neighbors of v."""

    row_ptr: np.ndarray
    col_idx: np.ndarray
    edge_weight: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.row_ptr) - 1

    @property
    def n_edges(self) -> int:
        return len(self.col_idx)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def to_coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expand to (src, dst, weight) in CSR order."""
        dst = np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.in_degree())
        return self.col_idx.copy(), dst, self.edge_weight.copy()

    @classmethod
    def empty(cls, n_nodes: int = 0) -> "CsrGraph":
        return cls(np.zeros(n_nodes + 1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                   np.zeros(0, dtype=F32))


@dataclass(frozen=True, eq=False)
class Snapshot:
    index: int
    renumber: RenumberTable
    csr: CsrGraph
    node_embed: np.ndarray
    raw_edge_count: int = 0  # edges in the window before duplicate merging

    @property
    def n_nodes(self) -> int:
        return self.csr.n_nodes

    @property
    def n_edges(self) -> int:
        return self.csr.n_edges


def validate_snapshot(s: Snapshot) -> None:
    """Raise the error for the first violated invariant; return None if all hold."""
    l2r = s.renumber.local_to_raw
    if len(l2r) > 1 and not (np.diff(l2r) > 0).all():
        raise RenumberNotBijective("local_to_raw is not strictly ascending (duplicate or unsorted raw ids)")
    if s.renumber._raw_to_local is not None:
        r2l = s.renumber._raw_to_local
        if len(r2l) != len(l2r) or any(r2l.get(int(r)) != i for i, r in enumerate(l2r)):
            raise RenumberNotBijective("raw_to_local disagrees with local_to_raw")
    csr = s.csr
    rp = csr.row_ptr
    if len(rp) == 0 or rp[0] != 0:
        raise RowPtrNotMonotone("row_ptr must start at 0")
    if (np.diff(rp) < 0).any():
        raise RowPtrNotMonotone(f"row_ptr decreases at row {int(np.argmax(np.diff(rp) < 0))}")
    if rp[-1] != len(csr.col_idx):
        raise RowPtrNotMonotone(f"row_ptr[-1]={int(rp[-1])} != n_edges={len(csr.col_idx)}")
    if len(csr.edge_weight) != len(csr.col_idx):
        raise EmbedShapeMismatch("edge_weight length differs from col_idx length")
    n = csr.n_nodes
    if len(csr.col_idx) and ((csr.col_idx < 0).any() or (csr.col_idx >= n).any()):
        raise ColIdxOutOfRange(f"col_idx outside [0, {n})")
    if len(csr.col_idx) > 1:
        step = np.diff(csr.col_idx)
        row_start = np.zeros(len(csr.col_idx), dtype=bool)
        row_start[rp[:-1][np.diff(rp) > 0]] = True
        bad = (step <= 0) & ~row_start[1:]
        if bad.any():
            raise ColIdxNotSorted(f"col_idx not strictly ascending within a row at entry {int(np.argmax(bad)) + 1}")
    if len(l2r) != n:
        raise RenumberNotBijective(f"renumber table has {len(l2r)} entries for {n} nodes")
    emb = s.node_embed
    if emb.ndim != 2 or emb.shape[0] != n:
        raise EmbedShapeMismatch(f"node_embed shape {emb.shape} does not have {n} rows")
    if not np.isfinite(emb).all():
        raise NonFiniteValue("node_embed has non-finite values")
    if not np.isfinite(csr.edge_weight).all():
        raise NonFiniteValue("edge_weight has non-finite values")


class WeightSet:
    """Named float32 parameter tensors."""

    def __init__(self, tensors: Mapping[str, np.ndarray] | None = None):
        self._t: dict[str, np.ndarray] = {}
        for name, arr in (tensors or {}).items():
            self[name] = arr

    def __setitem__(self, name: str, arr) -> None:
        a = np.ascontiguousarray(arr, dtype=F32)
        if not np.isfinite(a).all():
            raise NonFiniteValue(f"weight {name!r} has non-finite values")
        self._t[name] = a

    def __getitem__(self, name: str) -> np.ndarray:
        return self._t[name]

    def __contains__(self, name: str) -> bool:
        return name in self._t

    def __len__(self) -> int:
        return len(self._t)

    def names(self) -> list[str]:
        return list(self._t)

    def items(self):
        return self._t.items()

    def copy(self) -> "WeightSet":
        return WeightSet({k: v.copy() for k, v in self._t.items()})

    def bitwise_equal(self, other: "WeightSet") -> bool:
        return (self.names() == other.names()
                and all(self[k].shape == other[k].shape and self[k].tobytes() == other[k].tobytes()
                        for k in self.names()))

    def prefixed(self, prefix: str) -> dict[str, np.ndarray]:
        """Tensors under ``prefix.``, keyed by the remainder of the name."""
        p = prefix + "."
        return {k[len(p):]: v for k, v in self._t.items() if k.startswith(p)}


@dataclass
class NodeStateStore:
    """Recurrent state per raw node id. Absent ids read as zeros."""

    hidden: int
    _h: dict[int, np.ndarray] = field(default_factory=dict)
    _c: dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self._h)

    def __contains__(self, raw_id: int) -> bool:
        return int(raw_id) in self._h

    def get(self, raw_id: int) -> tuple[np.ndarray, np.ndarray]:
        z = np.zeros(self.hidden, dtype=F32)
        rid = int(raw_id)
        return self._h.get(rid, z), self._c.get(rid, z)

    def gather(self, raw_ids) -> tuple[np.ndarray, np.ndarray]:
        raw_ids = np.asarray(raw_ids).tolist()
        h = np.zeros((len(raw_ids), self.hidden), dtype=F32)
        c = np.zeros((len(raw_ids), self.hidden), dtype=F32)
        for i, r in enumerate(raw_ids):
            if r in self._h:
                h[i] = self._h[r]
                c[i] = self._c[r]
        return h, c

    def commit(self, raw_ids, h: np.ndarray, c: np.ndarray | None = None) -> None:
        if h.shape != (len(raw_ids), self.hidden):
            raise ShapeMismatch(f"state rows {h.shape} vs {len(raw_ids)} ids, hidden {self.hidden}")
        if not np.isfinite(h).all() or (c is not None and not np.isfinite(c).all()):
            raise NonFiniteValue("recurrent state is not finite")
        for i, r in enumerate(np.asarray(raw_ids).tolist()):
            self._h[r] = h[i].copy()
            self._c[r] = c[i].copy() if c is not None else np.zeros(self.hidden, dtype=F32)

    def copy(self) -> "NodeStateStore":
        return NodeStateStore(self.hidden, dict(self._h), dict(self._c))
