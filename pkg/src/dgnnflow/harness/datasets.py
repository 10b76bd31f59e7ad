"""Temporal edge-list loaders and a synthetic workload generator."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DatasetError, EmptyFile, MissingColumn, ParseError
from ..graph import TemporalEdgeList

# Column layouts of the public dumps. Bitcoin Alpha ships as
# "SOURCE,TARGET,RATING,TIME"; the KONECT UCI messages dump is whitespace
# separated "src dst weight time" with '%' comment lines.
PRESETS = {
    "bc-alpha": {"delimiter": ",", "columns": (0, 1, 2, 3), "comment": "%"},
    "uci": {"delimiter": None, "columns": (0, 1, 2, 3), "comment": "%"},
    "csv": {"delimiter": ",", "columns": (0, 1, 2, 3), "comment": "#"},
    "tsv": {"delimiter": "\t", "columns": (0, 1, 2, 3), "comment": "#"},
    "ws": {"delimiter": None, "columns": (0, 1, 2, 3), "comment": "%"},
}


@dataclass(frozen=True)
class DatasetSpec:
    path: Path
    columns: tuple[int, int, int, int] = (0, 1, 2, 3)  # src, dst, weight, time
    delimiter: str | None = ","  # None splits on any whitespace
    header: bool = False
    comment: str | None = "%"
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        cols = tuple(int(c) for c in self.columns)
        if len(cols) != 4 or len(set(cols)) != 4 or min(cols) < 0:
            raise DatasetError(f"column indices must be 4 distinct non-negative ints, got {cols}")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_format(cls, path, fmt: str = "bc-alpha") -> "DatasetSpec":
        """``fmt`` is a preset name or ``key=value`` pairs, e.g.
        ``uci`` or ``src=1,dst=0,weight=2,time=3,delim=tab,header=1``."""
        fmt = (fmt or "bc-alpha").strip()
        if fmt in PRESETS:
            return cls(path, name=fmt, **PRESETS[fmt])
        opts = dict(PRESETS["csv"])
        cols = list(opts["columns"])
        header = False
        for part in filter(None, fmt.split(",")):
            if "=" not in part:
                raise DatasetError(f"bad format item {part!r}")
            k, v = (x.strip() for x in part.split("=", 1))
            if k in ("src", "dst", "weight", "time"):
                cols[("src", "dst", "weight", "time").index(k)] = int(v)
            elif k == "delim":
                opts["delimiter"] = {"tab": "\t", "comma": ",", "space": None, "ws": None,
                                     "semicolon": ";"}.get(v, v)
            elif k == "header":
                header = v.lower() in ("1", "true", "yes")
            elif k == "comment":
                opts["comment"] = v or None
            else:
                raise DatasetError(f"unknown format key {k!r}")
        opts["columns"] = tuple(cols)
        return cls(path, header=header, name="custom", **opts)


def _int_field(text: str, line: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        raise ParseError(line, f"{what} {text!r} is not a number") from None
    if not math.isfinite(v) or not v.is_integer():
        raise ParseError(line, f"{what} {text!r} is not an integer")
    return int(v)


def load_temporal_csv(spec: DatasetSpec) -> TemporalEdgeList:
    """One edge per data row, in file order. Blank and comment lines are skipped."""
    try:
        raw_lines = spec.path.read_bytes().splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {spec.path}: {exc}") from None
    ci_src, ci_dst, ci_w, ci_t = spec.columns
    need = max(spec.columns) + 1
    src, dst, wts, times = [], [], [], []
    skipped_header = not spec.header
    for lineno, raw in enumerate(raw_lines, start=1):
        try:
            text = raw.decode("utf-8").strip()
        except UnicodeDecodeError:
            raise ParseError(lineno, "not valid UTF-8") from None
        if not text or (spec.comment and text.startswith(spec.comment)):
            continue
        if not skipped_header:
            skipped_header = True
            continue
        parts = text.split(spec.delimiter) if spec.delimiter is not None else text.split()
        if len(parts) < need:
            raise MissingColumn(lineno, f"expected at least {need} fields, found {len(parts)}")
        parts = [p.strip() for p in parts]
        s = _int_field(parts[ci_src], lineno, "source id")
        d = _int_field(parts[ci_dst], lineno, "destination id")
        t = _int_field(parts[ci_t], lineno, "time")
        try:
            w = float(parts[ci_w])
        except ValueError:
            raise ParseError(lineno, f"weight {parts[ci_w]!r} is not a number") from None
        if s < 0 or d < 0:
            raise ParseError(lineno, "node ids must be non-negative")
        if t < 0:
            raise ParseError(lineno, "time must be non-negative")
        if not math.isfinite(w) or abs(w) > np.finfo(np.float32).max:
            raise ParseError(lineno, f"weight {parts[ci_w]!r} is not a finite float32")
        if max(s, d, t) >= 2**63:
            raise ParseError(lineno, "value exceeds 64-bit range")
        src.append(s)
        dst.append(d)
        wts.append(w)
        times.append(t)
    if not src:
        raise EmptyFile(f"{spec.path} has no data rows")
    return TemporalEdgeList(src, dst, wts, times)


_SYNTH = re.compile(r"^synthetic(?::(\d+)x(\d+)(?:x(\d+))?)?$")


def parse_synthetic(name: str) -> tuple[int, int, int] | None:
    """``synthetic:TxN[xD]`` -> (snapshots, nodes per snapshot, avg in-degree)."""
    m = _SYNTH.match(str(name))
    if not m:
        return None
    return int(m.group(1) or 50), int(m.group(2) or 256), int(m.group(3) or 4)


def synthetic_edges(n_snapshots: int, n_nodes: int, avg_degree: int = 4, seed: int = 1,
                    window: int = 1000) -> TemporalEdgeList:
    """Edges whose window k (width ``window``) touches exactly ``n_nodes`` ids
    drawn from a pool 1.5x that size, so node sets overlap across windows."""
    rng = np.random.default_rng(seed)
    pool = max(n_nodes, int(1.5 * n_nodes))
    src, dst, w, t = [], [], [], []
    for k in range(n_snapshots):
        ids = np.sort(rng.choice(pool, size=n_nodes, replace=False))
        ring_s = ids
        ring_d = np.roll(ids, -1)
        m = max(0, avg_degree * n_nodes - n_nodes)
        rs = ids[rng.integers(0, n_nodes, m)]
        rd = ids[rng.integers(0, n_nodes, m)]
        s_k = np.concatenate([ring_s, rs])
        d_k = np.concatenate([ring_d, rd])
        src.append(s_k)
        dst.append(d_k)
        w.append(rng.integers(-10, 11, len(s_k)).astype(np.float32))
        t.append(k * window + rng.integers(0, window, len(s_k)))
    t[0][0] = 0  # anchor window 0 at time 0
    return TemporalEdgeList(np.concatenate(src), np.concatenate(dst), np.concatenate(w), np.concatenate(t))
