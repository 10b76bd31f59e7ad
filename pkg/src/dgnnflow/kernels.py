"""Single-threaded GCN and RNN primitives.

Every kernel is row-independent and uses a fixed reduction order, so computing
a block of rows gives exactly the same bytes as computing all rows at once.
The executors rely on this to stream nodes (or weight columns) through
pipelines and still match the sequential baseline bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import ShapeMismatch
from .graph import F32, CsrGraph, WeightSet

_ONE = F32(1.0)


def fixed_dot(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``x @ w`` accumulated strictly over k = 0..K-1 in float32.

    BLAS may reorder the inner sum depending on the number of rows; this does not.
    """
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"cannot multiply {x.shape} by {w.shape}")
    out = np.zeros((x.shape[0], w.shape[1]), dtype=F32)
    tmp = np.empty_like(out)
    for k in range(x.shape[1]):
        np.multiply(x[:, k, None], w[k], out=tmp)
        np.add(out, tmp, out=out)
    return out


def sigmoid(a: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return (_ONE / (_ONE + np.exp(-a))).astype(F32, copy=False)


def tanh(a: np.ndarray) -> np.ndarray:
    return np.tanh(a).astype(F32, copy=False)


# ---------------------------------------------------------------- parameters

class _Params:
    """Mixin: build a parameter dataclass from ``prefix.<field>`` weights."""

    @classmethod
    def from_weights(cls, ws: WeightSet, prefix: str):
        try:
            return cls(**{f.name: ws[f"{prefix}.{f.name}"] for f in fields(cls)})
        except KeyError as exc:
            raise ShapeMismatch(f"weight set lacks {exc.args[0]!r}") from None

    @classmethod
    def names(cls, prefix: str) -> list[str]:
        return [f"{prefix}.{f.name}" for f in fields(cls)]


@dataclass(frozen=True)
class GcnWeights(_Params):
    W: np.ndarray
    b: np.ndarray

    @staticmethod
    def shapes(f_in: int, f_out: int) -> dict[str, tuple]:
        return {"W": (f_in, f_out), "b": (f_out,)}


@dataclass(frozen=True)
class GruParams(_Params):
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @staticmethod
    def shapes(f_x: int, hidden: int) -> dict[str, tuple]:
        s = {f"W_{g}": (f_x, hidden) for g in "zrh"}
        s.update({f"U_{g}": (hidden, hidden) for g in "zrh"})
        s.update({f"b_{g}": (hidden,) for g in "zrh"})
        return s

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden(self) -> int:
        return self.U_z.shape[0]


@dataclass(frozen=True)
class LstmParams(_Params):
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @staticmethod
    def shapes(f_x: int, hidden: int) -> dict[str, tuple]:
        s = {f"W_{g}": (f_x, hidden) for g in "ifog"}
        s.update({f"U_{g}": (hidden, hidden) for g in "ifog"})
        s.update({f"b_{g}": (hidden,) for g in "ifog"})
        return s

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[0]

    @property
    def hidden(self) -> int:
        return self.U_i.shape[0]


# ---------------------------------------------------------------- GCN

def gcn_coefficients(csr: CsrGraph) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge ``w_uv / sqrt(d(u) d(v))`` and per-node self-loop ``1 / d(v)``,
    with d = 1 + in-degree. Computed in float64, stored as float32."""
    deg = (1 + csr.in_degree()).astype(np.float64)
    dst = np.repeat(np.arange(csr.n_nodes), csr.in_degree())
    edge = csr.edge_weight.astype(np.float64) / np.sqrt(deg[csr.col_idx] * deg[dst])
    return edge.astype(F32), (1.0 / deg).astype(F32)


def message_pass(csr: CsrGraph, node_embed: np.ndarray, rows=None, coef=None) -> np.ndarray:
    """Normalized neighbor aggregation with self loops.

    For each requested row v: sum over in-neighbors in CSR order, self-loop last.
    ``rows`` selects a subset of destination nodes (default: all).
    """
    h = node_embed
    if h.ndim != 2 or h.shape[0] != csr.n_nodes:
        raise ShapeMismatch(f"node_embed {h.shape} vs {csr.n_nodes} nodes")
    edge_coef, self_coef = gcn_coefficients(csr) if coef is None else coef
    rows = np.arange(csr.n_nodes) if rows is None else np.asarray(rows, dtype=np.int64)
    out = np.zeros((len(rows), h.shape[1]), dtype=F32)
    if len(rows) == 0:
        return out
    start = csr.row_ptr[rows]
    deg = csr.row_ptr[rows + 1] - start
    for j in range(int(deg.max())):
        act = np.nonzero(deg > j)[0]
        e = start[act] + j
        out[act] += edge_coef[e][:, None] * h[csr.col_idx[e]]
    out += self_coef[rows][:, None] * h[rows]
    return out


def node_transform(m: np.ndarray, w: GcnWeights, activate: bool = True) -> np.ndarray:
    if m.ndim != 2 or m.shape[1] != w.W.shape[0] or w.b.shape != (w.W.shape[1],):
        raise ShapeMismatch(f"messages {m.shape} vs W {w.W.shape}, b {w.b.shape}")
    out = fixed_dot(m, w.W) + w.b
    if activate:
        np.maximum(out, F32(0.0), out=out)
    return out


# ---------------------------------------------------------------- GRU
# Split into three stages (pre-activations, candidate, combine) so the
# executors can pipeline them; gru_cell is exactly their composition.

class GruPre(NamedTuple):
    a_z: np.ndarray
    a_r: np.ndarray
    xh: np.ndarray
    h: np.ndarray


class GruCand(NamedTuple):
    z: np.ndarray
    h_tilde: np.ndarray
    h: np.ndarray


def _check_rnn(x: np.ndarray, h: np.ndarray, f_x: int, hidden: int) -> None:
    if x.ndim != 2 or h.ndim != 2 or x.shape[0] != h.shape[0] \
            or x.shape[1] != f_x or h.shape[1] != hidden:
        raise ShapeMismatch(f"x {x.shape}, h {h.shape} vs input {f_x}, hidden {hidden}")


def gru_gates(x: np.ndarray, h: np.ndarray, p: GruParams) -> GruPre:
    _check_rnn(x, h, p.input_dim, p.hidden)
    a_z = fixed_dot(x, p.W_z) + fixed_dot(h, p.U_z) + p.b_z
    a_r = fixed_dot(x, p.W_r) + fixed_dot(h, p.U_r) + p.b_r
    return GruPre(a_z, a_r, fixed_dot(x, p.W_h), h)


def gru_candidate(pre: GruPre, p: GruParams) -> GruCand:
    z = sigmoid(pre.a_z)
    r = sigmoid(pre.a_r)
    h_tilde = tanh(pre.xh + fixed_dot(r * pre.h, p.U_h) + p.b_h)
    return GruCand(z, h_tilde, pre.h)


def gru_combine(cand: GruCand) -> np.ndarray:
    return (_ONE - cand.z) * cand.h + cand.z * cand.h_tilde


def gru_cell(x: np.ndarray, h: np.ndarray, p: GruParams) -> np.ndarray:
    """Batched over rows: x is (n, F_x), h is (n, H). 1-D inputs are treated as one row."""
    if x.ndim == 1 and h.ndim == 1:
        return gru_cell(x[None, :], h[None, :], p)[0]
    return gru_combine(gru_candidate(gru_gates(x, h, p), p))


# ---------------------------------------------------------------- LSTM

class LstmPre(NamedTuple):
    a_i: np.ndarray
    a_f: np.ndarray
    a_o: np.ndarray
    a_g: np.ndarray
    c: np.ndarray


class LstmCand(NamedTuple):
    o: np.ndarray
    c_new: np.ndarray


def lstm_gates(x: np.ndarray, h: np.ndarray, c: np.ndarray, p: LstmParams) -> LstmPre:
    _check_rnn(x, h, p.input_dim, p.hidden)
    if c.shape != h.shape:
        raise ShapeMismatch(f"c {c.shape} vs h {h.shape}")
    pre = [fixed_dot(x, getattr(p, f"W_{g}")) + fixed_dot(h, getattr(p, f"U_{g}")) + getattr(p, f"b_{g}")
           for g in "ifog"]
    return LstmPre(*pre, c)


def lstm_update(pre: LstmPre) -> LstmCand:
    i = sigmoid(pre.a_i)
    f = sigmoid(pre.a_f)
    o = sigmoid(pre.a_o)
    g = tanh(pre.a_g)
    return LstmCand(o, f * pre.c + i * g)


def lstm_combine(cand: LstmCand) -> tuple[np.ndarray, np.ndarray]:
    return cand.o * tanh(cand.c_new), cand.c_new


def lstm_cell(x: np.ndarray, h: np.ndarray, c: np.ndarray, p: LstmParams) -> tuple[np.ndarray, np.ndarray]:
    if x.ndim == 1 and h.ndim == 1 and c.ndim == 1:
        h2, c2 = lstm_cell(x[None, :], h[None, :], c[None, :], p)
        return h2[0], c2[0]
    return lstm_combine(lstm_update(lstm_gates(x, h, c, p)))


# ---------------------------------------------------------------- weight evolution

def matrix_gru_evolve(w_prev: np.ndarray, p: GruParams) -> np.ndarray:
    """Evolve each column c of ``w_prev`` as ``gru_cell(c, c)`` with shared params."""
    if w_prev.ndim != 2 or p.input_dim != w_prev.shape[0] or p.hidden != w_prev.shape[0]:
        raise ShapeMismatch(f"weight {w_prev.shape} vs GRU {p.input_dim}x{p.hidden}")
    cols = np.ascontiguousarray(w_prev.T)
    return np.ascontiguousarray(gru_cell(cols, cols, p).T)
