"""Dense float64 reference for whole model runs.

Shares no code with the kernels: adjacency is materialized as a dense matrix,
normalization is D^-1/2 (A + I) D^-1/2 and the recurrent cells use plain
matrix products. Used by ``crosscheck`` as the independent oracle.
"""

from __future__ import annotations

import numpy as np

from .graph import Snapshot, WeightSet
from .models import ModelKind


def _sig(a):
    return 1.0 / (1.0 + np.exp(-a))


def dense_propagation(s: Snapshot) -> np.ndarray:
    """D^-1/2 (A_w + I) D^-1/2 with A[v, u] = w_uv, d = 1 + number of in-neighbors."""
    n = s.n_nodes
    src, dst, w = s.csr.to_coo()
    a = np.zeros((n, n))
    cnt = np.zeros((n, n))
    np.add.at(a, (dst, src), w.astype(np.float64))
    np.add.at(cnt, (dst, src), 1.0)
    a += np.eye(n)
    d = 1.0 + (cnt > 0).sum(axis=1)
    dm = np.diag(1.0 / np.sqrt(d))
    return dm @ a @ dm


def dense_gcn(p: np.ndarray, x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.maximum(p @ x @ W + b, 0.0)


def dense_gru(x, h, g: dict) -> np.ndarray:
    z = _sig(x @ g["W_z"] + h @ g["U_z"] + g["b_z"])
    r = _sig(x @ g["W_r"] + h @ g["U_r"] + g["b_r"])
    ht = np.tanh(x @ g["W_h"] + (r * h) @ g["U_h"] + g["b_h"])
    return (1 - z) * h + z * ht


def dense_lstm(x, h, c, q: dict):
    i = _sig(x @ q["W_i"] + h @ q["U_i"] + q["b_i"])
    f = _sig(x @ q["W_f"] + h @ q["U_f"] + q["b_f"])
    o = _sig(x @ q["W_o"] + h @ q["U_o"] + q["b_o"])
    g = np.tanh(x @ q["W_g"] + h @ q["U_g"] + q["b_g"])
    c2 = f * c + i * g
    return o * np.tanh(c2), c2


def reference_run(model: ModelKind, snapshots, w: WeightSet, feedback: bool = False) -> list[np.ndarray]:
    """Outputs of every step, computed in float64."""
    w64 = {k: v.astype(np.float64) for k, v in w.items()}

    def group(prefix):
        return {k.split(".", 1)[1]: v for k, v in w64.items() if k.startswith(prefix + ".")}

    outs = []
    state: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    W = w64.get("gcn.W")
    for s in snapshots:
        p = dense_propagation(s)
        x = s.node_embed.astype(np.float64)
        raw = s.renumber.local_to_raw.tolist()
        if model is ModelKind.WEIGHTS_EVOLVED:
            cols = W.T
            W = dense_gru(cols, cols, group("gru")).T
            outs.append(dense_gcn(p, x, W, w64["gcn.b"]))
            continue
        H = w64[f"{model.gnn_prefixes[0]}.W"].shape[1]
        zero = np.zeros(H)
        if feedback and model is ModelKind.INTEGRATED:
            x = x.copy()
            for i, r in enumerate(raw):
                if r in state:
                    x[i] = state[r][0]
        h = np.array([state.get(r, (zero, zero))[0] for r in raw]).reshape(len(raw), H)
        c = np.array([state.get(r, (zero, zero))[1] for r in raw]).reshape(len(raw), H)
        if model is ModelKind.INTEGRATED:
            x1 = dense_gcn(p, x, w64["gnn1.W"], w64["gnn1.b"])
            x2 = dense_gcn(p, x, w64["gnn2.W"], w64["gnn2.b"])
            h, c = dense_lstm(np.hstack([x1, x2]), h, c, group("lstm"))
        else:
            h = dense_gru(dense_gcn(p, x, w64["gnn.W"], w64["gnn.b"]), h, group("gru"))
        for i, r in enumerate(raw):
            state[r] = (h[i], c[i])
        outs.append(h)
    return outs
