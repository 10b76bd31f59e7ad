"""One-timestep step functions for the three discrete-time DGNN classes.

* weights-evolved (EvolveGCN-style): a matrix GRU evolves the GCN weight, the
  GCN then runs with the evolved weight;
* integrated (GCRN-M2-style): two GCNs feed an LSTM with per-node state;
* stacked: one GCN feeds a per-node GRU.

Each step is expressed with the same kernels the executors pipeline, so the
functions here double as the reference semantics for every executor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DgnnError, IncompatibleExecutor, ShapeMismatch
from .graph import F32, NodeStateStore, Snapshot, WeightSet
from .kernels import (
    GcnWeights,
    GruParams,
    LstmParams,
    gcn_coefficients,
    gru_cell,
    lstm_cell,
    matrix_gru_evolve,
    message_pass,
    node_transform,
)


class ModelKind(enum.Enum):
    WEIGHTS_EVOLVED = "evolvegcn"
    INTEGRATED = "gcrn-m2"
    STACKED = "stacked"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        aliases = {"evolvegcn": cls.WEIGHTS_EVOLVED, "weights-evolved": cls.WEIGHTS_EVOLVED,
                   "gcrn-m2": cls.INTEGRATED, "gcrn": cls.INTEGRATED, "integrated": cls.INTEGRATED,
                   "stacked": cls.STACKED}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise DgnnError(f"unknown model {value!r}") from None

    @property
    def gnn_prefixes(self) -> tuple[str, ...]:
        return {ModelKind.WEIGHTS_EVOLVED: ("gcn",),
                ModelKind.INTEGRATED: ("gnn1", "gnn2"),
                ModelKind.STACKED: ("gnn",)}[self]

    @property
    def rnn_prefix(self) -> str:
        return "lstm" if self is ModelKind.INTEGRATED else "gru"


# Which executors may run which model class.
COMPATIBILITY: dict[ModelKind, frozenset[str]] = {
    ModelKind.STACKED: frozenset({"seq", "v1", "v2"}),
    ModelKind.INTEGRATED: frozenset({"seq", "v2"}),
    ModelKind.WEIGHTS_EVOLVED: frozenset({"seq", "v1"}),
}


def check_compatible(model: ModelKind, executor: str) -> None:
    if executor not in COMPATIBILITY[model]:
        raise IncompatibleExecutor(f"{model.value} cannot run under executor {executor}")


# ---------------------------------------------------------------- weights

def weight_shapes(model: ModelKind, feature_dim: int, hidden_dim: int) -> dict[str, tuple]:
    F, H = feature_dim, hidden_dim
    shapes: dict[str, tuple] = {}

    def add(prefix, table):
        shapes.update({f"{prefix}.{k}": v for k, v in table.items()})

    if model is ModelKind.WEIGHTS_EVOLVED:
        add("gcn", GcnWeights.shapes(F, H))
        add("gru", GruParams.shapes(F, F))
    elif model is ModelKind.INTEGRATED:
        add("gnn1", GcnWeights.shapes(F, H))
        add("gnn2", GcnWeights.shapes(F, H))
        add("lstm", LstmParams.shapes(2 * H, H))
    else:
        add("gnn", GcnWeights.shapes(F, H))
        add("gru", GruParams.shapes(H, H))
    return shapes


def init_weights(model: ModelKind, feature_dim: int, hidden_dim: int, seed: int = 1,
                 scale: float = 0.1) -> WeightSet:
    """Seeded uniform(-scale, scale) weights, drawn in sorted-name order."""
    rng = np.random.default_rng(seed)
    shapes = weight_shapes(model, feature_dim, hidden_dim)
    return WeightSet({name: rng.uniform(-scale, scale, shapes[name]).astype(F32)
                      for name in sorted(shapes)})


def zero_weights(model: ModelKind, feature_dim: int, hidden_dim: int) -> WeightSet:
    shapes = weight_shapes(model, feature_dim, hidden_dim)
    return WeightSet({name: np.zeros(shapes[name], dtype=F32) for name in sorted(shapes)})


def model_dims(model: ModelKind, w: WeightSet) -> tuple[int, int]:
    """Infer (feature_dim, hidden_dim) and check every tensor's shape."""
    key = f"{model.gnn_prefixes[0]}.W"
    if key not in w:
        raise ShapeMismatch(f"weight set lacks {key!r}")
    F, H = w[key].shape
    expected = weight_shapes(model, F, H)
    for name, shape in expected.items():
        if name not in w:
            raise ShapeMismatch(f"weight set lacks {name!r}")
        if w[name].shape != shape:
            raise ShapeMismatch(f"{name} has shape {w[name].shape}, expected {shape}")
    return F, H


# ---------------------------------------------------------------- steps

@dataclass
class StepOutput:
    index: int
    out_embed: np.ndarray
    local_to_raw: np.ndarray
    weights: WeightSet | None = None  # evolved weights (weights-evolved only)
    hidden: np.ndarray | None = None
    cell: np.ndarray | None = None

    def to_bytes(self) -> bytes:
        return self.out_embed.tobytes()


def gnn(s: Snapshot, w: GcnWeights, coef=None, embed=None) -> np.ndarray:
    x = s.node_embed if embed is None else embed
    return node_transform(message_pass(s.csr, x, coef=coef), w, activate=True)


def apply_feedback(s: Snapshot, states: NodeStateStore) -> np.ndarray:
    """Node features with previously produced hidden state substituted for
    nodes that have one (integrated models, optional)."""
    if s.node_embed.shape[1] != states.hidden:
        raise ShapeMismatch("hidden-state feedback needs feature_dim == hidden_dim")
    emb = s.node_embed.copy()
    for i, r in enumerate(s.renumber.local_to_raw.tolist()):
        if r in states:
            emb[i] = states.get(r)[0]
    return emb


def evolvegcn_step(s: Snapshot, w: WeightSet) -> StepOutput:
    model_dims(ModelKind.WEIGHTS_EVOLVED, w)
    w_t = matrix_gru_evolve(w["gcn.W"], GruParams.from_weights(w, "gru"))
    out = gnn(s, GcnWeights(w_t, w["gcn.b"]))
    evolved = w.copy()
    evolved["gcn.W"] = w_t
    return StepOutput(s.index, out, s.renumber.local_to_raw, weights=evolved)


def gcrn_m2_step(s: Snapshot, w: WeightSet, states: NodeStateStore,
                 feedback: bool = False) -> StepOutput:
    """Runs one step and commits the new (h, c) into ``states`` by raw id."""
    _, H = model_dims(ModelKind.INTEGRATED, w)
    if states.hidden != H:
        raise ShapeMismatch(f"state store hidden {states.hidden} vs model {H}")
    embed = apply_feedback(s, states) if feedback else None
    coef = gcn_coefficients(s.csr)
    x1 = gnn(s, GcnWeights.from_weights(w, "gnn1"), coef, embed)
    x2 = gnn(s, GcnWeights.from_weights(w, "gnn2"), coef, embed)
    raw = s.renumber.local_to_raw
    h, c = states.gather(raw)
    h2, c2 = lstm_cell(np.concatenate([x1, x2], axis=1), h, c, LstmParams.from_weights(w, "lstm"))
    states.commit(raw, h2, c2)
    return StepOutput(s.index, h2, raw, hidden=h2, cell=c2)


def stacked_step(s: Snapshot, w: WeightSet, states: NodeStateStore) -> StepOutput:
    _, H = model_dims(ModelKind.STACKED, w)
    if states.hidden != H:
        raise ShapeMismatch(f"state store hidden {states.hidden} vs model {H}")
    x = gnn(s, GcnWeights.from_weights(w, "gnn"))
    raw = s.renumber.local_to_raw
    h, _ = states.gather(raw)
    h2 = gru_cell(x, h, GruParams.from_weights(w, "gru"))
    states.commit(raw, h2)
    return StepOutput(s.index, h2, raw, hidden=h2)


def step(model: ModelKind, s: Snapshot, w: WeightSet, states: NodeStateStore | None = None,
         feedback: bool = False) -> StepOutput:
    if model is ModelKind.WEIGHTS_EVOLVED:
        return evolvegcn_step(s, w)
    if model is ModelKind.INTEGRATED:
        return gcrn_m2_step(s, w, states, feedback)
    return stacked_step(s, w, states)


def run_sequence(model, snapshots, w: WeightSet, executor="seq", states: NodeStateStore | None = None):
    """Run ``model`` over ``snapshots`` in order under the chosen executor.

    ``executor`` is ``"seq"``, ``"v1"``, ``"v2"`` or a
    :class:`~dgnnflow.executors.PipelineConfig`. Returns a
    :class:`~dgnnflow.executors.RunResult`.
    """
    from .executors import PipelineConfig, execute

    model = ModelKind.parse(model)
    cfg = executor if isinstance(executor, PipelineConfig) else PipelineConfig(executor=executor)
    return execute(model, list(snapshots), w, cfg, states)
