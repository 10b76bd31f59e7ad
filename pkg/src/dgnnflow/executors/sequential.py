"""Baseline executor: GL, MP, NT and RNN strictly in order, one snapshot at a time."""

from __future__ import annotations

import numpy as np

from ..graph import NodeStateStore, WeightSet
from ..kernels import GcnWeights, GruParams, LstmParams, gru_cell, lstm_cell, matrix_gru_evolve, message_pass, node_transform
from ..models import ModelKind, StepOutput, model_dims
from .config import PipelineConfig, RunResult, TimingRecorder
from .streaming import stage_graph, with_feedback


def run_sequential(model: ModelKind, snapshots, w: WeightSet, cfg: PipelineConfig,
                   states: NodeStateStore | None = None) -> RunResult:
    _, H = model_dims(model, w)
    rec = TimingRecorder(len(snapshots))
    with rec.weight_load():
        w = w.copy()
        gcns = {p: GcnWeights.from_weights(w, p) for p in model.gnn_prefixes}
        rnn = (LstmParams if model is ModelKind.INTEGRATED else GruParams).from_weights(w, model.rnn_prefix)
    if states is None and model is not ModelKind.WEIGHTS_EVOLVED:
        states = NodeStateStore(H)
    W = w["gcn.W"] if model is ModelKind.WEIGHTS_EVOLVED else None

    outputs = []
    rec.start()
    for t, s in enumerate(snapshots):
        with rec.stage("GL", t):
            st = stage_graph(s)
            if cfg.feedback and model is ModelKind.INTEGRATED:
                st = with_feedback(st, states)
        raw = st.raw

        if model is ModelKind.WEIGHTS_EVOLVED:
            with rec.stage("MP", t):
                m = message_pass(s.csr, st.embed, coef=st.coef)
            with rec.stage("RNN", t):
                W = matrix_gru_evolve(W, rnn)
            with rec.stage("NT", t):
                out = node_transform(m, GcnWeights(W, gcns["gcn"].b))
            evolved = w.copy()
            evolved["gcn.W"] = W
            outputs.append(StepOutput(s.index, out, raw, weights=evolved))
        else:
            xs = []
            for p in model.gnn_prefixes:
                with rec.stage("MP", t):
                    m = message_pass(s.csr, st.embed, coef=st.coef)
                with rec.stage("NT", t):
                    xs.append(node_transform(m, gcns[p]))
            with rec.stage("RNN", t):
                h, c = states.gather(raw)
                if model is ModelKind.INTEGRATED:
                    h2, c2 = lstm_cell(np.concatenate(xs, axis=1), h, c, rnn)
                else:
                    h2, c2 = gru_cell(xs[0], h, rnn), None
                states.commit(raw, h2, c2)
            outputs.append(StepOutput(s.index, h2, raw, hidden=h2, cell=c2))
        rec.complete(t)

    final = None
    if model is ModelKind.WEIGHTS_EVOLVED:
        final = w.copy()
        final["gcn.W"] = W
    return RunResult(outputs, rec, cfg, model, states=states, weights=final)
