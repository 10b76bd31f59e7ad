"""V1: overlap GNN and RNN work from adjacent timesteps.

Per timestep two phases run back to back, each pairing a heavy stage with a
light one:

    phase A:  MP(t)  || RNN(t+1)        (weights-evolved)
              MP(t)  || RNN(t-1)        (stacked: RNN consumes the previous GNN output)
    phase B:  NT(t)  || GL(t+1)

Weights (weights-evolved) and staged graphs travel through ping-pong pairs
that flip at the end of phase B; stacked models also pass the GNN output
through a pair. Below O2 the same phases run their tasks one after another.
"""

from __future__ import annotations

import numpy as np

from ..graph import NodeStateStore, WeightSet
from ..kernels import GcnWeights, GruParams, message_pass, node_transform
from ..models import ModelKind, StepOutput, check_compatible, model_dims
from .buffers import PingPongPair
from .config import Ablation, PipelineConfig, RunResult, TimingRecorder
from .streaming import RnnCell, Runtime, blocks, feed, launch_rnn, stage_graph


class _V1:
    def __init__(self, model, snapshots, w, cfg: PipelineConfig, states):
        self.model = model
        self.snaps = snapshots
        self.cfg = cfg
        self.overlap = cfg.ablation is Ablation.O2
        self.pipelined_rnn = cfg.ablation >= Ablation.O1
        self.gnn_workers = cfg.gnn_workers if self.overlap else 1
        self.rnn_workers = cfg.rnn_workers if self.pipelined_rnn else 1
        _, self.H = model_dims(model, w)
        self.rec = TimingRecorder(len(snapshots))
        with self.rec.weight_load():
            self.w = w.copy()
            self.gcn = GcnWeights.from_weights(self.w, model.gnn_prefixes[0])
            self.cell = RnnCell(GruParams.from_weights(self.w, "gru"))
            self.wbuf = PingPongPair(self.gcn.W, "weights")
        self.gbuf = PingPongPair(name="graph")
        self.xbuf = PingPongPair(name="gnn-out")
        self.states = states if states is not None else NodeStateStore(self.H)
        self.messages: dict[int, np.ndarray] = {}
        self.outputs: list[StepOutput | None] = [None] * len(snapshots)
        threads = self.gnn_workers + self.rnn_workers * (3 if self.pipelined_rnn else 1)
        self.rt = Runtime(threads, self.rec)
        self.phase_rt = Runtime(2, self.rec)
        self.phase_rt.abort = self.rt.abort

    # ---- stages
    def gl(self, t):
        with self.rec.stage("GL", t):
            self.gbuf.write("GL", stage_graph(self.snaps[t]))

    def _rows_parallel(self, n, fn):
        parts = [np.arange(a, b) for a, b in blocks(n, max(1, -(-n // self.gnn_workers)))]
        if len(parts) <= 1:
            return fn(np.arange(n))
        futs = [self.rt.submit(fn, rows) for rows in parts]
        return np.concatenate(self.rt.wait(futs), axis=0)

    def mp(self, t):
        st = self.gbuf.read("MP")

        def work(rows):
            with self.rec.stage("MP", t):
                return message_pass(st.snapshot.csr, st.embed, rows=rows, coef=st.coef)
        self.messages[t] = self._rows_parallel(st.n, work)

    def nt(self, t):
        m = self.messages.pop(t)
        W = self.wbuf.read("NT") if self.model is ModelKind.WEIGHTS_EVOLVED else self.gcn.W
        gw = GcnWeights(W, self.gcn.b)

        def work(rows):
            with self.rec.stage("NT", t):
                return node_transform(m[rows], gw)
        x = self._rows_parallel(len(m), work)
        s = self.snaps[t]
        if self.model is ModelKind.WEIGHTS_EVOLVED:
            evolved = self.w.copy()
            evolved["gcn.W"] = W
            self.outputs[t] = StepOutput(s.index, x, s.renumber.local_to_raw, weights=evolved)
            self.rec.complete(t)
        else:
            self.xbuf.write("NT", x)

    def _rnn_rows(self, t, x, h):
        """Run the GRU over rows of (x, h); returns the new h."""
        n = x.shape[0]
        out = np.empty_like(h)

        def sink(start, h_new, _c):
            out[start:start + h_new.shape[0]] = h_new

        items = [(a, x[a:b], h[a:b], None) for a, b in blocks(n, self.cfg.block_size)]
        if not self.pipelined_rnn:
            for item in items:
                with self.rec.stage("RNN", t):
                    sink(*self.cell.whole(item))
            return out
        src = self.rt.queue(f"rnn-in[{t}]", consumers=self.rnn_workers, capacity=self.cfg.queue_depth)
        futs = launch_rnn(self.rt, t, self.cell, src, sink, True, self.rnn_workers, self.cfg.queue_depth)
        feed(src, items)
        self.rt.wait(futs)
        return out

    def rnn_weights(self, t):
        W_prev = self.wbuf.read("RNN")
        cols = np.ascontiguousarray(W_prev.T)
        self.wbuf.write("RNN", np.ascontiguousarray(self._rnn_rows(t, cols, cols).T))

    def rnn_nodes(self, t):
        x = self.xbuf.read("RNN")
        s = self.snaps[t]
        raw = s.renumber.local_to_raw
        with self.rec.stage("RNN", t):
            h, _ = self.states.gather(raw)
        h2 = self._rnn_rows(t, x, h)
        with self.rec.stage("RNN", t):
            self.states.commit(raw, h2)
        self.outputs[t] = StepOutput(s.index, h2, raw, hidden=h2)
        self.rec.complete(t)

    # ---- schedule
    def phase(self, *tasks):
        tasks = [tk for tk in tasks if tk is not None]
        if self.overlap and len(tasks) > 1:
            self.phase_rt.wait([self.phase_rt.submit(fn, t) for fn, t in tasks])
        else:
            for fn, t in tasks:
                fn(t)

    def run(self) -> RunResult:
        T = len(self.snaps)
        self.rec.start()
        try:
            if T:
                if self.model is ModelKind.WEIGHTS_EVOLVED:
                    self._run_evolved(T)
                else:
                    self._run_stacked(T)
        except BaseException:
            self.rt.abort.set()
            raise
        finally:
            self.rt.close()
            self.phase_rt.close()
        final = None
        if self.model is ModelKind.WEIGHTS_EVOLVED:
            final = self.w.copy()
            final["gcn.W"] = self.wbuf.read("final") if T else self.gcn.W
        return RunResult(self.outputs, self.rec, self.cfg, self.model, states=self.states,
                         weights=final, buffers=[self.wbuf, self.gbuf, self.xbuf])

    def _run_evolved(self, T):
        self.phase((self.gl, 0), (self.rnn_weights, 0))
        self.gbuf.flip()
        self.wbuf.flip()
        for t in range(T):
            nxt = t + 1 < T
            self.phase((self.mp, t), (self.rnn_weights, t + 1) if nxt else None)
            self.phase((self.nt, t), (self.gl, t + 1) if nxt else None)
            if nxt:
                self.gbuf.flip()
                self.wbuf.flip()

    def _run_stacked(self, T):
        self.phase((self.gl, 0))
        self.gbuf.flip()
        for t in range(T):
            self.phase((self.mp, t), (self.rnn_nodes, t - 1) if t else None)
            self.phase((self.nt, t), (self.gl, t + 1) if t + 1 < T else None)
            self.gbuf.flip()
            self.xbuf.flip()
        self.phase((self.rnn_nodes, T - 1))


def run_v1(model: ModelKind, snapshots, w: WeightSet, cfg: PipelineConfig,
           states: NodeStateStore | None = None) -> RunResult:
    check_compatible(model, "v1")
    return _V1(model, list(snapshots), w, cfg, states).run()
