"""V2: stream nodes from the GNN into the RNN within one timestep.

At O2, each GNN runs message passing and node transformation per node block
and pushes the result into its node queue; RNN workers pop blocks in FIFO
order and run the recurrent cell. For integrated models a joiner pairs the
GNN1 and GNN2 blocks for the same nodes before the RNN sees them. New
recurrent state is committed at the timestep barrier, and graph loading for
t+1 is prefetched while t computes.
"""

from __future__ import annotations

import numpy as np

from ..graph import NodeStateStore, WeightSet
from ..kernels import GcnWeights, GruParams, LstmParams, message_pass, node_transform
from ..models import ModelKind, StepOutput, check_compatible, model_dims
from .config import Ablation, PipelineConfig, RunResult, TimingRecorder
from .streaming import RnnCell, Runtime, Staged, blocks, feed, launch_rnn, stage_graph, with_feedback


class _V2:
    def __init__(self, model, snapshots, w, cfg: PipelineConfig, states):
        self.model = model
        self.snaps = snapshots
        self.cfg = cfg
        self.stream = cfg.ablation is Ablation.O2
        self.pipelined_rnn = cfg.ablation >= Ablation.O1
        self.gnn_workers = cfg.gnn_workers if self.stream else 1
        self.rnn_workers = cfg.rnn_workers if self.pipelined_rnn else 1
        _, self.H = model_dims(model, w)
        self.rec = TimingRecorder(len(snapshots))
        with self.rec.weight_load():
            self.w = w.copy()
            self.gcns = [GcnWeights.from_weights(self.w, p) for p in model.gnn_prefixes]
            params = (LstmParams if model is ModelKind.INTEGRATED else GruParams).from_weights(self.w, model.rnn_prefix)
            self.cell = RnnCell(params)
        self.states = states if states is not None else NodeStateStore(self.H)
        self.integrated = model is ModelKind.INTEGRATED
        per_rnn = 3 if self.pipelined_rnn else 1
        threads = (len(self.gcns) * self.gnn_workers + 1 + self.rnn_workers * per_rnn + 1)
        self.rt = Runtime(threads, self.rec)
        self.queue_stats: list[dict] = []

    def gl(self, t) -> Staged:
        with self.rec.stage("GL", t):
            return stage_graph(self.snaps[t])

    def gnn_block(self, t, st: Staged, g: int, a: int, b: int) -> np.ndarray:
        rows = np.arange(a, b)
        with self.rec.stage("MP", t):
            m = message_pass(st.snapshot.csr, st.embed, rows=rows, coef=st.coef)
        with self.rec.stage("NT", t):
            return node_transform(m, self.gcns[g])

    def step(self, t, st: Staged) -> StepOutput:
        if self.cfg.feedback and self.integrated:
            with self.rec.stage("GL", t):
                st = with_feedback(st, self.states)
        n, raw = st.n, st.raw
        with self.rec.stage("RNN", t):
            h_prev, c_prev = self.states.gather(raw)
        h_out = np.empty((n, self.H), dtype=np.float32)
        c_out = np.empty((n, self.H), dtype=np.float32) if self.integrated else None

        def sink(start, h_new, c_new):
            h_out[start:start + h_new.shape[0]] = h_new
            if c_new is not None:
                c_out[start:start + c_new.shape[0]] = c_new

        def item(a, x):
            b = a + x.shape[0]
            return (a, x, h_prev[a:b], c_prev[a:b] if self.integrated else None)

        spans = blocks(n, self.cfg.block_size)
        depth = self.cfg.queue_depth
        stats = {}
        if self.stream:
            stats = self._stream_step(t, st, spans, item, sink)
        else:
            xs = [self.gnn_block(t, st, g, 0, n) for g in range(len(self.gcns))]
            x = np.concatenate(xs, axis=1) if self.integrated else xs[0]
            items = [item(a, x[a:b]) for a, b in spans]
            if self.pipelined_rnn:
                src = self.rt.queue("rnn-in", consumers=self.rnn_workers, capacity=depth)
                futs = launch_rnn(self.rt, t, self.cell, src, sink, True, self.rnn_workers, depth)
                feed(src, items)
                self.rt.wait(futs)
                stats["rnn-in"] = src.puts
            else:
                for it in items:
                    with self.rec.stage("RNN", t):
                        sink(*self.cell.whole(it))
        self.queue_stats.append(stats)

        with self.rec.stage("RNN", t):
            self.states.commit(raw, h_out, c_out)
        return StepOutput(st.snapshot.index, h_out, raw, hidden=h_out, cell=c_out)

    def _stream_step(self, t, st, spans, item, sink) -> dict:
        depth = self.cfg.queue_depth
        G, gw, R = len(self.gcns), self.gnn_workers, self.rnn_workers
        # stacked: RNN workers read the GNN queue directly; integrated: a joiner does
        node_qs = [self.rt.queue(f"node-queue{g + 1}", producers=gw,
                                 consumers=1 if self.integrated else R, capacity=depth)
                   for g in range(G)]
        futs = []
        for g in range(G):
            for k in range(gw):
                def produce(g=g, mine=spans[k::gw]):
                    q = node_qs[g]
                    try:
                        for a, b in mine:
                            q.put((a, self.gnn_block(t, st, g, a, b)))
                    finally:
                        if not self.rt.abort.is_set():
                            q.close()
                futs.append(self.rt.submit(produce))

        if self.integrated:
            rnn_in = self.rt.queue("rnn-in", consumers=R, capacity=depth)

            def join():
                pending = [{}, {}]
                open_ = [True, True]
                try:
                    while any(open_):
                        for g in (0, 1):
                            if not open_[g]:
                                continue
                            got = node_qs[g].get()
                            if got is None:
                                open_[g] = False
                                continue
                            a, x = got
                            other = pending[1 - g].pop(a, None)
                            if other is None:
                                pending[g][a] = x
                                continue
                            x1, x2 = (x, other) if g == 0 else (other, x)
                            rnn_in.put(item(a, np.concatenate([x1, x2], axis=1)))
                finally:
                    if not self.rt.abort.is_set():
                        rnn_in.close()
            futs.append(self.rt.submit(join))
        else:
            rnn_in = node_qs[0]

        if self.integrated:
            source = rnn_in
        else:
            source = _Mapped(rnn_in, lambda ax: item(*ax))
        futs += launch_rnn(self.rt, t, self.cell, source, sink, self.pipelined_rnn, R, depth)
        self.rt.wait(futs)
        stats = {q.name: q.puts for q in node_qs}
        if self.integrated:
            stats["rnn-in"] = rnn_in.puts
        return stats

    def run(self) -> RunResult:
        T = len(self.snaps)
        outputs = []
        self.rec.start()
        try:
            nxt = self.gl(0) if T else None
            for t in range(T):
                st = nxt
                pre = self.rt.submit(self.gl, t + 1) if (self.stream and t + 1 < T) else None
                outputs.append(self.step(t, st))
                self.rec.complete(t)
                if t + 1 < T:
                    nxt = self.rt.wait([pre])[0] if pre is not None else self.gl(t + 1)
        except BaseException:
            self.rt.abort.set()
            raise
        finally:
            self.rt.close()
        return RunResult(outputs, self.rec, self.cfg, self.model, states=self.states,
                         queue_stats=self.queue_stats)


class _Mapped:
    """Iterate a queue, transforming each item (keeps the queue's close protocol)."""

    def __init__(self, q, fn):
        self.q, self.fn = q, fn

    def __iter__(self):
        for x in self.q:
            yield self.fn(x)


def run_v2(model: ModelKind, snapshots, w: WeightSet, cfg: PipelineConfig,
           states: NodeStateStore | None = None) -> RunResult:
    check_compatible(model, "v2")
    return _V2(model, list(snapshots), w, cfg, states).run()
