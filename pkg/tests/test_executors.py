import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgnnflow.errors import DgnnError, IncompatibleExecutor, PipelineAborted
from dgnnflow.executors import (
    STAGES,
    Ablation,
    NodeQueue,
    PingPongPair,
    PingPongViolation,
    PipelineConfig,
    collect_timing,
    execute,
)
from dgnnflow.executors import streaming, v1, v2
from dgnnflow.graph import CsrGraph, RenumberTable, Snapshot
from dgnnflow.models import ModelKind, init_weights, step
from dgnnflow.preprocess import SeededFeatures, SplitterConfig, preprocess

from conftest import random_edges

COMBOS = [(ModelKind.WEIGHTS_EVOLVED, "v1"), (ModelKind.STACKED, "v1"),
          (ModelKind.STACKED, "v2"), (ModelKind.INTEGRATED, "v2")]
KNOBS = [(1, 1, 1, 1), (2, 3, 2, 3), (3, 2, 64, 8)]  # gnn_workers, rnn_workers, queue_depth, block_size


def sequence(seed, n_edges=150, n_ids=30, feat=5):
    rng = np.random.default_rng(seed)
    return preprocess(random_edges(rng, n_edges, n_ids, 600), SplitterConfig(100), SeededFeatures(feat, seed))


def cfg_for(executor, ablation="o2", knobs=(1, 1, 64, 8), **kw):
    g, r, q, b = knobs
    return PipelineConfig(executor=executor, ablation=ablation, gnn_workers=g, rnn_workers=r,
                          queue_depth=q, block_size=b, **kw)


@pytest.mark.parametrize("model,executor", COMBOS)
@pytest.mark.parametrize("ablation", ["baseline", "o1", "o2"])
@pytest.mark.parametrize("knobs", KNOBS)
def test_equivalent_to_sequential(model, executor, ablation, knobs):
    snaps = sequence(11)
    w = init_weights(model, 5, 4, seed=2, scale=0.4)
    seq = execute(model, snaps, w, cfg_for("seq"))
    run = execute(model, snaps, w, cfg_for(executor, ablation, knobs))
    assert run.output_bytes() == seq.output_bytes()
    if model is ModelKind.WEIGHTS_EVOLVED:
        assert run.weights.bitwise_equal(seq.weights)
    else:
        for r in {int(x) for s in snaps for x in s.renumber.local_to_raw}:
            assert all(a.tobytes() == b.tobytes() for a, b in zip(run.states.get(r), seq.states.get(r)))


def test_feedback_equivalence():
    model, executor = ModelKind.INTEGRATED, "v2"
    snaps = sequence(3, feat=4)
    w = init_weights(model, 4, 4, seed=1, scale=0.4)
    seq = execute(model, snaps, w, cfg_for("seq", feedback=True))
    run = execute(model, snaps, w, cfg_for(executor, knobs=(2, 2, 1, 2), feedback=True))
    assert run.output_bytes() == seq.output_bytes()
    plain = execute(model, snaps, w, cfg_for("seq"))
    assert plain.output_bytes() != seq.output_bytes()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(COMBOS), st.integers(1, 3), st.integers(1, 3),
       st.integers(1, 4), st.integers(1, 9), st.sampled_from(list(Ablation)))
def test_schedule_independence(seed, combo, gw, rw, depth, bs, ablation):
    model, executor = combo
    snaps = sequence(seed, n_edges=60, n_ids=15)
    w = init_weights(model, 5, 3, seed=seed % 7, scale=0.5)
    seq = execute(model, snaps, w, cfg_for("seq"))
    run = execute(model, snaps, w, cfg_for(executor, ablation, (gw, rw, depth, bs)))
    assert run.output_bytes() == seq.output_bytes()


@pytest.mark.parametrize("model,executor", COMBOS)
def test_queue_depth_one_terminates(model, executor):
    snaps = sequence(5, n_edges=300, n_ids=60)
    w = init_weights(model, 5, 4)
    done = []

    def go():
        done.append(execute(model, snaps, w, cfg_for(executor, "o2", (3, 3, 1, 1))))

    th = threading.Thread(target=go, daemon=True)
    th.start()
    th.join(60)
    assert not th.is_alive(), "pipeline did not terminate"
    assert len(done[0].outputs) == len(snaps)


@pytest.mark.parametrize("model", [ModelKind.WEIGHTS_EVOLVED, ModelKind.STACKED])
@pytest.mark.parametrize("ablation", ["baseline", "o1", "o2"])
def test_pingpong_safety(model, ablation):
    executor = "v1"
    snaps = sequence(8)
    run = execute(model, snaps, init_weights(model, 5, 4), cfg_for(executor, ablation, (2, 2, 2, 2), debug=True))
    assert run.buffers
    for b in run.buffers:
        b.assert_safe()


def test_pingpong_detects_violation():
    p = PingPongPair(initial="a")
    assert p.read("X") == "a"
    p.write("Y", "b")
    p.flip()
    assert p.read("X") == "b"
    p.assert_safe()
    p.flip()  # now the half holding "a" is active again; writing targets "b"'s half
    p.write("Y", "c")
    p.flip()
    p.read("X")
    p.write("Y", "d")
    p.read("X")
    assert not p.violations()
    bad = PingPongPair(initial=0)
    bad.write("Y", 1)
    bad.active = 1 - bad.active  # swap without starting a new epoch
    bad.read("X")
    with pytest.raises(PingPongViolation):
        bad.assert_safe()


class TestNodeQueue:
    def test_fifo_and_close(self):
        q = NodeQueue(4)
        for i in range(3):
            q.put(i)
        q.close()
        assert list(q) == [0, 1, 2]

    def test_multi_producer_consumer_close(self):
        q = NodeQueue(2, producers=3, consumers=2)
        got = [[], []]

        def consume(k):
            for x in q:
                got[k].append(x)

        cs = [threading.Thread(target=consume, args=(k,)) for k in range(2)]
        ps = [threading.Thread(target=lambda p=p: ([q.put((p, i)) for i in range(20)], q.close()))
              for p in range(3)]
        for th in cs + ps:
            th.start()
        for th in cs + ps:
            th.join(10)
        items = sorted(got[0] + got[1])
        assert items == sorted((p, i) for p in range(3) for i in range(20))
        for p in range(3):
            mine = [i for k in range(2) for (pp, i) in got[k] if pp == p]
            assert len(mine) == 20

    def test_backpressure_blocks(self):
        q = NodeQueue(1)
        q.put(1)
        started = threading.Event()
        finished = threading.Event()

        def producer():
            started.set()
            q.put(2)
            finished.set()

        th = threading.Thread(target=producer, daemon=True)
        th.start()
        started.wait()
        time.sleep(0.15)
        assert not finished.is_set()
        assert q.get() == 1
        th.join(2)
        assert finished.is_set() and q.get() == 2

    def test_abort_unblocks(self):
        abort = threading.Event()
        q = NodeQueue(1, abort=abort)
        threading.Timer(0.1, abort.set).start()
        with pytest.raises(PipelineAborted):
            q.get()

    def test_capacity_validated(self):
        with pytest.raises(DgnnError):
            NodeQueue(0)


def test_single_node_one_item_per_stage():
    s = Snapshot(0, RenumberTable([42]), CsrGraph.empty(1), np.ones((1, 3), np.float32))
    for model in (ModelKind.STACKED, ModelKind.INTEGRATED):
        run = execute(model, [s], init_weights(model, 3, 2), cfg_for("v2", knobs=(2, 2, 4, 8)))
        stats = run.queue_stats[0]
        assert stats and all(v == 1 for v in stats.values()), stats
        if model is ModelKind.INTEGRATED:
            assert set(stats) == {"node-queue1", "node-queue2", "rnn-in"}


@pytest.mark.parametrize("model,executor", COMBOS + [(m, "seq") for m in ModelKind])
def test_one_snapshot_equals_step(model, executor, small_sequence):
    w = init_weights(model, 6, 4, seed=4)
    run = execute(model, small_sequence[:1], w, cfg_for(executor))
    from dgnnflow.graph import NodeStateStore
    assert run.outputs[0].out_embed.tobytes() == step(model, small_sequence[0], w, NodeStateStore(4)).out_embed.tobytes()


def test_incompatible_rejected():
    w = init_weights(ModelKind.INTEGRATED, 3, 2)
    with pytest.raises(IncompatibleExecutor):
        execute(ModelKind.INTEGRATED, [], w, cfg_for("v1"))
    with pytest.raises(IncompatibleExecutor):
        v1.run_v1(ModelKind.INTEGRATED, [], w, cfg_for("v1"))
    w = init_weights(ModelKind.WEIGHTS_EVOLVED, 3, 2)
    with pytest.raises(IncompatibleExecutor):
        v2.run_v2(ModelKind.WEIGHTS_EVOLVED, [], w, cfg_for("v2"))


class TestTiming:
    @pytest.mark.parametrize("model,executor", COMBOS + [(ModelKind.STACKED, "seq")])
    def test_report_structure(self, model, executor):
        snaps = sequence(2)
        cfg = cfg_for(executor, knobs=(2, 3, 16, 4))
        rep = collect_timing(execute(model, snaps, init_weights(model, 5, 4), cfg))
        assert rep.n_snapshots == len(snaps)
        assert all(set(row) == set(STAGES) for row in rep.stage_ms)
        assert all(v >= 0 for row in rep.stage_ms for v in row.values())
        assert rep.config["gnn_workers"] == 2 and rep.config["rnn_workers"] == 3
        assert rep.total_ms == pytest.approx(sum(rep.per_snapshot_ms))
        assert all(x > 0 for x in rep.per_snapshot_ms)
        d = rep.as_dict()
        assert set(d["stage_breakdown"]["totals_ms"]) == set(STAGES)
        shares = d["stage_breakdown"]["module_shares"]
        assert shares["gnn_pct"] + shares["rnn_pct"] == pytest.approx(100.0)

    def test_empty_run(self):
        run = execute(ModelKind.STACKED, [], init_weights(ModelKind.STACKED, 3, 2), cfg_for("v2"))
        rep = collect_timing(run)
        assert rep.per_snapshot_ms == [] and rep.stage_ms == [] and rep.total_ms == 0.0
        assert collect_timing(None).n_snapshots == 0

    def test_sequential_stage_sum_close_to_latency(self):
        snaps = sequence(4, n_edges=400, n_ids=80, feat=16)
        rep = collect_timing(execute(ModelKind.STACKED, snaps, init_weights(ModelKind.STACKED, 16, 16),
                                     cfg_for("seq")))
        busy = sum(sum(row.values()) for row in rep.stage_ms)
        assert busy <= rep.total_ms * 1.01 + 0.5
        assert busy >= 0.5 * rep.total_ms


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(executor="v3"), dict(gnn_workers=0), dict(rnn_workers=0),
                                    dict(queue_depth=0), dict(block_size=0), dict(ablation="o4")])
    def test_rejects_bad_values(self, kw):
        with pytest.raises((DgnnError, ValueError)):
            PipelineConfig(**kw)

    def test_ablation_order(self):
        assert Ablation.O2 >= Ablation.O1 >= Ablation.BASELINE
        assert not (Ablation.BASELINE >= Ablation.O1)
        assert Ablation.parse("O1") is Ablation.O1


@pytest.mark.parametrize("executor,model", [("v1", ModelKind.STACKED), ("v1", ModelKind.WEIGHTS_EVOLVED),
                                            ("v2", ModelKind.STACKED), ("v2", ModelKind.INTEGRATED)])
@pytest.mark.parametrize("ablation", ["o1", "o2"])
def test_worker_error_propagates(monkeypatch, executor, model, ablation):
    calls = {"n": 0}
    real_gru, real_lstm = streaming.gru_gates, streaming.lstm_gates

    def boom(real):
        def f(*a):
            calls["n"] += 1
            if calls["n"] == 3:
                raise RuntimeError("injected")
            return real(*a)
        return f

    monkeypatch.setattr(streaming, "gru_gates", boom(real_gru))
    monkeypatch.setattr(streaming, "lstm_gates", boom(real_lstm))
    snaps = sequence(9)
    out = {}

    def go():
        try:
            execute(model, snaps, init_weights(model, 5, 4), cfg_for(executor, ablation, (2, 2, 1, 1)))
        except Exception as exc:  # noqa: BLE001
            out["exc"] = exc

    th = threading.Thread(target=go, daemon=True)
    th.start()
    th.join(30)
    assert not th.is_alive(), "pipeline hung after a worker error"
    assert isinstance(out.get("exc"), RuntimeError)
