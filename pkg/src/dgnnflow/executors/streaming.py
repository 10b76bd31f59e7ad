"""Pieces shared by the executors: graph staging, the worker runtime and the
streamed RNN stage."""

from __future__ import annotations

import concurrent.futures as cf
import threading
import time
from dataclasses import dataclass

import numpy as np

from ..errors import PipelineAborted
from ..graph import NodeStateStore, Snapshot
from ..kernels import (
    GruParams,
    LstmParams,
    gcn_coefficients,
    gru_candidate,
    gru_combine,
    gru_gates,
    lstm_combine,
    lstm_gates,
    lstm_update,
)
from ..models import apply_feedback
from .buffers import NodeQueue
from .config import TimingRecorder


@dataclass
class Staged:
    """A snapshot prepared for compute (graph loading output)."""

    snapshot: Snapshot
    coef: tuple[np.ndarray, np.ndarray]
    embed: np.ndarray

    @property
    def n(self) -> int:
        return self.snapshot.n_nodes

    @property
    def raw(self) -> np.ndarray:
        return self.snapshot.renumber.local_to_raw


def stage_graph(s: Snapshot) -> Staged:
    return Staged(s, gcn_coefficients(s.csr), s.node_embed.copy())


def with_feedback(st: Staged, states: NodeStateStore) -> Staged:
    return Staged(st.snapshot, st.coef, apply_feedback(st.snapshot, states))


def blocks(n: int, size: int) -> list[tuple[int, int]]:
    return [(i, min(i + size, n)) for i in range(0, n, size)]


class Runtime:
    """Thread pool plus a shared abort flag. The first failing task sets the
    flag so every queue wait in the run unblocks."""

    def __init__(self, threads: int, recorder: TimingRecorder):
        self.pool = cf.ThreadPoolExecutor(max_workers=max(1, threads), thread_name_prefix="dgnn")
        self.abort = threading.Event()
        self.rec = recorder

    def submit(self, fn, *args) -> cf.Future:
        def task():
            try:
                return fn(*args)
            except BaseException:
                self.abort.set()
                raise
        return self.pool.submit(task)

    def wait(self, futures) -> list:
        futures = list(futures)
        cf.wait(futures)
        errors = [f.exception() for f in futures if f.exception() is not None]
        if errors:
            root = next((e for e in errors if not isinstance(e, PipelineAborted)), errors[0])
            raise root
        return [f.result() for f in futures]

    def queue(self, name: str, producers: int = 1, consumers: int = 1, capacity: int = 1) -> NodeQueue:
        return NodeQueue(capacity, producers, consumers, self.abort, name)

    def close(self) -> None:
        self.pool.shutdown(wait=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RnnCell:
    """GRU or LSTM over row blocks, as three stages: pre-activations,
    candidate/cell update, output combine. Items are
    ``(start, x, h, c)``; results are ``(start, h_new, c_new)``."""

    def __init__(self, params):
        self.params = params
        self.lstm = isinstance(params, LstmParams)
        assert self.lstm or isinstance(params, GruParams)

    def gates(self, item):
        start, x, h, c = item
        if self.lstm:
            return start, lstm_gates(x, h, c, self.params)
        return start, gru_gates(x, h, self.params)

    def candidate(self, item):
        start, pre = item
        if self.lstm:
            return start, lstm_update(pre)
        return start, gru_candidate(pre, self.params)

    def combine(self, item):
        start, cand = item
        if self.lstm:
            h, c = lstm_combine(cand)
            return start, h, c
        return start, gru_combine(cand), None

    def whole(self, item):
        return self.combine(self.candidate(self.gates(item)))


def _timed(rt: Runtime, t: int, fn, item):
    t0 = time.perf_counter()
    out = fn(item)
    rt.rec.add("RNN", t, time.perf_counter() - t0)
    return out


def launch_rnn(rt: Runtime, t: int, cell: RnnCell, source: NodeQueue, sink, pipelined: bool,
               replicas: int, depth: int) -> list[cf.Future]:
    """Start ``replicas`` consumers on ``source``; each result goes to ``sink``.

    Pipelined: every replica is three threads linked by bounded FIFOs.
    Otherwise each replica runs the whole cell per item.
    Needs ``replicas * (3 if pipelined else 1)`` free pool threads.
    """
    futures = []
    for r in range(replicas):
        if not pipelined:
            def whole_worker():
                for item in source:
                    sink(*_timed(rt, t, cell.whole, item))
            futures.append(rt.submit(whole_worker))
            continue
        q1 = rt.queue(f"rnn{r}.gates->cand", capacity=depth)
        q2 = rt.queue(f"rnn{r}.cand->combine", capacity=depth)

        def gates_worker(q1=q1):
            try:
                for item in source:
                    q1.put(_timed(rt, t, cell.gates, item))
            finally:
                if not rt.abort.is_set():
                    q1.close()

        def cand_worker(q1=q1, q2=q2):
            try:
                for item in q1:
                    q2.put(_timed(rt, t, cell.candidate, item))
            finally:
                if not rt.abort.is_set():
                    q2.close()

        def combine_worker(q2=q2):
            for item in q2:
                sink(*_timed(rt, t, cell.combine, item))

        futures += [rt.submit(gates_worker), rt.submit(cand_worker), rt.submit(combine_worker)]
    return futures


def feed(q: NodeQueue, items) -> None:
    try:
        for item in items:
            q.put(item)
    finally:
        if not q._abort.is_set():
            q.close()
