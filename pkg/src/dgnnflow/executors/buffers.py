"""Bounded node queues and ping-pong buffer pairs."""

from __future__ import annotations

import queue
import threading

from ..errors import DgnnError, PipelineAborted

_POLL_S = 0.05
_CLOSED = object()


class NodeQueue:
    """Bounded FIFO between pipeline stages.

    ``put`` blocks while full, ``get`` while empty. Each of ``producers``
    calls :meth:`close` once when done; after the last close every consumer
    receives ``None`` from :meth:`get`. Blocking calls give up with
    :class:`PipelineAborted` once ``abort`` is set.
    """

    def __init__(self, capacity: int, producers: int = 1, consumers: int = 1,
                 abort: threading.Event | None = None, name: str = "queue"):
        if capacity < 1:
            raise DgnnError("queue capacity must be >= 1")
        self.name = name
        self.capacity = capacity
        self.consumers = consumers
        self._q: queue.Queue = queue.Queue(maxsize=capacity)
        self._open_producers = producers
        self._lock = threading.Lock()
        self._abort = abort or threading.Event()
        self.puts = 0
        self.gets = 0

    def _put_raw(self, item) -> None:
        while True:
            try:
                self._q.put(item, timeout=_POLL_S)
                return
            except queue.Full:
                if self._abort.is_set():
                    raise PipelineAborted(f"{self.name}: aborted while full") from None

    def put(self, item) -> None:
        self._put_raw(item)
        with self._lock:
            self.puts += 1

    def close(self) -> None:
        with self._lock:
            self._open_producers -= 1
            last = self._open_producers == 0
        if last:
            for _ in range(self.consumers):
                self._put_raw(_CLOSED)

    def get(self):
        while True:
            try:
                item = self._q.get(timeout=_POLL_S)
                break
            except queue.Empty:
                if self._abort.is_set():
                    raise PipelineAborted(f"{self.name}: aborted while empty") from None
        if item is _CLOSED:
            return None
        with self._lock:
            self.gets += 1
        return item

    def __iter__(self):
        while (item := self.get()) is not None:
            yield item


class PingPongViolation(DgnnError):
    pass


class PingPongPair:
    """Two buffers: readers see the active one, the writer fills the other,
    and :meth:`flip` swaps them at a timestep barrier.

    Every access is logged per epoch (interval between flips) so tests can
    assert that no half is both read and written within an epoch.
    """

    def __init__(self, initial=None, name: str = "pingpong"):
        self.name = name
        self._buf = [initial, None]
        self.active = 0
        self.epoch = 0
        self.log: list[tuple[int, str, int, str]] = []
        self._lock = threading.Lock()

    def read(self, stage: str):
        with self._lock:
            self.log.append((self.epoch, stage, self.active, "r"))
            return self._buf[self.active]

    def write(self, stage: str, value) -> None:
        with self._lock:
            target = 1 - self.active
            self.log.append((self.epoch, stage, target, "w"))
            self._buf[target] = value

    def flip(self) -> None:
        with self._lock:
            self.active = 1 - self.active
            self.epoch += 1

    def violations(self) -> list[str]:
        seen: dict[tuple[int, int], dict[str, set]] = {}
        for epoch, stage, half, op in self.log:
            seen.setdefault((epoch, half), {"r": set(), "w": set()})[op].add(stage)
        return [f"{self.name} epoch {e} half {h}: read by {sorted(v['r'])}, written by {sorted(v['w'])}"
                for (e, h), v in sorted(seen.items()) if v["r"] and v["w"]]

    def assert_safe(self) -> None:
        bad = self.violations()
        if bad:
            raise PingPongViolation("; ".join(bad))
