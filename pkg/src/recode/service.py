"""In-process shared memory: many actors, one serialized RecodeMemory."""

from __future__ import annotations

import threading
import traceback
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from recode.memory import NonFiniteEmbedding, RecodeMemory
from recode.normalizer import RewardNormalizer, normalize_reward


class SchedulingMode(str, Enum):
    FREE_RUNNING = "free_running"
    ROUND_ROBIN = "deterministic_round_robin"


class MemoryService:
    """One memory and one (shared) normalizer behind a lock.

    Each submission runs the whole memory update plus normalization as a
    single critical section. Rejected (non-finite) embeddings change nothing,
    the counter included.
    """

    def __init__(self, memory: RecodeMemory, normalizer: RewardNormalizer | None = None):
        self.memory = memory
        self.normalizer = normalizer if normalizer is not None else RewardNormalizer()
        self.submissions = 0
        self._lock = threading.Lock()
        self._log: list[np.ndarray] | None = None

    def record(self, on: bool = True) -> None:
        """Keep a copy of every accepted embedding in service order."""
        with self._lock:
            self._log = [] if on else None

    @property
    def log(self) -> list[np.ndarray]:
        return list(self._log or [])

    def submit_raw(self, e) -> tuple[float, float]:
        e = np.asarray(e, dtype=np.float64)
        with self._lock:
            raw = self.memory.process(e)
            r = normalize_reward(self.normalizer, raw)
            self.submissions += 1
            if self._log is not None:
                self._log.append(e.copy())
        return raw, r

    def submit(self, e) -> float:
        return self.submit_raw(e)[1]


class ActorFailure(RuntimeError):
    def __init__(self, actor: int, exc: BaseException, tb: str):
        super().__init__(f"actor {actor} failed: {exc!r}\n{tb}")
        self.actor = actor
        self.original = exc


@dataclass
class RunStats:
    mode: SchedulingMode
    per_actor: list[int]
    total_submissions: int
    errors: list[str] = field(default_factory=list)


class _Turns:
    """Round-robin baton. ``gate(i)`` blocks until it is actor i's turn;
    ``done(i)`` passes the turn on. Finished actors drop out of the rotation."""

    def __init__(self, n: int):
        self.cond = threading.Condition()
        self.active = list(range(n))
        self.turn = 0
        self.aborted = False

    def gate(self, i: int) -> None:
        with self.cond:
            while not self.aborted and self.active[self.turn] != i:
                self.cond.wait()
            if self.aborted:
                raise _Abort

    def done(self, i: int, finished: bool = False) -> None:
        with self.cond:
            pos = self.active.index(i)
            if finished:
                self.active.pop(pos)
                if self.turn > pos:
                    self.turn -= 1
                if self.active:
                    self.turn %= len(self.active)
            else:
                self.turn = (pos + 1) % len(self.active)
            self.cond.notify_all()

    def abort(self) -> None:
        with self.cond:
            self.aborted = True
            self.cond.notify_all()


class _Abort(Exception):
    pass


class _Port:
    """What an actor body sees: a submit function gated by the scheduler."""

    def __init__(self, service: MemoryService, actor: int, turns: _Turns | None):
        self.service = service
        self.actor = actor
        self.count = 0
        self._turns = turns

    def submit_raw(self, e) -> tuple[float, float]:
        if self._turns is not None:
            self._turns.gate(self.actor)
            try:
                out = self.service.submit_raw(e)
            finally:
                self._turns.done(self.actor)
        else:
            out = self.service.submit_raw(e)
        self.count += 1
        return out

    def submit(self, e) -> float:
        return self.submit_raw(e)[1]


def spawn_actors(service: MemoryService, n: int, actor_body, mode: SchedulingMode | str
                 = SchedulingMode.ROUND_ROBIN) -> RunStats:
    """Run ``actor_body(port, actor_index)`` on n threads and join them.

    In round-robin mode actors take strict turns (0, 1, ..., n-1, 0, ...);
    an actor that returns leaves the rotation. Any failure aborts the other
    actors and is re-raised as ``ActorFailure``; the service lock is never
    left held because it is only taken inside ``submit_raw``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mode = SchedulingMode(mode)
    turns = _Turns(n) if mode is SchedulingMode.ROUND_ROBIN else None
    ports = [_Port(service, i, turns) for i in range(n)]
    failures: list[tuple[int, BaseException, str]] = []
    fail_lock = threading.Lock()

    def run(i: int):
        try:
            actor_body(ports[i], i)
        except _Abort:
            return
        except BaseException as exc:  # noqa: BLE001 - reported to the caller
            with fail_lock:
                failures.append((i, exc, traceback.format_exc()))
            if turns is not None:
                turns.abort()
            return
        if turns is not None:
            turns.done(i, finished=True)

    threads = [threading.Thread(target=run, args=(i,), name=f"actor-{i}") for i in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if failures:
        i, exc, tb = failures[0]
        raise ActorFailure(i, exc, tb)
    per_actor = [p.count for p in ports]
    return RunStats(mode, per_actor, sum(per_actor))


def round_robin_order(streams: list[list]) -> list:
    """Interleave per-actor streams the way the round-robin scheduler serves them."""
    out, idx = [], [0] * len(streams)
    active = [i for i, s in enumerate(streams) if s]
    while active:
        nxt = []
        for i in active:
            out.append(streams[i][idx[i]])
            idx[i] += 1
            if idx[i] < len(streams[i]):
                nxt.append(i)
        active = nxt
    return out


__all__ = ["MemoryService", "SchedulingMode", "spawn_actors", "RunStats", "ActorFailure",
           "round_robin_order", "NonFiniteEmbedding"]
