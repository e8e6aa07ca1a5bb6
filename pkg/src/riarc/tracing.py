"""TRACE / CLEAR / PREEMPT over two backends.

:class:`OnlineTracing` hooks the runtime's observation stream and posts
events to the owning tracer at the moment the SuS acts.  :class:`OfflineTracing`
replays a recorded trace through a :class:`ReorderBuffer` that restores the
parent-spawn-before-child ordering a recording may lack.

Both enforce tracing inheritance (a traced process's children get the same
tracer) and single-process tracing (one tracer per process at a time).
Delivery is synchronous with the action that produces the event, so every
event emitted before a ``clear`` already sits in the old tracer's mailbox
when ``clear`` returns.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from . import protocol as P
from .protocol import Label, TraceEvent
from .runtime import SUS, SYS, Observer, Pid

log = logging.getLogger(__name__)


class TracingError(RuntimeError):
    pass


class _Registry:
    """The serialised authority mapping each SuS pid to its tracer."""

    def __init__(self, runtime):
        self.runtime = runtime
        self.owner: dict[Pid, Pid] = {}
        self.dead: set[Pid] = set()
        self.emitted = 0
        self.undelivered = 0

    def tracer_of(self, i_s: Pid) -> Pid | None:
        return self.owner.get(i_s)

    def is_dead(self, i_s: Pid) -> bool:
        return i_s in self.dead

    def trace(self, i_s: Pid, i_t: Pid) -> None:
        if self.is_dead(i_s):
            return
        cur = self.owner.get(i_s)
        if cur is not None:
            raise TracingError(f"{i_s} is already traced by {cur}")
        self.owner[i_s] = i_t

    def clear(self, i_s: Pid, i_t: Pid) -> None:
        if self.is_dead(i_s):
            return
        if self.owner.get(i_s) != i_t:
            raise TracingError(f"{i_t} does not trace {i_s}")
        # events are handed over synchronously, so nothing is in transit
        del self.owner[i_s]

    def preempt(self, i_s: Pid, i_t: Pid) -> None:
        if self.is_dead(i_s):
            return
        cur = self.owner.get(i_s)
        if cur == i_t:
            return
        if cur is not None:
            self.clear(i_s, cur)
        self.trace(i_s, i_t)

    def _emit(self, e: TraceEvent) -> None:
        t = self.owner.get(e.i_s)
        if e.label is Label.SPAWN and t is not None:
            self.owner[e.j_s] = t
        if e.label is Label.EXIT:
            self.owner.pop(e.i_s, None)
            self.dead.add(e.i_s)
        if t is None:
            self.undelivered += 1
            return
        self.emitted += 1
        self.runtime.post(t, e)


class OnlineTracing(_Registry, Observer):
    def __init__(self, runtime):
        super().__init__(runtime)
        runtime.observer = self

    def launch(self, fn, *args, sig: str) -> Pid:
        return self.runtime.spawn(fn, *args, sig=sig, paused=True)

    def resume(self, pid: Pid) -> None:
        self.runtime.resume(pid)

    def is_dead(self, i_s: Pid) -> bool:
        return i_s in self.dead or not self.runtime.alive(i_s)

    def on_spawn(self, parent, child, sig):
        self._emit(P.spawn(parent, child, sig or "-anon"))

    def on_send(self, sender, to, msg):
        if to.kind == SUS:
            self._emit(P.send(sender, to, msg))

    def on_receive(self, pid, msg):
        self._emit(P.recv(pid, msg))

    def on_exit(self, pid):
        self._emit(P.exit_(pid))


class ReorderBuffer:
    """Holds events until their originator is traced.

    Releasing a spawn makes the child traced, which triggers a rescan from
    the head of the buffer; scanning stops at a fixpoint.  Events whose
    originator never becomes traced stay pending.
    """

    def __init__(self, traced: Iterable[Pid] = ()):
        self.traced: set[Pid] = set(traced)
        self.pending: list[TraceEvent] = []

    def push(self, e: TraceEvent) -> list[TraceEvent]:
        self.pending.append(e)
        return self._scan()

    def add_traced(self, pid: Pid) -> list[TraceEvent]:
        if pid in self.traced:
            return []
        self.traced.add(pid)
        return self._scan()

    def _scan(self) -> list[TraceEvent]:
        out = []
        buf = self.pending
        i = 0
        while i < len(buf):
            e = buf[i]
            if e.i_s not in self.traced:
                i += 1
                continue
            del buf[i]
            out.append(e)
            if e.label is Label.SPAWN and e.j_s not in self.traced:
                self.traced.add(e.j_s)
                i = 0
        return out


def reorder(events: Iterable[TraceEvent], traced: Iterable[Pid]) -> tuple[list, list]:
    """Delivered order and leftover orphans for a single tracer."""
    buf = ReorderBuffer(traced)
    out = []
    for e in events:
        out.extend(buf.push(e))
    return out, list(buf.pending)


@dataclass
class ReplayResult:
    delivered: dict[str, list[TraceEvent]] = field(default_factory=dict)
    orphans: list[TraceEvent] = field(default_factory=list)


def replay(events: Iterable[TraceEvent], registrations: dict[str, Iterable[Pid]]) -> ReplayResult:
    """Deliver a recording to passive tracers registered on root processes."""
    owner: dict[Pid, str] = {}
    for name, pids in registrations.items():
        for pid in pids:
            if pid in owner:
                raise TracingError(f"{pid} registered twice")
            owner[pid] = name
    res = ReplayResult({name: [] for name in registrations})
    buf = ReorderBuffer(owner)
    for e in events:
        for r in buf.push(e):
            t = owner.get(r.i_s)
            if r.label is Label.SPAWN:
                owner.setdefault(r.j_s, t)
            res.delivered[t].append(r)
    res.orphans = list(buf.pending)
    return res


def infer_root(events: list[TraceEvent]) -> Pid | None:
    children = {e.j_s for e in events if e.label is Label.SPAWN}
    for e in events:
        if e.i_s not in children:
            return e.i_s
    return None


class OfflineTracing(_Registry):
    """Replays recorded events into the tracers that own them.

    The replay runs as an infrastructure process that reads one recorded
    event per scheduling step; it starts paused and is released by the
    root tracer's ``resume``, exactly like a live root process.
    """

    def __init__(self, runtime, events: Iterable[TraceEvent], root: Pid | None = None):
        super().__init__(runtime)
        self.events = list(events)
        self.root = root if root is not None else infer_root(self.events)
        self.buffer = ReorderBuffer()
        self.orphans: list[TraceEvent] = []
        self.finished = False
        self._engine: Pid | None = None

    def launch(self, fn=None, *args, sig: str) -> Pid:
        if self.root is None:
            raise TracingError("recording has no root process")
        self._engine = self.runtime.spawn(self._run, kind=SYS, paused=True)
        return self.root

    def resume(self, pid: Pid) -> None:
        if pid == self.root and self._engine is not None:
            self.runtime.resume(self._engine)

    def trace(self, i_s: Pid, i_t: Pid) -> None:
        super().trace(i_s, i_t)
        for e in self.buffer.add_traced(i_s):
            self._emit(e)

    def _run(self, ctx):
        for e in self.events:
            for r in self.buffer.push(e):
                self._emit(r)
            yield
        self.orphans = list(self.buffer.pending)
        self.finished = True
