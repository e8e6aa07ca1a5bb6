"""Runtime-verification monitors and the three ways of hosting them.

A monitor spec is a step function over the events of one process.  The same
specs run inline (inside the SuS process), in a central tracer that slices
the global stream by pid, and in RIARC tracers.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

from .protocol import Label, TraceEvent
from .runtime import Observer, Pid

log = logging.getLogger(__name__)

ANALYSIS_COST = 5e-6


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    INCONCLUSIVE = "inconclusive"

    @property
    def terminal(self) -> bool:
        return self is not Verdict.INCONCLUSIVE


class MonitorSpec:
    """Base spec: ``initial`` builds a state, ``step`` reduces it.

    ``step`` returns the next state or a :class:`Verdict`; raising counts as
    a rejection.  ``finish`` is called at the end of the partition (the
    process's exit, or the hosting tracer's termination).
    """
    name = "spec"

    def initial(self, owner: Pid):
        return None

    def step(self, state, e: TraceEvent):
        return state

    def finish(self, state) -> Verdict:
        return Verdict.INCONCLUSIVE


def analyse_evt(spec: MonitorSpec, state, e: TraceEvent):
    if isinstance(state, Verdict):
        return state
    try:
        nxt = spec.step(state, e)
    except Exception as exc:  # a malformed event is a rejection
        log.debug("monitor %s rejected %s: %s", spec.name, e, exc)
        return Verdict.REJECT
    if e.label is Label.EXIT and not isinstance(nxt, Verdict):
        nxt = spec.finish(nxt)
    return nxt


class ExpectedTrace(MonitorSpec):
    """Accepts iff the process exhibits exactly its recorded local trace."""
    name = "expect"

    def __init__(self, expected: dict[Pid, list[TraceEvent]]):
        self.expected = expected

    def initial(self, owner):
        return (owner, 0)

    def step(self, state, e):
        owner, i = state
        want = self.expected.get(owner, [])
        if i >= len(want) or want[i] != e:
            return Verdict.REJECT
        return (owner, i + 1)

    def finish(self, state):
        owner, i = state
        return Verdict.ACCEPT if i == len(self.expected.get(owner, [])) else Verdict.REJECT


class Recorder(MonitorSpec):
    """Never judges; keeps what it saw."""
    name = "record"

    def initial(self, owner):
        return ()

    def step(self, state, e):
        return state + (e,)

    def finish(self, state):
        return Verdict.ACCEPT


class WorkerSound(MonitorSpec):
    """Worker side of the work protocol, complete and in ReqNum order."""
    name = "worker"

    def initial(self, owner):
        # next chunk expected, acks sent, total, term seen, end sent
        return (1, 0, None, False, False)

    def step(self, state, e):
        nxt, acks, total, term, end = state
        m = e.payload
        if e.label is Label.EXIT:
            return state
        tag = m.tag
        if e.label is Label.RECV and tag == "chunk" and not term:
            if m.req_num != nxt or (total is not None and m.num_reqs != total):
                return Verdict.REJECT
            return (nxt + 1, acks, m.num_reqs, term, end)
        if e.label is Label.SEND and tag == "ack":
            if m.req_num != acks + 1 or m.req_num >= nxt:
                return Verdict.REJECT
            return (nxt, acks + 1, total, term, end)
        if e.label is Label.RECV and tag == "term":
            if total is None or nxt != total + 1:
                return Verdict.REJECT
            return (nxt, acks, total, True, end)
        if e.label is Label.SEND and tag == "end" and term and not end:
            return (nxt, acks, total, term, True)
        return Verdict.REJECT

    def finish(self, state):
        nxt, acks, total, term, end = state
        ok = end and total is not None and acks == total and nxt == total + 1
        return Verdict.ACCEPT if ok else Verdict.REJECT


class MasterSound(MonitorSpec):
    """Master side: per-worker chunk and ack order, then term and end.

    The state is updated in place; one master can track thousands of
    workers and copying it per event would be quadratic.
    """
    name = "master"

    def initial(self, owner):
        return {"spawned": 0, "ended": 0, "w": {}}

    def step(self, st, e):
        if e.label is Label.SPAWN:
            st["spawned"] += 1
            return st
        if e.label is Label.EXIT:
            return st
        m = e.payload
        ws = st["w"]
        if e.label is Label.SEND and m.tag == "chunk":
            w = ws.setdefault(m.id, [1, 1, m.num_reqs, False, False])
            if m.req_num != w[0] or w[3]:
                return Verdict.REJECT
            w[0] += 1
            return st
        w = ws.get(m.id)
        if w is None:
            return Verdict.REJECT
        if e.label is Label.RECV and m.tag == "ack":
            if m.req_num != w[1] or m.req_num >= w[0]:
                return Verdict.REJECT
            w[1] += 1
            return st
        if e.label is Label.SEND and m.tag == "term":
            if w[1] != w[2] + 1 or w[3]:
                return Verdict.REJECT
            w[3] = True
            return st
        if e.label is Label.RECV and m.tag == "end":
            if not w[3] or w[4]:
                return Verdict.REJECT
            w[4] = True
            st["ended"] += 1
            return st
        return Verdict.REJECT

    def finish(self, st):
        ok = st["ended"] == st["spawned"] == len(st["w"])
        return Verdict.ACCEPT if ok else Verdict.REJECT


class SliceMap:
    """Per-pid monitor states, created on a pid's first event.

    ``spec_for`` maps a process signature to the spec that checks it, or
    ``None`` when processes of that signature are not monitored here.
    Signatures are learnt from spawn events and from :meth:`register`.
    """

    def __init__(self, spec_for: Callable[[str | None], MonitorSpec | None], name: str = ""):
        self.spec_for = spec_for
        self.name = name
        self.sigs: dict[Pid, str] = {}
        self.states: dict[Pid, object] = {}
        self.specs: dict[Pid, MonitorSpec] = {}
        self.verdicts: dict[Pid, Verdict] = {}
        self.ignored: set[Pid] = set()

    def register(self, pid: Pid, sig: str | None) -> None:
        if sig is not None:
            self.sigs.setdefault(pid, sig)

    def analyse(self, e: TraceEvent) -> None:
        if e.label is Label.SPAWN:
            self.sigs.setdefault(e.j_s, e.sig)
        pid = e.i_s
        spec = self.specs.get(pid)
        if spec is None:
            if pid in self.verdicts or pid in self.ignored:
                return
            spec = self.spec_for(self.sigs.get(pid))
            if spec is None:
                self.ignored.add(pid)
                return
            self.specs[pid] = spec
            self.states[pid] = spec.initial(pid)
        st = analyse_evt(spec, self.states[pid], e)
        if isinstance(st, Verdict) and st.terminal:
            self.verdicts[pid] = st
            del self.states[pid], self.specs[pid]
        else:
            self.states[pid] = st

    def finish(self) -> dict[Pid, Verdict]:
        for pid in sorted(self.states):
            st = self.states[pid]
            v = st if isinstance(st, Verdict) else self.specs[pid].finish(st)
            self.verdicts[pid] = v
        self.states.clear()
        self.specs.clear()
        return dict(self.verdicts)

    def __len__(self):
        return len(self.states)


def central_slice(slices: SliceMap, e: TraceEvent) -> SliceMap:
    slices.analyse(e)
    return slices


@dataclass
class MonitorRegistry:
    """Monitor factories keyed by name; each call makes a fresh host."""
    factories: dict[str, Callable[[], SliceMap]] = field(default_factory=dict)

    def register(self, name: str, factory: Callable[[], SliceMap]) -> None:
        self.factories[name] = factory

    def create(self, name: str) -> SliceMap:
        try:
            return self.factories[name]()
        except KeyError:
            raise KeyError(f"no monitor named {name!r}") from None

    def __contains__(self, name):
        return name in self.factories


def by_signature(specs: dict[str, MonitorSpec], name: str = "") -> Callable[[], SliceMap]:
    """Factory for hosts that pick a spec by process signature."""
    return lambda: SliceMap(specs.get, name)


class InlineMonitoring(Observer):
    """Analyses every SuS event synchronously in the process that emits it,
    charging the analysis cost to that process."""

    def __init__(self, runtime, slices: SliceMap, cost: float = ANALYSIS_COST):
        self.runtime = runtime
        self.slices = slices
        self.cost = cost
        self.analysed = 0
        runtime.observer = self

    def launch(self, fn, *args, sig: str) -> Pid:
        pid = self.runtime.spawn(fn, *args, sig=sig)
        self.slices.register(pid, sig)
        return pid

    def _hook(self, e: TraceEvent) -> None:
        self.analysed += 1
        self.runtime.charge(self.cost)
        self.slices.analyse(e)

    def on_spawn(self, parent, child, sig):
        self._hook(TraceEvent(Label.SPAWN, parent, child, sig or "-anon"))

    def on_send(self, sender, to, msg):
        self._hook(TraceEvent(Label.SEND, sender, to, payload=msg))

    def on_receive(self, pid, msg):
        self._hook(TraceEvent(Label.RECV, pid, payload=msg))

    def on_exit(self, pid):
        self._hook(TraceEvent(Label.EXIT, pid))

    def verdicts(self) -> dict[Pid, Verdict]:
        return self.slices.finish()
