"""The RIARC tracer choreography.

Each tracer owns three maps: Π routes SuS pids to a neighbouring tracer,
Λ (shared read-only) says which spawned signatures get a tracer of their
own, and Γ lists the SuS pids this tracer analyses, marked ● until the
dispatch tracer acknowledges the detach and ○ afterwards.  A tracer in
priority mode (●) only dequeues routed packets; once every Γ entry is ○ it
switches to direct mode (○) and takes whatever is next in its mailbox.

The ``fail``/``assert`` points of the algorithms abort the tracer with a
violation record instead of raising, so one run can report several.
Everything a tracer does is appended to a :class:`History` for the checker.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from . import history as H
from .monitors import ANALYSIS_COST, MonitorRegistry, SliceMap, Verdict
from .protocol import DetachRequest, Label, RoutingPacket, TraceEvent, is_rtd
from .runtime import TRACER, Pid

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    DIRECT = "○"
    PRIORITY = "●"


# fault-injection switches and the invariant each one should trip
MUTANTS = {
    "terminate-nonempty-pi": "I1",
    "analyse-routed-direct": "I19",
    "dispatch-in-priority": "I21",
    "skip-gamma-insert": "I4",
    "skip-pi-removal-dtc": "I11",
    "forward-without-hop": "I13",
    "double-trace": "I2",
    "missing-detach": "I16",
}


@dataclass
class Env:
    """Run-wide plumbing shared by every tracer of one set-up."""
    backend: object
    registry: MonitorRegistry
    history: H.History | None = None
    analysis_cost: float = ANALYSIS_COST
    mutations: frozenset = frozenset()
    tracers: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def runtime(self):
        return self.backend.runtime

    def live(self) -> list["Tracer"]:
        return [t for pid, t in sorted(self.tracers.items()) if not t.done]

    def finalize(self) -> None:
        """Close the monitors of tracers still running at quiescence."""
        for t in self.live():
            t.finish_monitor(partial=True)

    def verdicts(self) -> list[tuple[Pid, Verdict]]:
        return sorted((o, v) for o, v, _t, _p in self.outcomes)


class Tracer:
    def __init__(self, env: Env, lam: dict, monitor: str | None, mode: Mode,
                 traced: Pid, sig: str | None, dispatcher: Pid | None = None):
        self.env = env
        self.lam = dict(lam)  # copy of the instrumentation map
        self.monitor_name = monitor
        self.mode = mode
        self.root = traced
        self.root_sig = sig
        self.dispatcher = dispatcher
        self.pi: dict[Pid, Pid] = {}
        self.gamma: dict[Pid, Mode] = {}
        self.host: SliceMap | None = None
        self.done = False
        self.aborted = False
        self.pid: Pid | None = None
        self.ctx = None
        self._hist = env.history
        self._mut = env.mutations

    # bookkeeping -------------------------------------------------------
    def _rec(self, kind, **data):
        if self._hist is not None:
            self._hist.append(self.pid, kind, **data)

    def _fail(self, inv: str, why: str, msg) -> None:
        self._rec(H.VIOLATION, id=inv, why=why, msg=msg)
        self.env.violations.append((inv, self.pid, why, msg))
        log.info("%s aborts: %s %s (%s)", self.pid, inv, why, msg)
        self.done = self.aborted = True

    def _gamma_add(self, pid, mark):
        self._rec(H.GAMMA_ADD, pid=pid, mark=mark)
        self.gamma[pid] = mark

    def _gamma_remove(self, pid):
        self._rec(H.GAMMA_REMOVE, pid=pid)
        self.gamma.pop(pid, None)

    def _pi_add(self, pid, hop):
        self._rec(H.PI_ADD, pid=pid, hop=hop)
        self.pi[pid] = hop

    def _pi_remove(self, pid):
        self._rec(H.PI_REMOVE, pid=pid)
        self.pi.pop(pid, None)

    def _set_mode(self, mode):
        self._rec(H.MODE, mode=mode)
        self.mode = mode

    # process body ------------------------------------------------------
    def run(self, ctx):
        self.ctx = ctx
        self.pid = ctx.self
        self.env.tracers[self.pid] = self
        if self.monitor_name is not None:
            self.host = self.env.registry.create(self.monitor_name)
            self.host.register(self.root, self.root_sig)
        backend = self.env.backend
        if self.dispatcher is None:
            # ROOT: trace the paused root, let it go, start in direct mode
            backend.trace(self.root, self.pid)
            backend.resume(self.root)
            self.gamma[self.root] = Mode.DIRECT
            self._rec(H.INIT, mode=self.mode, gamma=dict(self.gamma),
                      monitor=self.monitor_name)
        else:
            # TRACER: own the new process, then ask its dispatcher to let go
            self.gamma[self.root] = Mode.PRIORITY
            self._rec(H.INIT, mode=self.mode, gamma=dict(self.gamma),
                      monitor=self.monitor_name, dispatcher=self.dispatcher)
            self._detach(self.root, self.dispatcher)
        while not self.done:
            if self.mode is Mode.DIRECT:
                msg = yield ctx.receive()
            else:
                msg = yield ctx.receive(is_rtd)
            self._rec(H.RECV, msg=msg, mode=self.mode)
            if self.mode is Mode.DIRECT:
                self._loop_direct(msg)
            else:
                self._loop_priority(msg)

    # direct mode ------------------------------------------------------
    def _loop_direct(self, msg):
        if isinstance(msg, TraceEvent):
            self._handle_evt_direct(msg)
        elif isinstance(msg, DetachRequest):
            self._dispatch_dtc(msg)
        elif isinstance(msg, RoutingPacket):
            self._forward_rtd_direct(msg)
        else:
            self._fail("I18", "unknown message", msg)

    def _handle_evt_direct(self, e: TraceEvent):
        hop = self.pi.get(e.i_s)
        if hop is not None:
            self._dispatch(e, hop)
            if e.label is Label.SPAWN:
                self._pi_add(e.j_s, hop)
            return
        self._analyse(e)
        if e.label is Label.SPAWN:
            self._instrument_direct(e)
        elif e.label is Label.EXIT:
            self._gamma_remove(e.i_s)
            self._try_gc()

    def _dispatch_dtc(self, d: DetachRequest):
        hop = self.pi.get(d.i_s)
        if hop is None:
            return self._fail("I17", "dtc next-hop must be defined", d)
        if "forward-without-hop" in self._mut:
            self._pi_remove(d.i_s)
            self._dispatch(d, hop)
            return self._try_gc()
        self._dispatch(d, hop)
        if "skip-pi-removal-dtc" not in self._mut:
            self._pi_remove(d.i_s)
        self._try_gc()

    def _forward_rtd_direct(self, r: RoutingPacket):
        m = r.inner
        if isinstance(m, DetachRequest):
            hop = self.pi.get(m.i_s)
            if hop is None:
                return self._fail("I20", "dtc next-hop must be defined", r)
            self._forward(r, hop)
            self._pi_remove(m.i_s)
            return self._try_gc()
        hop = self.pi.get(m.i_s)
        if hop is None:
            return self._fail("I19", "evt next-hop must be defined", r)
        if "analyse-routed-direct" in self._mut:
            return self._analyse(m)
        self._forward(r, hop)
        if m.label is Label.SPAWN:
            self._pi_add(m.j_s, hop)

    # priority mode ----------------------------------------------------
    def _loop_priority(self, r: RoutingPacket):
        if isinstance(r.inner, TraceEvent):
            self._handle_evt_priority(r)
        else:
            self._handle_dtc(r)

    def _handle_evt_priority(self, r: RoutingPacket):
        e = r.inner
        hop = self.pi.get(e.i_s)
        if hop is not None:
            if "dispatch-in-priority" in self._mut:
                self._dispatch(e, hop)
            else:
                self._forward(r, hop)
            if e.label is Label.SPAWN:
                self._pi_add(e.j_s, hop)
            return
        self._analyse(e)
        if e.label is Label.SPAWN:
            self._instrument_priority(e, r.i_t)
        elif e.label is Label.EXIT:
            self._gamma_remove(e.i_s)
            self._try_gc()

    def _handle_dtc(self, r: RoutingPacket):
        d = r.inner
        hop = self.pi.get(d.i_s)
        if hop is None:
            if d.i_t != self.pid:
                return self._fail("I22", "unexpected dtc ack", r)
            if d.i_s in self.gamma:
                self._rec(H.GAMMA_MARK, pid=d.i_s, mark=Mode.DIRECT)
                self.gamma[d.i_s] = Mode.DIRECT
            # the process may have exited (and left Γ) before the ack arrived
            if Mode.PRIORITY not in self.gamma.values():
                self._set_mode(Mode.DIRECT)
            return
        if d.i_t == self.pid:
            return self._fail("I22", f"dtc meant for {d.i_t}", r)
        self._forward(r, hop)
        # stale next-hop on the path to the detaching tracer
        self._pi_remove(d.i_s)
        self._try_gc()

    # instrumentation -------------------------------------------------
    def _instrument_direct(self, e: TraceEvent):
        name = self.lam.get(e.sig)
        if name is not None:
            j_t = self._spawn_tracer(e, name, self.pid)
            self._pi_add(e.j_s, j_t)
        elif "skip-gamma-insert" not in self._mut:
            self._gamma_add(e.j_s, Mode.DIRECT)
            if "double-trace" in self._mut:
                self._gamma_add(e.j_s, Mode.DIRECT)

    def _instrument_priority(self, e: TraceEvent, dispatcher: Pid):
        name = self.lam.get(e.sig)
        if name is not None:
            j_t = self._spawn_tracer(e, name, dispatcher)
            self._pi_add(e.j_s, j_t)
        else:
            if "missing-detach" not in self._mut:
                self._detach(e.j_s, dispatcher)
            self._gamma_add(e.j_s, Mode.PRIORITY)

    def _spawn_tracer(self, e: TraceEvent, name: str, dispatcher: Pid) -> Pid:
        child = Tracer(self.env, self.lam, name, Mode.PRIORITY, e.j_s, e.sig, dispatcher)
        j_t = self.ctx.spawn(child.run, kind=TRACER)
        self._rec(H.SPAWN_TRACER, child=j_t, pid=e.j_s, dispatcher=dispatcher)
        return j_t

    # routing primitives -----------------------------------------------
    def _dispatch(self, m, to: Pid):
        self._rec(H.DISPATCH, msg=m, to=to)
        self.ctx.send(to, RoutingPacket(self.pid, m))

    def _forward(self, r: RoutingPacket, to: Pid):
        self._rec(H.FORWARD, msg=r, to=to)
        self.ctx.send(to, r)

    def _detach(self, i_s: Pid, dispatcher: Pid):
        self.env.backend.preempt(i_s, self.pid)
        self._rec(H.DETACH, pid=i_s, to=dispatcher)
        self.ctx.send(dispatcher, DetachRequest(self.pid, i_s))

    def _analyse(self, e: TraceEvent):
        self._rec(H.ANALYSE, event=e)
        self.ctx.charge(self.env.analysis_cost)
        if self.host is not None:
            self.host.analyse(e)

    def _try_gc(self):
        if self.done:
            return
        if not self.gamma and (not self.pi or "terminate-nonempty-pi" in self._mut):
            self.finish_monitor()
            self._rec(H.TERMINATE, gamma=dict(self.gamma), pi=dict(self.pi))
            self.done = True

    def finish_monitor(self, partial: bool = False):
        if self.host is None:
            return
        verdicts = self.host.finish()
        for owner, v in sorted(verdicts.items()):
            self.env.outcomes.append((owner, v, self.pid, partial))
        self._rec(H.VERDICT, verdicts=verdicts, partial=partial)
        self.host = None


def start(backend, sig: str, lam: dict, registry: MonitorRegistry, fn=None, args=(),
          history: H.History | None = None, analysis_cost: float = ANALYSIS_COST,
          mutations=()) -> tuple[Pid, Pid, Env]:
    """Launch the SuS root paused and a root tracer that releases it."""
    unknown = set(mutations) - set(MUTANTS)
    if unknown:
        raise ValueError(f"unknown mutants: {sorted(unknown)}")
    env = Env(backend, registry, history, analysis_cost, frozenset(mutations))
    root = backend.launch(fn, *args, sig=sig)
    t = Tracer(env, lam, lam.get(sig), Mode.DIRECT, root, sig)
    tpid = backend.runtime.spawn(t.run, kind=TRACER)
    return root, tpid, env
