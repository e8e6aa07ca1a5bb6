"""Soundness oracle, interleaving generator, invariant checker and the
systematic tester that replays every interleaving under every
instrumentation configuration."""
from __future__ import annotations

import enum
import json
import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import permutations as _itperms
from pathlib import Path
from typing import Iterable, Sequence

from . import history as H
from .history import History, render_value
from .monitors import ExpectedTrace, MonitorRegistry, Recorder, SliceMap, Verdict
from .protocol import (DetachRequest, Label, RoutingPacket, TraceEvent, decode_trace,
                       encode_event, encode_trace)
from .runtime import Pid, Runtime
from .systems import System
from .tracer import MUTANTS, Mode, start
from .tracing import OfflineTracing

log = logging.getLogger(__name__)

DEFAULT_CAP = 10_000


# soundness -------------------------------------------------------------

@dataclass(frozen=True)
class LocalExecution:
    pid: Pid
    events: tuple[TraceEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        for e in self.events:
            if e.i_s != self.pid:
                raise ValueError(f"{e} does not belong to {self.pid}")
        exits = [i for i, e in enumerate(self.events) if e.label is Label.EXIT]
        if len(exits) > 1 or (exits and exits[0] != len(self.events) - 1):
            raise ValueError(f"{self.pid}: an exit must be unique and last")


def local_executions(locals_: dict[Pid, list[TraceEvent]]) -> list[LocalExecution]:
    return [LocalExecution(pid, tuple(evs)) for pid, evs in sorted(locals_.items())]


class Soundness(enum.Enum):
    SOUND = "sound"
    INCOMPLETE = "incomplete"
    INCONSISTENT = "inconsistent"


def is_sound(trace: Iterable[TraceEvent], ground: LocalExecution) -> Soundness:
    sub = [e for e in trace if e.i_s == ground.pid]
    want = list(ground.events)
    if sub == want:
        return Soundness.SOUND
    have, need = Counter(sub), Counter(want)
    if have - need:
        return Soundness.INCONSISTENT  # spurious events
    if need - have:
        return Soundness.INCOMPLETE
    return Soundness.INCONSISTENT


def first_divergence(trace: Sequence[TraceEvent], ground: LocalExecution) -> int:
    """Position within the process projection where it departs from ground."""
    sub = [e for e in trace if e.i_s == ground.pid]
    for i, (a, b) in enumerate(zip(sub, ground.events)):
        if a != b:
            return i
    return min(len(sub), len(ground.events))


# causal constraints and linear extensions -------------------------------

class CyclicConstraints(ValueError):
    pass


class AmbiguousMatch(ValueError):
    pass


class CapExceeded(RuntimeError):
    def __init__(self, cap: int):
        super().__init__(f"more than {cap} interleavings")
        self.cap = cap


@dataclass
class CausalConstraints:
    nodes: list[TraceEvent]
    preds: list[int]                 # bitmask of predecessors per node
    edges: set = field(default_factory=set)

    def __len__(self):
        return len(self.nodes)


def constraints(locals_: Iterable[LocalExecution]) -> CausalConstraints:
    """Per-process order, parent spawn before every child event, and each
    send before its matching receive."""
    locs = sorted(locals_, key=lambda l: l.pid)
    nodes, index = [], {}
    for l in locs:
        for i, e in enumerate(l.events):
            index[(l.pid, i)] = len(nodes)
            nodes.append(e)
    edges = set()
    by_pid = {l.pid: l for l in locs}
    for l in locs:
        for i in range(1, len(l.events)):
            edges.add((index[(l.pid, i - 1)], index[(l.pid, i)]))
        for i, e in enumerate(l.events):
            if e.label is Label.SPAWN and e.j_s in by_pid and by_pid[e.j_s].events:
                edges.add((index[(l.pid, i)], index[(e.j_s, 0)]))
    for s, r in _match_messages(locs, index):
        edges.add((s, r))
    preds = [0] * len(nodes)
    for a, b in edges:
        preds[b] |= 1 << a
    return CausalConstraints(nodes, preds, edges)


def _match_messages(locs, index):
    sends: dict[Pid, list] = {}
    recvs: dict[Pid, list] = {}
    for l in locs:
        for i, e in enumerate(l.events):
            if e.label is Label.SEND:
                sends.setdefault(e.j_s, []).append((l.pid, i, e))
            elif e.label is Label.RECV:
                recvs.setdefault(l.pid, []).append((l.pid, i, e))
    pairs = []
    for rpid, rs in recvs.items():
        ss = sends.get(rpid, [])
        if all(e.payload is not None for *_, e in ss + rs):
            keyed = {e.payload: (p, i) for p, i, e in ss}
            for p, i, e in rs:
                if e.payload not in keyed:
                    raise AmbiguousMatch(f"no send for {e} with payload {e.payload!r}")
                pairs.append((index[keyed[e.payload]], index[(p, i)]))
            continue
        if len({p for p, _, _ in ss}) > 1:
            raise AmbiguousMatch(f"{rpid} receives from several senders; tag payloads")
        if len(rs) > len(ss):
            raise AmbiguousMatch(f"{rpid} receives more messages than are sent to it")
        for (sp, si, _), (rp, ri, _) in zip(ss, rs):
            pairs.append((index[(sp, si)], index[(rp, ri)]))
    return pairs


def _check_acyclic(cc: CausalConstraints) -> None:
    done, n = 0, len(cc)
    while done != (1 << n) - 1:
        ready = [i for i in range(n) if not done >> i & 1 and cc.preds[i] & ~done == 0]
        if not ready:
            raise CyclicConstraints("causal constraints contain a cycle")
        for i in ready:
            done |= 1 << i


def permutations(locals_: Iterable[LocalExecution], cap: int = DEFAULT_CAP,
                 force: bool = False) -> list[tuple[TraceEvent, ...]]:
    """Every linear extension, in lexicographic order of (pid, position)."""
    cc = constraints(locals_)
    _check_acyclic(cc)
    n = len(cc)
    full = (1 << n) - 1
    out: list[tuple] = []
    seq: list[int] = []

    def go(done: int):
        if done == full:
            if len(out) >= cap and not force:
                raise CapExceeded(cap)
            out.append(tuple(cc.nodes[i] for i in seq))
            return
        for i in range(n):
            if not done >> i & 1 and cc.preds[i] & ~done == 0:
                seq.append(i)
                go(done | 1 << i)
                seq.pop()

    go(0)
    return out


def count_linear_extensions(locals_: Iterable[LocalExecution]) -> int:
    """Independent counter: dynamic programming over downsets."""
    cc = constraints(locals_)
    n = len(cc)
    ways = {0: 1}
    for _ in range(n):
        nxt: dict[int, int] = {}
        for done, w in ways.items():
            for i in range(n):
                if not done >> i & 1 and cc.preds[i] & ~done == 0:
                    k = done | 1 << i
                    nxt[k] = nxt.get(k, 0) + w
        ways = nxt
    return sum(ways.values()) if n else 1


def brute_force_extensions(locals_: Iterable[LocalExecution]) -> set[tuple]:
    """All orderings of the events that respect every constraint edge."""
    cc = constraints(locals_)
    out = set()
    for perm in _itperms(range(len(cc))):
        pos = {v: i for i, v in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in cc.edges):
            out.add(tuple(cc.nodes[i] for i in perm))
    return out


# invariants ------------------------------------------------------------

INVARIANTS = tuple(f"I{i}" for i in range(1, 23))


@dataclass(frozen=True)
class InvariantReport:
    id: str
    tracer: str
    message: str
    detail: str
    seq: int
    interleaving: str | None = None


def _key(msg) -> Pid:
    return msg.inner.i_s if isinstance(msg, RoutingPacket) else msg.i_s


class _TracerAudit:
    def __init__(self, tracer: Pid, out: list):
        self.t = tracer
        self.out = out
        self.gamma: dict = {}
        self.pi: dict = {}
        self.mode = None
        self.detaches = 0
        self.prio_adds = 0
        self.terminated = False
        self.seg = None

    def report(self, inv, rec, detail, msg=None):
        m = rec.data.get("msg", msg)
        self.out.append(InvariantReport(inv, str(self.t), json.dumps(render_value(m), sort_keys=True),
                                        detail, rec.seq))

    def feed(self, r: H.Record):
        k, d = r.kind, r.data
        if self.terminated and k not in (H.VERDICT,):
            self.report("I1", r, f"activity after termination: {k}")
        if k == H.INIT:
            self.mode = d["mode"]
            self.gamma = dict(d["gamma"])
            self.prio_adds += sum(1 for v in self.gamma.values() if v is Mode.PRIORITY)
            return
        if k == H.RECV:
            self.close()
            self.seg = (r, [])
            if d["mode"] is Mode.PRIORITY and not isinstance(d["msg"], RoutingPacket):
                self.report("I14", r, "priority tracer dequeued a non-rtd message")
            return
        if self.seg is not None:
            self.seg[1].append(r)
        if k == H.GAMMA_ADD:
            if d["pid"] in self.gamma:
                self.report("I2", r, f"{d['pid']} already in Γ")
            self.gamma[d["pid"]] = d["mark"]
            if d["mark"] is Mode.PRIORITY:
                self.prio_adds += 1
        elif k == H.GAMMA_REMOVE:
            if d["pid"] not in self.gamma:
                self.report("I3", r, f"{d['pid']} not in Γ")
            self.gamma.pop(d["pid"], None)
        elif k == H.GAMMA_MARK:
            if d["pid"] in self.gamma:
                self.gamma[d["pid"]] = d["mark"]
        elif k == H.PI_ADD:
            if d["pid"] in self.pi:
                self.report("I6", r, f"next-hop for {d['pid']} already in Π")
            if d["hop"] == self.t:
                self.report("I6", r, "next-hop points at the tracer itself")
            self.pi[d["pid"]] = d["hop"]
        elif k == H.PI_REMOVE:
            if d["pid"] not in self.pi:
                self.report("I7", r, f"no next-hop for {d['pid']} in Π")
            self.pi.pop(d["pid"], None)
        elif k == H.DISPATCH:
            if self.pi.get(_key(d["msg"])) != d["to"]:
                self.report("I13", r, f"dispatch to {d['to']} without a matching route")
            if self.mode is Mode.PRIORITY:
                inv = "I22" if isinstance(d["msg"], DetachRequest) else "I21"
                self.report(inv, r, "dispatch in priority mode")
        elif k == H.FORWARD:
            if self.pi.get(_key(d["msg"])) != d["to"]:
                self.report("I13", r, f"forward to {d['to']} without a matching route")
        elif k == H.DETACH:
            self.detaches += 1
        elif k == H.MODE:
            if d["mode"] is Mode.DIRECT and Mode.PRIORITY in self.gamma.values():
                self.report("I15", r, "switched to direct mode with ●-marked processes")
            self.mode = d["mode"]
        elif k == H.TERMINATE:
            if self.gamma or self.pi:
                self.report("I1", r, f"terminated with |Γ|={len(self.gamma)} |Π|={len(self.pi)}")
            self.terminated = True
        elif k == H.VIOLATION:
            self.report(d["id"], r, d["why"])

    def close(self):
        if self.seg is not None:
            self._segment(*self.seg)
            self.seg = None

    def final(self):
        self.close()
        if self.detaches != self.prio_adds:
            self.out.append(InvariantReport(
                "I16", str(self.t), "null",
                f"{self.detaches} dtc issued for {self.prio_adds} ●-marked Γ entries", -1))

    def _segment(self, recv: H.Record, recs: list):
        msg, mode = recv.data["msg"], recv.data["mode"]
        if any(r.kind == H.VIOLATION for r in recs):
            return
        kinds = [r.kind for r in recs]
        analysed = H.ANALYSE in kinds
        dispatched = H.DISPATCH in kinds
        forwarded = H.FORWARD in kinds

        def has(kind, **match):
            return any(r.kind == kind and all(r.data.get(a) == b for a, b in match.items())
                       for r in recs)

        def spawned_ok(e, inv_fail):
            if has(H.GAMMA_ADD, pid=e.j_s):
                return
            if has(H.SPAWN_TRACER, pid=e.j_s):
                if not has(H.PI_ADD, pid=e.j_s):
                    self.report("I8", recv, "instrumented child without a next-hop")
                return
            self.report(inv_fail, recv, "spawn analysed but child not traced")

        if isinstance(msg, TraceEvent):
            if mode is not Mode.DIRECT:
                return  # already an I14 report
            if analysed == dispatched:
                self.report("I18", recv, "direct evt neither analysed nor dispatched exactly once")
            if analysed and msg.label is Label.SPAWN:
                spawned_ok(msg, "I4")
            if analysed and msg.label is Label.EXIT and not has(H.GAMMA_REMOVE, pid=msg.i_s):
                self.report("I5", recv, "exit analysed but Γ entry kept")
            if dispatched and msg.label is Label.SPAWN and not has(H.PI_ADD, pid=msg.j_s):
                self.report("I9", recv, "dispatched spawn without child next-hop")
        elif isinstance(msg, DetachRequest):
            if mode is not Mode.DIRECT:
                return
            if not dispatched:
                self.report("I17", recv, "dtc request not dispatched")
            if not has(H.PI_REMOVE, pid=msg.i_s):
                self.report("I11", recv, "dtc dispatched but next-hop kept")
        elif isinstance(msg, RoutingPacket):
            inner = msg.inner
            if isinstance(inner, TraceEvent):
                if mode is Mode.DIRECT:
                    if analysed or not forwarded:
                        self.report("I19", recv, "routed evt in direct mode not forwarded")
                else:
                    if dispatched or analysed == forwarded:
                        self.report("I21", recv, "routed evt in priority mode must be analysed or forwarded")
                    if analysed and inner.label is Label.SPAWN:
                        spawned_ok(inner, "I4")
                    if analysed and inner.label is Label.EXIT and not has(H.GAMMA_REMOVE, pid=inner.i_s):
                        self.report("I5", recv, "exit analysed but Γ entry kept")
                if forwarded and inner.label is Label.SPAWN and not has(H.PI_ADD, pid=inner.j_s):
                    self.report("I10", recv, "forwarded spawn without child next-hop")
            else:
                if mode is Mode.DIRECT and not forwarded:
                    self.report("I20", recv, "routed dtc in direct mode not forwarded")
                if mode is Mode.PRIORITY and dispatched:
                    self.report("I22", recv, "routed dtc dispatched in priority mode")
                if forwarded and not has(H.PI_REMOVE, pid=inner.i_s):
                    self.report("I12", recv, "forwarded dtc but next-hop kept")


def check_invariants(history: History, interleaving: str | None = None) -> list[InvariantReport]:
    out: list[InvariantReport] = []
    for t, recs in sorted(history.by_tracer().items()):
        audit = _TracerAudit(t, out)
        for r in recs:
            audit.feed(r)
        audit.final()
    if interleaving is not None:
        out = [InvariantReport(r.id, r.tracer, r.message, r.detail, r.seq, interleaving) for r in out]
    return sorted(out, key=lambda r: (r.seq, r.id, r.tracer))


# configurations -------------------------------------------------------

@dataclass(frozen=True)
class Configuration:
    """Groups of process names; each group is watched by one monitor."""
    name: str
    groups: tuple[frozenset, ...]

    def __post_init__(self):
        seen = set()
        for g in self.groups:
            if seen & g:
                raise ValueError(f"{self.name}: groups overlap")
            seen |= g

    @staticmethod
    def monitor(group) -> str:
        return "expect:" + ",".join(sorted(group))

    def label(self) -> str:
        return " ".join("{" + ",".join(sorted(g)) + "}" for g in self.groups)

    @classmethod
    def parse(cls, text: str, name: str | None = None) -> "Configuration":
        """``"P;Q,R"`` means groups {P} and {Q,R}."""
        groups = tuple(frozenset(x.strip() for x in g.split(",") if x.strip())
                       for g in text.split(";") if g.strip())
        return cls(name or text, groups)


def set_partitions(items: list) -> list[list[frozenset]]:
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for part in set_partitions(rest):
        out.append([frozenset([first])] + part)
        for i in range(len(part)):
            out.append(part[:i] + [part[i] | {first}] + part[i + 1:])
    return out


def fig2a_configurations() -> list[Configuration]:
    g = frozenset
    return [
        Configuration("C1", (g("P"), g("Q"), g("R"))),
        Configuration("C2", (g("PQ"), g("R"))),
        Configuration("C3", (g("PR"), g("Q"))),
        Configuration("C4", (g("P"), g("QR"))),
        Configuration("C5", (g("PQR"),)),
        Configuration("C6", (g("P"),)),
        Configuration("C7", (g("PQ"),)),
    ]


def full_decentralisation(system: System) -> Configuration:
    return Configuration("full", tuple(frozenset([n]) for n in sorted(system.names)))


def default_configurations(system: System) -> list[Configuration]:
    if system.name == "fig2a":
        return fig2a_configurations()
    return [full_decentralisation(system)]


MONITOR_KINDS = ("expect", "record")


def instrumentation(system: System, config: Configuration,
                    kinds: Sequence[str] = ()) -> tuple[dict, MonitorRegistry]:
    """Λ and monitor registry that realise a configuration.

    A process gets its own tracer when its parent is outside its group;
    the rest of the group is reached by tracing inheritance.  Processes in
    no group are inherited by their parent's tracer and left unmonitored.
    ``kinds`` picks the monitor per group (one entry applies to all);
    the default checks each process against its local trace.
    """
    expected = {pid: list(evs) for pid, evs in system.locals.items()}
    kinds = list(kinds) or ["expect"]
    if len(kinds) == 1:
        kinds = kinds * len(config.groups)
    if len(kinds) != len(config.groups):
        raise ValueError(f"{len(kinds)} monitors given for {len(config.groups)} groups")
    lam, reg = {}, MonitorRegistry()
    for g, kind in zip(config.groups, kinds):
        unknown = g - set(system.names)
        if unknown:
            raise ValueError(f"unknown processes {sorted(unknown)} in {config.name}")
        if kind not in MONITOR_KINDS:
            raise ValueError(f"unknown monitor {kind!r}; choose from {', '.join(MONITOR_KINDS)}")
        name = Configuration.monitor(g)
        sigs = {system.sigs[system.names[x]] for x in g}
        spec = ExpectedTrace(expected) if kind == "expect" else Recorder()
        reg.register(name, lambda sigs=sigs, spec=spec, name=name:
                     SliceMap(lambda s: spec if s in sigs else None, name))
        for x in g:
            pid = system.names[x]
            parent = system.parents.get(pid)
            if parent is None or system.name_of(parent) not in g:
                lam[system.sigs[pid]] = name
    return lam, reg


# systematic testing --------------------------------------------------

@dataclass
class CaseResult:
    system: str
    perm: int
    config: str
    seed: int
    mutations: tuple = ()
    unsound: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    redundant: list = field(default_factory=list)
    live: int = 0
    orphans: int = 0
    tracers: int = 0
    steps: int = 0

    @property
    def passed(self) -> bool:
        return not (self.unsound or self.violations or self.redundant or self.orphans)

    def record(self) -> dict:
        d = asdict(self)
        d["mutations"] = list(self.mutations)
        d["violations"] = sorted({v.id for v in self.violations}, key=lambda s: int(s[1:]))
        d["pass"] = self.passed
        return d


def run_case(system: System, events: Sequence[TraceEvent], config: Configuration,
             perm: int = 0, seed: int = 0, mutations=(), max_steps: int = 1_000_000,
             kinds: Sequence[str] = ()):
    """Replay one interleaving through the full tracer stack and judge it."""
    text = encode_trace(events, root=(system.root, system.root_sig))
    tf = decode_trace(text)
    rt = Runtime(seed=f"{system.name}|{perm}|{config.name}|{seed}|{','.join(sorted(mutations))}")
    hist = History()
    backend = OfflineTracing(rt, tf.events, root=tf.root[0])
    lam, reg = instrumentation(system, config, kinds)
    _, _, env = start(backend, tf.root[1], lam, reg, history=hist,
                      analysis_cost=0.0, mutations=mutations)
    steps = rt.run(max_steps=max_steps)
    env.finalize()
    res = CaseResult(system.name, perm, config.name, seed, tuple(sorted(mutations)), steps=steps)
    res.tracers = len(env.tracers)
    iid = f"{system.name}/p{perm}/{config.name}/s{seed}"
    res.violations = check_invariants(hist, iid)

    analysed = hist.analysed()
    verdicts = {(o, t): v for o, v, t, _ in env.outcomes}
    group_of = {x: Configuration.monitor(g) for g in config.groups for x in g}
    for name, pid in sorted(system.names.items(), key=lambda kv: kv[1]):
        pairs = analysed.get(pid, [])
        owners = sorted({t for t, _ in pairs})
        ground = LocalExecution(pid, tuple(system.locals[pid]))
        seq = [e for _, e in pairs]
        problems = []
        if len(owners) > 1:
            problems.append(f"analysed by {len(owners)} tracers")
        s = is_sound(seq, ground)
        if s is not Soundness.SOUND:
            problems.append(f"{s.value} at position {first_divergence(seq, ground) + 1}")
        if name in group_of and owners:
            t = env.tracers[owners[0]]
            if t.monitor_name != group_of[name]:
                problems.append(f"analysed under {t.monitor_name}, expected {group_of[name]}")
            v = verdicts.get((pid, owners[0]))
            if v is not Verdict.ACCEPT:
                problems.append(f"monitor verdict {v.value if v else None}")
        if problems:
            res.unsound[name] = "; ".join(problems)

    res.live = len(env.live())
    for t in env.live():
        # a tracer may outlive quiescence only while it owns a process that
        # has not exited
        alive_owned = [p for p in t.gamma if not backend.is_dead(p)]
        if not alive_owned:
            res.redundant.append(str(t.pid))
    res.orphans = len(backend.orphans) + (0 if backend.finished else 1)
    return res, hist, text


@dataclass
class Summary:
    system: str
    interleavings: int
    configs: list[str]
    cases: list[CaseResult]
    elapsed: float = 0.0

    @property
    def passed(self) -> int:
        return sum(c.passed for c in self.cases)

    @property
    def failed(self) -> int:
        return len(self.cases) - self.passed

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def violation_ids(self) -> set[str]:
        return {v.id for c in self.cases for v in c.violations}

    def to_jsonl(self) -> str:
        head = {"system": self.system, "interleavings": self.interleavings,
                "configs": self.configs, "cases": len(self.cases),
                "passed": self.passed, "failed": self.failed}
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(c.record(), sort_keys=True) for c in self.cases]
        return "".join(l + "\n" for l in lines)

    def matrix(self) -> str:
        """Human-readable interleavings x configurations grid."""
        rows = [" perm | " + " ".join(f"{c:>4}" for c in self.configs)]
        by = {(c.perm, c.config): c for c in self.cases}
        for p in range(self.interleavings):
            cells = []
            for cfg in self.configs:
                cs = [c for (pp, cc), c in by.items() if pp == p and cc == cfg]
                cells.append(f"{'ok' if all(c.passed for c in cs) else 'FAIL':>4}")
            rows.append(f"{p:5d} | " + " ".join(cells))
        return "\n".join(rows)


def systest(system: System, configs: Sequence[Configuration] | None = None,
            cap: int = DEFAULT_CAP, force: bool = False, seeds: Iterable[int] = (0,),
            mutations=(), out_dir=None, stop_on: str | None = None) -> Summary:
    """Run every interleaving of ``system`` under every configuration.

    Failing cases have their trace file and tracer history written to
    ``out_dir``.  ``stop_on`` ends the sweep at the first case reporting
    that invariant id (used for fault injection).
    """
    t0 = time.perf_counter()
    configs = list(configs) if configs is not None else default_configurations(system)
    perms = permutations(local_executions(system.locals), cap=cap, force=force)
    cases = []
    out = Path(out_dir) if out_dir else None
    seeds = list(seeds)
    for pi, perm in enumerate(perms):
        for cfg in configs:
            for seed in seeds:
                res, hist, text = run_case(system, perm, cfg, pi, seed, mutations)
                cases.append(res)
                if not res.passed and out is not None:
                    out.mkdir(parents=True, exist_ok=True)
                    stem = f"{system.name}-p{pi}-{cfg.name}-s{seed}"
                    (out / f"{stem}.trace").write_text(text, encoding="utf-8")
                    (out / f"{stem}.history.jsonl").write_text(hist.to_jsonl(), encoding="utf-8")
                if stop_on and any(v.id == stop_on for v in res.violations):
                    return Summary(system.name, len(perms), [c.name for c in configs], cases,
                                   time.perf_counter() - t0)
    return Summary(system.name, len(perms), [c.name for c in configs], cases,
                   time.perf_counter() - t0)


def detect_mutant(mutant: str, systems: Sequence[System], seeds=range(4)) -> set[str]:
    """Invariant ids reported when ``mutant`` is switched on.

    Sweeps the given systems under their default configurations and stops
    as soon as the invariant the mutant targets is reported.
    """
    want = MUTANTS[mutant]
    found: set[str] = set()
    for sys_ in systems:
        s = systest(sys_, seeds=seeds, mutations=(mutant,), stop_on=want, force=True)
        found |= s.violation_ids()
        if want in found:
            break
    return found


def canonical(trace: Sequence[TraceEvent]) -> str:
    return "".join(encode_event(e) + "\n" for e in trace)
