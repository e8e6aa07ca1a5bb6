"""Built-in example systems, described by their per-process local traces."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import protocol as P
from .protocol import Label, TraceEvent
from .runtime import Pid, sus


@dataclass
class System:
    name: str
    names: dict[str, Pid]            # short process name -> pid
    sigs: dict[Pid, str]
    locals: dict[Pid, list[TraceEvent]]
    root: Pid
    parents: dict[Pid, Pid] = field(default_factory=dict)

    def __post_init__(self):
        for pid, evs in self.locals.items():
            for e in evs:
                if e.label is Label.SPAWN:
                    self.parents[e.j_s] = pid

    @property
    def root_sig(self) -> str:
        return self.sigs[self.root]

    def name_of(self, pid: Pid) -> str:
        for k, v in self.names.items():
            if v == pid:
                return k
        return str(pid)

    def pid(self, name: str) -> Pid:
        return self.names[name]

    def events(self) -> int:
        return sum(len(v) for v in self.locals.values())


def fig2a() -> System:
    """P spawns Q and messages it; Q receives, spawns R and exits; P exits.
    R does nothing observable and never exits."""
    p, q, r = sus(0), sus(1), sus(2)
    return System(
        "fig2a",
        {"P": p, "Q": q, "R": r},
        {p: "f_sP", q: "f_sQ", r: "f_sR"},
        {
            p: [P.spawn(p, q, "f_sQ"), P.send(p, q), P.exit_(p)],
            q: [P.recv(q), P.spawn(q, r, "f_sR"), P.exit_(q)],
            r: [],
        },
        p,
    )


def chain(k: int = 4) -> System:
    """A line of ``k`` processes: each one spawns the next, sends it one
    message and exits; every non-root process first receives from its
    parent.  The last process receives and exits."""
    if not 1 <= k <= 26:
        raise ValueError("chain length must be between 1 and 26")
    letters = "PQRSTUVWXYZABCDEFGHIJKLMNO"[:k]
    pids = [sus(i) for i in range(k)]
    sigs = {pid: f"f_s{c}" for pid, c in zip(pids, letters)}
    locs: dict[Pid, list[TraceEvent]] = {}
    for i, pid in enumerate(pids):
        evs = []
        if i > 0:
            evs.append(P.recv(pid))
        if i + 1 < k:
            nxt = pids[i + 1]
            evs.append(P.spawn(pid, nxt, sigs[nxt]))
            evs.append(P.send(pid, nxt))
        evs.append(P.exit_(pid))
        locs[pid] = evs
    return System(f"chain{k}", dict(zip(letters, pids)), sigs, locs, pids[0])


SYSTEMS = {"fig2a": fig2a, "chain4": lambda: chain(4), "chain3": lambda: chain(3)}


def get_system(name: str) -> System:
    if name in SYSTEMS:
        return SYSTEMS[name]()
    if name.startswith("chain") and name[5:].isdigit():
        return chain(int(name[5:]))
    raise KeyError(f"unknown system {name!r}; known: {', '.join(sorted(SYSTEMS))}")


def script(system: System):
    """A runnable behaviour that replays each process's local trace live.

    Returns the root behaviour; children are spawned with their own script.
    Script pids are mapped to the pids the runtime actually assigns.
    """
    actual: dict[Pid, Pid] = {}

    def body(ctx, me: Pid):
        actual[me] = ctx.self
        for e in system.locals[me]:
            if e.label is Label.SPAWN:
                actual[e.j_s] = ctx.spawn(body, e.j_s, sig=e.sig)
            elif e.label is Label.SEND:
                ctx.send(actual[e.j_s], ("msg", me, e.j_s))
            elif e.label is Label.RECV:
                yield ctx.receive()
            elif e.label is Label.EXIT:
                return
        # processes without an exit event stay alive
        yield ctx.receive(lambda m: False)

    return body, actual


def from_trace(events: list[TraceEvent], root: Pid | None = None,
               root_sig: str | None = None, name: str = "trace") -> System:
    """A system whose ground truth is the per-process projection of a
    recording; process names are the bare pid serials."""
    locs: dict[Pid, list[TraceEvent]] = {}
    sigs: dict[Pid, str] = {}
    for e in events:
        locs.setdefault(e.i_s, []).append(e)
        if e.label is Label.SPAWN:
            locs.setdefault(e.j_s, [])
            sigs[e.j_s] = e.sig
    if root is None:
        children = set(sigs)
        roots = [p for p in locs if p not in children]
        root = roots[0] if roots else (events[0].i_s if events else sus(0))
    locs.setdefault(root, [])
    sigs.setdefault(root, root_sig or "-root")
    for pid in locs:
        sigs.setdefault(pid, "-anon")
    names = {str(p.serial) if p.kind == "sus" else str(p): p for p in sorted(locs)}
    return System(name, names, sigs, locs, root)
