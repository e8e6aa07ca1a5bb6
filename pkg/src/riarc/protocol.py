"""Trace events, tracer coordination messages and the trace-file codec.

A trace file holds one event per line::

    spawn   0   1   f_sQ
    send    0   1   -
    recv    1   -   -
    exit    0   -   -

Fields are separated by tabs on output and by any whitespace on input.
Undefined fields are ``-``.  SuS pids are written as bare serials, although
``sus:N`` is accepted too.  Lines starting with ``#`` are comments, except
``# root <pid> <sig>`` which names the root process of the recording.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .runtime import SUS, TRACER, Pid


class Label(enum.Enum):
    SPAWN = "spawn"
    EXIT = "exit"
    SEND = "send"
    RECV = "recv"

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]


_SYMBOLS = {Label.SPAWN: "⋄", Label.EXIT: "★", Label.SEND: "!", Label.RECV: "?"}

# which optional fields each label must carry: (j_s, sig)
DEFINEDNESS = {
    Label.SPAWN: (True, True),
    Label.EXIT: (False, False),
    Label.SEND: (True, False),
    Label.RECV: (False, False),
}


class MalformedEvent(ValueError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    """``⟨evt, label, i_s, j_s, sig⟩``.

    ``payload`` carries the message content of send/receive events for
    monitors that inspect it.  It takes no part in equality and is not
    written to trace files.
    """
    label: Label
    i_s: Pid
    j_s: Pid | None = None
    sig: str | None = None
    payload: Any = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.label, Label):
            raise MalformedEvent(f"bad label {self.label!r}")
        if not isinstance(self.i_s, Pid) or self.i_s.kind != SUS:
            raise MalformedEvent(f"originator must be a SuS pid, got {self.i_s!r}")
        want_j, want_sig = DEFINEDNESS[self.label]
        if want_j != (self.j_s is not None):
            raise MalformedEvent(
                f"{self.label.value} must {'' if want_j else 'not '}carry j_s")
        if want_sig != (self.sig is not None):
            raise MalformedEvent(
                f"{self.label.value} must {'' if want_sig else 'not '}carry sig")
        if self.j_s is not None and self.j_s.kind != SUS:
            raise MalformedEvent("j_s must be a SuS pid")
        if self.sig is not None and not _is_ident(self.sig):
            raise MalformedEvent(f"bad signature {self.sig!r}")

    def __str__(self):
        s = f"{self.label.symbol}{self.i_s.serial}"
        if self.j_s is not None:
            s += f"→{self.j_s.serial}"
        return s


def spawn(parent: Pid, child: Pid, sig: str) -> TraceEvent:
    return TraceEvent(Label.SPAWN, parent, child, sig)


def exit_(pid: Pid) -> TraceEvent:
    return TraceEvent(Label.EXIT, pid)


def send(sender: Pid, to: Pid, payload=None) -> TraceEvent:
    return TraceEvent(Label.SEND, sender, to, payload=payload)


def recv(pid: Pid, payload=None) -> TraceEvent:
    return TraceEvent(Label.RECV, pid, payload=payload)


@dataclass(frozen=True)
class DetachRequest:
    """``⟨dtc, i_t, i_s⟩``: tracer ``i_t`` asks to take over SuS ``i_s``."""
    i_t: Pid
    i_s: Pid

    def __post_init__(self):
        if self.i_t.kind != TRACER or self.i_s.kind != SUS:
            raise MalformedEvent("dtc needs a tracer pid and a SuS pid")


@dataclass(frozen=True)
class RoutingPacket:
    """``⟨rtd, i_t, inner⟩`` where ``i_t`` is the dispatch tracer."""
    i_t: Pid
    inner: TraceEvent | DetachRequest

    def __post_init__(self):
        if self.i_t.kind != TRACER:
            raise MalformedEvent("rtd must name a tracer")
        if not isinstance(self.inner, (TraceEvent, DetachRequest)):
            raise MalformedEvent("rtd embeds only evt or dtc messages")


def is_rtd(msg) -> bool:
    return isinstance(msg, RoutingPacket)


def route_key(msg) -> Pid:
    """The SuS pid a message is routed on."""
    if isinstance(msg, RoutingPacket):
        msg = msg.inner
    return msg.i_s


def _is_ident(s: str) -> bool:
    return bool(s) and s != "-" and not any(c.isspace() for c in s)


# codec --------------------------------------------------------------------

class TraceParseError(ValueError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


def encode_event(e: TraceEvent) -> str:
    if not isinstance(e, TraceEvent):
        raise MalformedEvent(f"not a trace event: {e!r}")
    return "\t".join([
        e.label.value,
        str(e.i_s.serial),
        "-" if e.j_s is None else str(e.j_s.serial),
        "-" if e.sig is None else e.sig,
    ])


def encode_trace(events: Iterable[TraceEvent], root: tuple[Pid, str] | None = None) -> str:
    lines = []
    if root is not None:
        lines.append(f"# root {root[0].serial} {root[1]}")
    lines.extend(encode_event(e) for e in events)
    return "".join(line + "\n" for line in lines)


def _fields(line: str):
    """Split on whitespace, keeping 1-based column positions."""
    out = []
    i, n = 0, len(line)
    while i < n:
        while i < n and line[i].isspace():
            i += 1
        if i >= n:
            break
        j = i
        while j < n and not line[j].isspace():
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _pid(tok: str, lineno: int, col: int) -> Pid:
    try:
        pid = Pid.parse(tok)
    except ValueError:
        raise TraceParseError(f"bad pid {tok!r}", lineno, col) from None
    if pid.kind != SUS:
        raise TraceParseError(f"expected a SuS pid, got {tok!r}", lineno, col)
    return pid


def decode_line(line: str, lineno: int = 1) -> TraceEvent:
    toks = _fields(line)
    if len(toks) != 4:
        col = toks[4][1] if len(toks) > 4 else len(line.rstrip("\n")) + 1
        raise TraceParseError(f"expected 4 fields, found {len(toks)}", lineno, col)
    (lab, c0), (i_s, c1), (j_s, c2), (sig, c3) = toks
    try:
        label = Label(lab)
    except ValueError:
        raise TraceParseError(f"unknown label {lab!r}", lineno, c0) from None
    want_j, want_sig = DEFINEDNESS[label]
    if want_j != (j_s != "-"):
        raise TraceParseError(
            f"{lab} must {'' if want_j else 'not '}carry j_s", lineno, c2)
    if want_sig != (sig != "-"):
        raise TraceParseError(
            f"{lab} must {'' if want_sig else 'not '}carry sig", lineno, c3)
    return TraceEvent(label, _pid(i_s, lineno, c1),
                      None if j_s == "-" else _pid(j_s, lineno, c2),
                      None if sig == "-" else sig)


@dataclass
class TraceFile:
    events: list[TraceEvent]
    lines: list[int]
    root: tuple[Pid, str] | None = None


def decode_trace(text: str) -> TraceFile:
    events, lines, root = [], [], None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            toks = stripped[1:].split()
            if toks and toks[0] == "root":
                if len(toks) != 3:
                    raise TraceParseError("root directive needs a pid and a sig",
                                          lineno, 1)
                root = (_pid(toks[1], lineno, line.index(toks[1]) + 1), toks[2])
            continue
        events.append(decode_line(line, lineno))
        lines.append(lineno)
    return TraceFile(events, lines, root)


def decode_trace_file(path) -> list[TraceEvent]:
    return read_trace_file(path).events


def read_trace_file(path) -> TraceFile:
    return decode_trace(Path(path).read_text(encoding="utf-8"))


def write_trace_file(path, events: Iterable[TraceEvent], root=None) -> None:
    Path(path).write_text(encode_trace(events, root), encoding="utf-8")
