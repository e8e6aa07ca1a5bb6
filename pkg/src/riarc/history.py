"""Append-only record of everything tracers do.

Tracers write here through a side channel; nothing in the tracer logic ever
reads it back.  The invariant checker replays it after the run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .protocol import DetachRequest, RoutingPacket, TraceEvent
from .runtime import Pid

# record kinds
INIT = "init"
RECV = "recv"
ANALYSE = "analyse"
GAMMA_ADD = "gamma_add"
GAMMA_REMOVE = "gamma_remove"
GAMMA_MARK = "gamma_mark"
PI_ADD = "pi_add"
PI_REMOVE = "pi_remove"
DISPATCH = "dispatch"
FORWARD = "forward"
DETACH = "detach"
SPAWN_TRACER = "spawn_tracer"
MODE = "mode"
VIOLATION = "violation"
VERDICT = "verdict"
TERMINATE = "terminate"


@dataclass(frozen=True)
class Record:
    seq: int
    tracer: Pid
    kind: str
    data: dict

    def get(self, key, default=None):
        return self.data.get(key, default)


class History:
    def __init__(self):
        self.records: list[Record] = []

    def append(self, tracer: Pid, kind: str, **data) -> None:
        self.records.append(Record(len(self.records), tracer, kind, data))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_tracer(self) -> dict[Pid, list[Record]]:
        out: dict[Pid, list[Record]] = {}
        for r in self.records:
            out.setdefault(r.tracer, []).append(r)
        return out

    def tracers(self) -> list[Pid]:
        return sorted({r.tracer for r in self.records})

    def analysed(self) -> dict[Pid, list[tuple[Pid, TraceEvent]]]:
        """Per SuS pid, the (tracer, event) pairs fed to ANALYSEEVT in order."""
        out: dict[Pid, list] = {}
        for r in self.records:
            if r.kind == ANALYSE:
                e = r.data["event"]
                out.setdefault(e.i_s, []).append((r.tracer, e))
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(render(r), sort_keys=True) + "\n" for r in self.records)


def render_value(v: Any):
    if isinstance(v, Pid):
        return str(v)
    if isinstance(v, TraceEvent):
        return {"evt": v.label.value, "i_s": str(v.i_s),
                "j_s": None if v.j_s is None else str(v.j_s), "sig": v.sig}
    if isinstance(v, DetachRequest):
        return {"dtc": True, "i_t": str(v.i_t), "i_s": str(v.i_s)}
    if isinstance(v, RoutingPacket):
        return {"rtd": str(v.i_t), "inner": render_value(v.inner)}
    if isinstance(v, dict):
        return {str(k): render_value(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if isinstance(v, (list, tuple)):
        return [render_value(x) for x in v]
    if hasattr(v, "value") and not isinstance(v, (int, float, str)):
        return v.value
    return v


def render(r: Record) -> dict:
    return {"seq": r.seq, "tracer": str(r.tracer), "kind": r.kind,
            **{k: render_value(v) for k, v in r.data.items()}}
