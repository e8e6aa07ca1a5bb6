import pytest
from hypothesis import given, strategies as st

from riarc import protocol as P
from riarc.runtime import Runtime, sus, tracer
from riarc.tracing import (OfflineTracing, OnlineTracing, ReorderBuffer, TracingError,
                           infer_root, reorder, replay)

p, q, r = sus(0), sus(1), sus(2)
SP, SQ = P.spawn(p, q, "f_sQ"), P.spawn(q, r, "f_sR")
RQ, SNDP = P.recv(q), P.send(p, q)


def test_reordering_spawn_events():
    out, pending = reorder([RQ, SQ, SP, SNDP], {p})
    assert out == [SP, RQ, SQ, SNDP] and pending == []


def test_reordering_alternative_input_gives_same_trace():
    out, _ = reorder([RQ, SP, SQ, SNDP], {p})
    assert out == [SP, RQ, SQ, SNDP]


def test_ordered_input_is_identity():
    evs = [SP, RQ, SNDP, SQ]
    assert reorder(evs, {p})[0] == evs


def test_untraced_events_stay_pending():
    out, pending = reorder([RQ, P.exit_(q)], {p})
    assert out == [] and pending == [RQ, P.exit_(q)]


def test_buffer_add_traced_releases():
    buf = ReorderBuffer()
    assert buf.push(RQ) == []
    assert buf.add_traced(q) == [RQ]
    assert buf.add_traced(q) == []


def test_replay_splits_by_registration():
    res = replay([RQ, SP, SNDP, P.exit_(q)], {"a": [p]})
    assert res.delivered["a"] == [SP, RQ, SNDP, P.exit_(q)]
    with pytest.raises(TracingError):
        replay([], {"a": [p], "b": [p]})


def test_infer_root():
    assert infer_root([RQ, SP]) == p
    assert infer_root([]) is None


@given(st.permutations([SP, RQ, SQ, SNDP, P.exit_(q), P.exit_(p), P.recv(r)]))
def test_reorder_keeps_per_process_order(evs):
    out, pending = reorder(evs, {p})
    assert pending == []
    assert sorted(map(str, out)) == sorted(map(str, evs))
    for pid in (p, q, r):
        assert [e for e in out if e.i_s == pid] == [e for e in evs if e.i_s == pid]
    # a child's events come after its spawn
    for i, e in enumerate(out):
        if e.label is P.Label.SPAWN:
            assert all(x.i_s != e.j_s for x in out[:i])


def test_registry_rules():
    def idle(ctx):
        yield ctx.receive()

    rt = Runtime()
    reg = OnlineTracing(rt)
    p = reg.launch(idle, sig="x")
    reg.trace(p, tracer(0))
    with pytest.raises(TracingError):
        reg.trace(p, tracer(1))
    with pytest.raises(TracingError):
        reg.clear(p, tracer(1))
    reg.preempt(p, tracer(1))
    assert reg.tracer_of(p) == tracer(1)
    reg.clear(p, tracer(1))
    assert reg.tracer_of(p) is None


def test_online_inheritance_and_delivery():
    got = []

    def sink(ctx):
        while True:
            got.append((yield ctx.receive()))

    def child(ctx):
        yield ctx.receive()

    def root(ctx):
        c = ctx.spawn(child, sig="kid")
        ctx.send(c, "hello")
        yield

    rt = Runtime()
    tr = OnlineTracing(rt)
    t = rt.spawn(sink, kind="tracer")
    s = tr.launch(root, sig="main")
    tr.trace(s, t)
    tr.resume(s)
    rt.run()
    labels = [e.label.value for e in got]
    assert labels == ["spawn", "send", "exit", "recv", "exit"]
    assert got[1].payload == "hello"
    assert tr.is_dead(s)


def test_offline_engine_delivers_to_owner():
    got = []

    def sink(ctx):
        while True:
            got.append((yield ctx.receive()))

    rt = Runtime()
    off = OfflineTracing(rt, [RQ, SQ, SP, SNDP])
    t = rt.spawn(sink, kind="tracer")
    root = off.launch(sig="f_sP")
    assert root == p
    off.trace(p, t)
    off.resume(p)
    rt.run()
    assert got == [SP, RQ, SQ, SNDP]
    assert off.finished and off.orphans == []
