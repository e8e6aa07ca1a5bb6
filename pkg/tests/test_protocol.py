import pytest
from hypothesis import given, strategies as st

from riarc import protocol as P
from riarc.protocol import (DetachRequest, Label, MalformedEvent, RoutingPacket, TraceEvent,
                            TraceParseError, decode_line, decode_trace, encode_event,
                            encode_trace, is_rtd, route_key)
from riarc.runtime import sus, tracer


def test_definedness_table():
    p, q = sus(0), sus(1)
    P.spawn(p, q, "f")
    P.send(p, q)
    P.exit_(p)
    P.recv(q)
    with pytest.raises(MalformedEvent):
        TraceEvent(Label.SPAWN, p, q)           # no signature
    with pytest.raises(MalformedEvent):
        TraceEvent(Label.SEND, p, None)
    with pytest.raises(MalformedEvent):
        TraceEvent(Label.EXIT, p, q)
    with pytest.raises(MalformedEvent):
        TraceEvent(Label.RECV, p, sig="x")
    with pytest.raises(MalformedEvent):
        TraceEvent(Label.EXIT, tracer(0))


def test_payload_does_not_affect_equality():
    assert P.send(sus(0), sus(1), "a") == P.send(sus(0), sus(1), "b")


def test_routing_packets_do_not_nest():
    e = P.exit_(sus(0))
    r = RoutingPacket(tracer(0), e)
    assert is_rtd(r) and not is_rtd(e)
    assert route_key(r) == sus(0)
    assert route_key(DetachRequest(tracer(1), sus(2))) == sus(2)
    with pytest.raises(MalformedEvent):
        RoutingPacket(tracer(0), r)
    with pytest.raises(MalformedEvent):
        DetachRequest(sus(0), sus(1))


def test_symbols():
    assert [l.symbol for l in Label] == ["⋄", "★", "!", "?"]


def test_encode_layout():
    assert encode_event(P.spawn(sus(0), sus(1), "f_sQ")) == "spawn\t0\t1\tf_sQ"
    assert encode_event(P.recv(sus(1))) == "recv\t1\t-\t-"
    assert encode_trace([P.exit_(sus(0))], root=(sus(0), "f")) == "# root 0 f\nexit\t0\t-\t-\n"


def test_decode_errors_name_line_and_column():
    with pytest.raises(TraceParseError) as ei:
        decode_trace("spawn\t0\t1\tf\nboom 1 - -\n")
    assert ei.value.line == 2 and ei.value.column == 1
    with pytest.raises(TraceParseError) as ei:
        decode_line("send 0 - -")
    assert ei.value.column == 8
    with pytest.raises(TraceParseError):
        decode_line("exit 0 -")
    with pytest.raises(TraceParseError):
        decode_line("exit x - -")


def test_decode_skips_comments_and_blanks():
    tf = decode_trace("# a comment\n\n# root 4 main\nexit 4 - -\n")
    assert tf.root == (sus(4), "main")
    assert tf.events == [P.exit_(sus(4))]
    assert tf.lines == [4]


pids = st.integers(0, 50).map(sus)
sigs = st.text("abcdefgh_", min_size=1, max_size=6)
events = st.one_of(
    st.builds(P.spawn, pids, pids, sigs),
    st.builds(P.send, pids, pids),
    st.builds(P.recv, pids),
    st.builds(P.exit_, pids),
)


@given(st.lists(events, max_size=30))
def test_round_trip(evs):
    assert decode_trace(encode_trace(evs)).events == evs
