"""Tracer choreography driven online, through the live runtime."""
import pytest

from riarc import history as H
from riarc.history import History
from riarc.monitors import ExpectedTrace, MonitorRegistry, SliceMap, Verdict
from riarc.runtime import Runtime
from riarc.systems import chain, fig2a, script
from riarc.tracer import MUTANTS, Mode, start
from riarc.tracing import OnlineTracing
from riarc.verify import LocalExecution, Soundness, check_invariants, is_sound


def online(system, lam, seed=0):
    rt = Runtime(seed=seed)
    tr = OnlineTracing(rt)
    body, actual = script(system)
    reg = MonitorRegistry()
    spec = ExpectedTrace(system.locals)
    for name in set(lam.values()):
        reg.register(name, lambda: SliceMap(lambda s: spec))
    hist = History()
    root, tpid, env = start(tr, system.root_sig, lam, reg, body, (system.root,), history=hist)
    rt.run()
    env.finalize()
    return rt, env, hist, actual


@pytest.mark.parametrize("seed", range(5))
def test_full_decentralisation_online(seed):
    s = chain(3)
    lam = {sig: "m" for sig in s.sigs.values()}
    rt, env, hist, actual = online(s, lam, seed)
    assert check_invariants(hist) == []
    # scripted pids line up with the runtime's
    assert actual == {p: p for p in s.locals}
    analysed = hist.analysed()
    for pid, evs in s.locals.items():
        owners = {t for t, _ in analysed[pid]}
        assert len(owners) == 1
        assert is_sound([e for _, e in analysed[pid]], LocalExecution(pid, evs)) is Soundness.SOUND
    assert env.live() == []
    assert [v for _, v in env.verdicts()] == [Verdict.ACCEPT] * 3
    assert len(env.tracers) == 3


def test_central_configuration_uses_one_tracer():
    s = fig2a()
    rt, env, hist, _ = online(s, {"f_sP": "m"})
    assert len(env.tracers) == 1
    assert check_invariants(hist) == []


def test_priority_mode_only_takes_routed_packets():
    s = chain(4)
    lam = {sig: "m" for sig in s.sigs.values()}
    for seed in range(10):
        _, _, hist, _ = online(s, lam, seed)
        for r in hist:
            if r.kind == H.RECV and r.data["mode"] is Mode.PRIORITY:
                assert type(r.data["msg"]).__name__ == "RoutingPacket"


def test_unknown_mutant_rejected():
    with pytest.raises(ValueError):
        start(None, "x", {}, MonitorRegistry(), mutations=("nope",))
    assert len(MUTANTS) >= 8
