"""End-to-end acceptance checks, one test per criterion.

Each test reports a PASS/FAIL line through the ``criterion`` fixture; the
lines are repeated in the terminal summary.
"""
import math
import random
import statistics
import time
from collections import Counter

from riarc import protocol as P
from riarc.bench import (WorkloadProfile, batch_size, gen_schedule, metrics_csv,
                         run_master_worker, series_csv, spawn_times)
from riarc.runtime import sus
from riarc.systems import chain, fig2a
from riarc.tracer import MUTANTS
from riarc.tracing import reorder
from riarc.verify import (canonical, count_linear_extensions, detect_mutant,
                          fig2a_configurations, local_executions, permutations, systest)

p, q, r = sus(0), sus(1), sus(2)
SP, SNDP, XP = P.spawn(p, q, "f_sQ"), P.send(p, q), P.exit_(p)
RQ, SQ, XQ = P.recv(q), P.spawn(q, r, "f_sR"), P.exit_(q)


def test_c01_permutation_exactness(criterion):
    # the four traces written out by hand for the P/Q/R example
    by_hand = {
        canonical([SP, SNDP, XP, RQ, SQ, XQ]),
        canonical([SP, SNDP, RQ, XP, SQ, XQ]),
        canonical([SP, SNDP, RQ, SQ, XP, XQ]),
        canonical([SP, SNDP, RQ, SQ, XQ, XP]),
    }
    t0 = time.perf_counter()
    got = [canonical(x) for x in permutations(local_executions(fig2a().locals))]
    dt = time.perf_counter() - t0
    ok = len(got) == 4 and set(got) == by_hand and dt < 1.0
    criterion(1, ok, f"{len(got)} traces, {dt:.3f}s")


def test_c02_systematic_soundness(criterion):
    t0 = time.perf_counter()
    s = systest(fig2a(), fig2a_configurations())
    dt = time.perf_counter() - t0
    unsound = sum(bool(c.unsound) for c in s.cases)
    redundant = sum(len(c.redundant) for c in s.cases)
    ok = (s.interleavings == 4 and len(s.cases) == 28 and s.passed == 28 and unsound == 0
          and not s.violation_ids() and redundant == 0 and dt < 30)
    criterion(2, ok, f"{s.passed}/{len(s.cases)} sound, violations={sorted(s.violation_ids())}, "
                     f"redundant live tracers={redundant}, {dt:.1f}s")


def test_c03_offline_reordering(criterion):
    cases = [
        ([RQ, SQ, SP, SNDP], [SP, RQ, SQ, SNDP]),
        ([RQ, SP, SQ, SNDP], [SP, RQ, SQ, SNDP]),
        ([SP, RQ, SNDP, SQ], [SP, RQ, SNDP, SQ]),
    ]
    outs = [reorder(given, {p}) for given, _ in cases]
    ok = all(out == want and pending == [] for (out, pending), (_, want) in zip(outs, cases))
    criterion(3, ok, "3 inputs delivered exactly")


def test_c04_routing_race_coverage(criterion):
    sys4 = chain(4)
    locs = local_executions(sys4.locals)
    t0 = time.perf_counter()
    s = systest(sys4, cap=10_000)
    dt = time.perf_counter() - t0
    dp = count_linear_extensions(locs)
    distinct = len(set(permutations(locs, cap=10_000)))
    live = sum(c.live for c in s.cases)
    ok = (s.interleavings == dp == distinct and s.interleavings <= 10_000 and s.ok
          and not s.violation_ids() and live == 0 and dt < 300)
    criterion(4, ok, f"{s.interleavings} interleavings (DP count {dp}), {s.passed} passed, "
                     f"live={live}, {dt:.1f}s")


def test_c05_fault_injection(criterion):
    assert len(MUTANTS) >= 8
    hits = {m: MUTANTS[m] in detect_mutant(m, [fig2a(), chain(4)]) for m in sorted(MUTANTS)}
    missed = [m for m, hit in hits.items() if not hit]
    criterion(5, not missed, f"{sum(hits.values())}/{len(hits)} detected"
                             + (f", missed {missed}" if missed else ""))


def test_c06_mode_equivalence(criterion):
    bad = []
    for seed in range(100):
        prof = WorkloadProfile(n=100, w=10, seed=seed)
        got = {mode: Counter(run_master_worker(prof, mode).verdicts)
               for mode in ("inline", "central", "riarc")}
        ref = got["inline"]
        if any(g != ref for g in got.values()) or set(v for _, v in ref) != {"accept"}:
            bad.append(seed)
        elif sum(ref.values()) != 101:
            bad.append(seed)
    criterion(6, not bad, f"{100 - len(bad)}/100 seeds identical and all accept")


def test_c07_scaling(criterion):
    ns = (250, 500, 1000, 2000)
    t0 = time.perf_counter()
    central, per_tracer = [], []
    for n in ns:
        prof = WorkloadProfile(n=n, w=10, seed=0)
        central.append(run_master_worker(prof, "central").metrics.central_backlog)
        per_tracer.append(run_master_worker(prof, "riarc").metrics.max_tracer_backlog)
    dt = time.perf_counter() - t0
    # growth is at least linear: increasing, with a fitted log-log exponent >= 0.9
    exponent = statistics.linear_regression([math.log(n) for n in ns],
                                            [math.log(b) for b in central]).slope
    growing = all(a < b for a, b in zip(central, central[1:])) and exponent >= 0.9
    ratio = central[-1] / per_tracer[-1]
    bounded = max(per_tracer) <= 2 * min(per_tracer)
    ok = growing and ratio >= 5 and bounded and dt < 120
    criterion(7, ok, f"central={central} (exponent {exponent:.2f}), riarc={per_tracer}, "
                     f"ratio {ratio:.0f}x, {dt:.1f}s")


def test_c08_distribution_shapes(criterion):
    n = 10_000
    steady = spawn_times(WorkloadProfile(kind="steady", n=n, lam=5000), random.Random(1))
    gaps = [b - a for a, b in zip([0.0] + steady, steady)]
    s_ok = abs(statistics.fmean(gaps) - 1 / 5000) <= 0.05 / 5000

    t = 10.0
    pulse = spawn_times(WorkloadProfile(kind="pulse", n=n, t=t, eta=1.0), random.Random(1))
    p_ok = abs(statistics.fmean(pulse) - t / 2) <= 0.05 * t / 2

    burst = spawn_times(WorkloadProfile(kind="burst", n=n, t=t, pi=2.0), random.Random(1))
    b_ok = statistics.median(burst) < t / 2

    w = 1000
    rng = random.Random(1)
    sizes = [batch_size(w, rng) for _ in range(n)]
    sd = statistics.stdev(sizes)
    w_ok = abs(sd - 0.02 * w) <= 0.15 * 0.02 * w

    criterion(8, s_ok and p_ok and b_ok and w_ok,
              f"steady gap {statistics.fmean(gaps) * 1e6:.1f}us, pulse mean "
              f"{statistics.fmean(pulse):.3f}, burst median {statistics.median(burst):.3f}, "
              f"batch sd {sd:.2f}")


def test_c09_protocol_conservation(criterion):
    bad = []
    for seed in range(10):
        prof = WorkloadProfile(n=50, w=7, seed=seed, pr_send=1.0, pr_recv=1.0)
        want = sum(2 * b + 2 for _, b in gen_schedule(prof))
        res = run_master_worker(prof)
        if not (res.metrics.sus_messages == res.expected_messages == want):
            bad.append(seed)
    criterion(9, not bad, f"{10 - len(bad)}/10 seeds exact")


def test_c10_determinism(criterion):
    a = systest(fig2a(), seeds=(0, 1)).to_jsonl()
    b = systest(fig2a(), seeds=(0, 1)).to_jsonl()

    def bench_bytes():
        out = []
        for mode in ("none", "inline", "central", "riarc"):
            runs = [run_master_worker(WorkloadProfile(n=40, seed=s), mode, sample_interval=1e-3)
                    for s in range(2)]
            out.append(metrics_csv([x.metrics for x in runs]) + series_csv([x.samples for x in runs]))
        return "".join(out).encode()

    ok = a.encode() == b.encode() and bench_bytes() == bench_bytes()
    criterion(10, ok, "systest summary and bench CSVs byte-identical")
