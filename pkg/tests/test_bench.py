import math
import random
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from riarc.bench import (CSV_HEADER, MODES, NotConverged, ProfileError, WorkloadProfile,
                         WorkMessage, burst_params, coefficient_of_variation, gen_schedule,
                         load_profile, metrics_csv, read_metrics_csv, run_master_worker,
                         select_repetitions, series_csv)
from riarc.runtime import sus


def test_steady_fixes_timeline():
    assert WorkloadProfile(n=500_000, lam=5000).t == 100
    with pytest.raises(ProfileError) as ei:
        WorkloadProfile(n=10, lam=5, t=7)
    assert ei.value.field == "t"


@pytest.mark.parametrize("kw,field", [
    (dict(kind="pulse", t=1.0), "eta"),
    (dict(kind="burst", t=1.0), "pi"),
    (dict(kind="pulse", eta=0.1), "t"),
    (dict(pr_send=1.5), "pr_send"),
    (dict(pr_recv=-0.1), "pr_recv"),
    (dict(kind="weird"), "kind"),
    (dict(w=0), "w"),
    (dict(n=-1), "n"),
])
def test_invalid_profiles_name_the_field(kw, field):
    with pytest.raises(ProfileError) as ei:
        WorkloadProfile(**kw)
    assert ei.value.field == field


def test_empty_schedule():
    assert gen_schedule(WorkloadProfile(n=0)) == []


def test_defaults_follow_the_recommended_probabilities():
    p = WorkloadProfile()
    assert p.pr_send == p.pr_recv == 0.9


def test_pulse_concentrates_around_the_middle():
    p = WorkloadProfile(kind="pulse", n=2000, t=10.0, eta=0.2, seed=3)
    times = [x for x, _ in gen_schedule(p)]
    inside = sum(abs(x - 5.0) <= 0.6 for x in times) / len(times)
    assert inside >= 0.95


def test_burst_parameters():
    mu, sigma = burst_params(2.0, 4.0)
    assert mu == pytest.approx(math.log(16 / math.sqrt(20)))
    assert sigma == pytest.approx(math.sqrt(math.log(1.25)))
    # mean of the underlying log-normal equals m, variance p^2
    assert math.exp(mu + sigma ** 2 / 2) == pytest.approx(4.0)


def test_burst_times_lie_in_timeline():
    p = WorkloadProfile(kind="burst", n=500, t=10.0, pi=5.0, seed=1)
    times = [x for x, _ in gen_schedule(p)]
    assert all(0 <= x <= 10 for x in times)
    assert statistics.median(times) < 5


def test_schedule_is_seeded():
    p = WorkloadProfile(n=50, seed=9)
    assert gen_schedule(p) == gen_schedule(WorkloadProfile(n=50, seed=9))
    assert gen_schedule(p) != gen_schedule(WorkloadProfile(n=50, seed=10))


def test_work_message_rules():
    WorkMessage(sus(0), "chunk", 0, 1, 3)
    with pytest.raises(ValueError):
        WorkMessage(sus(0), "chunk", 0, 4, 3)
    with pytest.raises(ValueError):
        WorkMessage(sus(0), "term", 0, 2, 3)
    with pytest.raises(ValueError):
        WorkMessage(sus(0), "hello", 0, 1, 1)


def test_small_run_message_count():
    r = run_master_worker(WorkloadProfile(n=2, w=3, pr_send=1.0, pr_recv=1.0))
    batches = [b for _, b in gen_schedule(WorkloadProfile(n=2, w=3))]
    assert batches == [3, 3]
    assert r.metrics.sus_messages == 16 == r.expected_messages


@pytest.mark.parametrize("mode", MODES)
def test_modes_conserve_messages_and_accept(mode):
    r = run_master_worker(WorkloadProfile(n=20, w=4, seed=5), mode)
    m = r.metrics
    assert m.sus_messages == r.expected_messages
    assert m.workers == 20
    assert 0 <= m.utilisation <= 1
    if mode != "none":
        assert m.accepts == m.verdict_count == 21


def test_run_is_deterministic():
    a = run_master_worker(WorkloadProfile(n=30, seed=2), "riarc")
    b = run_master_worker(WorkloadProfile(n=30, seed=2), "riarc")
    assert a.metrics == b.metrics and a.samples == b.samples


def test_threaded_driver_conserves_messages():
    r = run_master_worker(WorkloadProfile(n=10, w=3, seed=1), "riarc", driver="threads")
    assert r.metrics.sus_messages == r.expected_messages
    assert r.metrics.accepts == r.metrics.verdict_count == 11


def test_cv():
    assert coefficient_of_variation([5, 5, 5]) == 0
    assert coefficient_of_variation([2, 4]) == pytest.approx(1 / 3)
    assert coefficient_of_variation([7]) == 0
    with pytest.raises(ZeroDivisionError):
        coefficient_of_variation([-1, 1])
    with pytest.raises(ValueError):
        coefficient_of_variation([])


def test_repetitions_zero_variance():
    assert select_repetitions(lambda i: {"x": 1.0}, m0=4, b=2, eps=1e-9) == 4


def test_repetitions_infinite_eps():
    assert select_repetitions(lambda i: {"x": float(i + 1)}, m0=3, eps=math.inf) == 3


def reference_procedure(xs, m0, b, eps):
    """Straight transcription of the loop, on a precomputed sample list."""
    def cv(v):
        return statistics.pstdev(v) / statistics.fmean(v)
    m = m0
    c = cv(xs[:m])
    while True:
        c2 = cv(xs[:m + b])
        if c2 - c < eps:
            return m
        m, c = m + b, c2


def test_repetitions_match_reference():
    rng = random.Random(4)
    xs = [10 + rng.gauss(0, 3 / (1 + i)) for i in range(400)]
    got = select_repetitions(lambda i: {"x": xs[i]}, m0=3, b=2, eps=0.001, max_iter=150)
    assert got == reference_procedure(xs, 3, 2, 0.001)


def test_repetitions_bound():
    # a CV that keeps rising never converges
    with pytest.raises(NotConverged):
        select_repetitions(lambda i: {"x": 1.0 + 10 ** i}, m0=2, eps=1e-6, max_iter=5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.1, 100), min_size=1, max_size=20))
def test_cv_matches_formula(xs):
    mean = sum(xs) / len(xs)
    sd = math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))
    assert coefficient_of_variation(xs) == pytest.approx(sd / mean, abs=1e-12)


def test_csv_round_trip():
    r = run_master_worker(WorkloadProfile(n=5, w=2))
    text = metrics_csv([r.metrics])
    assert text.startswith(CSV_HEADER + "\n")
    (row,) = read_metrics_csv(text)
    assert int(row["sus_messages"]) == r.metrics.sus_messages
    series = series_csv([r.samples])
    assert series.splitlines()[1] == "rep,time,queued,tracer_queued"


def test_profile_file(tmp_path):
    f = tmp_path / "p.ini"
    f.write_text("kind = pulse\nn = 40\nt = 2\nspread = 0.3\npr-send = 1\n")
    p = load_profile(f)
    assert (p.kind, p.n, p.t, p.eta, p.pr_send) == ("pulse", 40, 2.0, 0.3, 1.0)
    f.write_text("bogus = 1\n")
    with pytest.raises(ProfileError):
        load_profile(f)


def test_profile_inline_comments(tmp_path):
    f = tmp_path / "p.ini"
    f.write_text("kind = burst   # skewed early\nn = 12 ; workers\nt = 1\npinch = 0.5\n")
    p = load_profile(f)
    assert (p.kind, p.n, p.pi) == ("burst", 12, 0.5)
