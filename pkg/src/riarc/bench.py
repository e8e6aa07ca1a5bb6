"""Master-worker benchmark: workload profiles, the work protocol, the four
instrumentation modes and the repetition procedure."""
from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import random
import statistics
from collections import deque
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

from .monitors import (InlineMonitoring, MasterSound, MonitorRegistry, SliceMap, Verdict,
                       WorkerSound, by_signature)
from .runtime import SUS, TRACER, Pid, Runtime, ThreadedRuntime
from .tracer import start
from .tracing import OnlineTracing

log = logging.getLogger(__name__)

KINDS = ("steady", "pulse", "burst")
MODES = ("none", "inline", "central", "riarc")
DRIVERS = ("sim", "threads")
CSV_HEADER = "# riarc-bench v1"

MASTER_SIG = "master"
WORKER_SIG = "worker"

# logical costs in seconds
MASTER_COST = 7e-6
WORKER_COST = 2e-6
ANALYSIS_COST = 6e-6
CORES = 4


class ProfileError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


class ProtocolError(RuntimeError):
    """The master saw a message the work protocol does not allow."""


@dataclass
class WorkloadProfile:
    kind: str = "steady"
    n: int = 100
    w: int = 10
    t: float | None = None
    lam: float = 5000.0
    eta: float | None = None
    pi: float | None = None
    burst_mean: float | None = None
    pr_send: float = 0.9
    pr_recv: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProfileError("kind", f"must be one of {', '.join(KINDS)}")
        if self.n < 0:
            raise ProfileError("n", "must be non-negative")
        if self.w < 1:
            raise ProfileError("w", "must be at least 1")
        for name in ("pr_send", "pr_recv"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ProfileError(name, "must lie in [0, 1]")
        if self.pr_send == 0.0 and self.n:
            # every turn would be skipped and the master would never finish
            raise ProfileError("pr_send", "must be positive for the run to terminate")
        if self.kind == "steady":
            if not self.lam > 0:
                raise ProfileError("lam", "steady needs a positive rate")
            t = math.ceil(self.n / self.lam)
            if self.t is not None and self.t != t:
                raise ProfileError("t", f"steady fixes t = ceil(n/lam) = {t}")
            self.t = t
        else:
            if self.t is None or not self.t > 0:
                raise ProfileError("t", f"{self.kind} needs an explicit positive t")
        if self.kind == "pulse" and not (self.eta and self.eta > 0):
            raise ProfileError("eta", "pulse needs a positive spread")
        if self.kind == "burst":
            if not (self.pi and self.pi > 0):
                raise ProfileError("pi", "burst needs a positive pinch")
            if self.burst_mean is None:
                self.burst_mean = self.t / 4
            if not self.burst_mean > 0:
                raise ProfileError("burst_mean", "must be positive")

    @classmethod
    def from_mapping(cls, data: dict) -> "WorkloadProfile":
        conv = {"kind": str, "n": int, "w": int, "seed": int}
        known = {f.name for f in fields(cls)}
        aliases = {"lambda": "lam", "rate": "lam", "spread": "eta", "pinch": "pi",
                   "burst-mean": "burst_mean", "pr-send": "pr_send", "pr-recv": "pr_recv"}
        kw = {}
        for k, v in data.items():
            k = aliases.get(k.strip().lower(), k.strip().lower())
            if k not in known:
                raise ProfileError(k, "unknown profile key")
            try:
                kw[k] = conv.get(k, float)(v)
            except ValueError:
                raise ProfileError(k, f"cannot parse {v!r}") from None
        return cls(**kw)


def read_profile_mapping(path) -> dict:
    """Raw keys of a flat ``key = value`` file (no section header needed)."""
    text = Path(path).read_text(encoding="utf-8")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[profile]\n" + text)
    except configparser.Error as exc:
        raise ProfileError("profile", str(exc).splitlines()[0]) from None
    return dict(cp["profile"])


def load_profile(path) -> WorkloadProfile:
    return WorkloadProfile.from_mapping(read_profile_mapping(path))


def burst_params(p: float, m: float) -> tuple[float, float]:
    mu = math.log(m * m / math.sqrt(p * p + m * m))
    sigma = math.sqrt(math.log(1 + p * p / (m * m)))
    return mu, sigma


def spawn_times(profile: WorkloadProfile, rng: random.Random) -> list[float]:
    n, t = profile.n, profile.t
    if profile.kind == "steady":
        out, now = [], 0.0
        for _ in range(n):
            now += rng.expovariate(profile.lam)
            out.append(now)
        return out
    if profile.kind == "pulse":
        return sorted(min(max(rng.gauss(t / 2, profile.eta), 0.0), t) for _ in range(n))
    mu, sigma = burst_params(profile.pi, profile.burst_mean)
    out = []
    for _ in range(n):
        for _try in range(1000):
            x = rng.lognormvariate(mu, sigma)
            if x <= t:
                break
        else:
            x = t
        out.append(x)
    return sorted(out)


def batch_size(w: int, rng: random.Random) -> int:
    return max(1, round(rng.gauss(w, 0.02 * w)))


def gen_schedule(profile: WorkloadProfile) -> list[tuple[float, int]]:
    """(spawn time, batch size) for each worker, in spawn order."""
    rng = random.Random(f"schedule|{profile.seed}")
    times = spawn_times(profile, rng)
    return [(x, batch_size(profile.w, rng)) for x in times]


def expected_messages(schedule) -> int:
    return sum(2 * b + 2 for _, b in schedule)


# the work protocol ----------------------------------------------------

@dataclass(frozen=True)
class WorkMessage:
    sender: Pid
    tag: str
    id: int
    req_num: int
    num_reqs: int

    def __post_init__(self):
        if self.tag not in ("chunk", "ack", "term", "end"):
            raise ValueError(f"unknown tag {self.tag!r}")
        if not 1 <= self.req_num <= self.num_reqs:
            raise ValueError("req_num must lie in [1, num_reqs]")
        if self.tag in ("term", "end") and self.req_num != self.num_reqs:
            raise ValueError("term/end carry req_num = num_reqs")


class _Task:
    __slots__ = ("pid", "id", "batch", "next", "acks", "termed")

    def __init__(self, pid, wid, batch):
        self.pid, self.id, self.batch = pid, wid, batch
        self.next = 1
        self.acks = 0
        self.termed = False


@dataclass
class _Log:
    rtts: list = field(default_factory=list)
    spawned: int = 0
    ended: int = 0
    errors: list = field(default_factory=list)


def master(ctx, schedule, pr_send, pr_recv, seed, out: _Log, cost=MASTER_COST):
    rng = random.Random(f"master|{seed}")
    pending = deque(schedule)
    work: deque[_Task] = deque()
    tasks: dict[int, _Task] = {}
    sent_at: dict[tuple, float] = {}

    def handle(m: WorkMessage):
        ctx.charge(cost)
        task = tasks.get(m.id)
        if task is None:
            raise ProtocolError(f"message from unknown worker {m.id}")
        if m.tag == "ack":
            if m.req_num != task.acks + 1 or m.req_num >= task.next:
                raise ProtocolError(f"worker {m.id}: unexpected ack {m.req_num}")
            task.acks += 1
            out.rtts.append(ctx.now - sent_at.pop((m.id, m.req_num)))
            if task.acks == task.batch:
                ctx.charge(cost)
                ctx.send(task.pid, WorkMessage(ctx.self, "term", m.id, task.batch, task.batch))
                task.termed = True
        elif m.tag == "end":
            if not task.termed:
                raise ProtocolError(f"worker {m.id}: end before term")
            work.remove(task)
            del tasks[m.id]
            out.ended += 1
        else:
            raise ProtocolError(f"master got {m.tag}")

    while pending or work:
        while pending and pending[0][0] <= ctx.now:
            _, batch = pending.popleft()
            wid = out.spawned
            out.spawned += 1
            pid = ctx.spawn(worker, wid, sig=WORKER_SIG)
            task = _Task(pid, wid, batch)
            work.append(task)
            tasks[wid] = task
        # one send turn
        if work:
            task = work[0]
            work.rotate(-1)
            while task.next <= task.batch and rng.random() <= pr_send:
                ctx.charge(cost)
                ctx.send(task.pid, WorkMessage(ctx.self, "chunk", task.id, task.next, task.batch))
                sent_at[(task.id, task.next)] = ctx.now
                task.next += 1
        # dequeue responses while the trial succeeds
        while rng.random() <= pr_recv:
            m = yield ctx.receive(timeout=0)
            if m is None:
                break
            handle(m)
        if not pending and not work:
            break
        if all(t.next > t.batch for t in work):
            # nothing to send: wait for a response or the next spawn
            wait = max(0.0, pending[0][0] - ctx.now) if pending else None
            if work or wait is not None:
                m = yield ctx.receive(timeout=wait)
                if m is not None:
                    handle(m)
        else:
            yield


def worker(ctx, wid, cost=WORKER_COST):
    while True:
        m = yield ctx.receive()
        ctx.charge(cost)
        if m.tag == "chunk":
            ctx.send(m.sender, WorkMessage(ctx.self, "ack", wid, m.req_num, m.num_reqs))
        elif m.tag == "term":
            ctx.send(m.sender, WorkMessage(ctx.self, "end", wid, m.num_reqs, m.num_reqs))
            return


def _guarded(fn, out: _Log):
    def body(ctx, *args):
        try:
            yield from fn(ctx, *args)
        except ProtocolError as exc:
            out.errors.append(exc)
    return body


# runs -----------------------------------------------------------------

@dataclass
class RunMetrics:
    mode: str
    driver: str
    kind: str
    n: int
    w: int
    seed: int
    mean_response_ms: float
    max_queued: int
    mean_queued: float
    central_backlog: int
    max_tracer_backlog: int
    utilisation: float
    duration: float
    sus_messages: int
    tracer_messages: int
    events: int
    tracers: int
    workers: int
    accepts: int
    verdict_count: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [_fmt(getattr(self, c)) for c in self.columns()]


@dataclass
class BenchResult:
    metrics: RunMetrics
    verdicts: list          # sorted (owner pid text, verdict value)
    samples: list           # (time, total queued, tracer queued)
    expected_messages: int


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return v


def run_master_worker(profile: WorkloadProfile, mode: str = "none", driver: str = "sim",
                      sample_interval: float | None = None, timeout: float = 60.0) -> BenchResult:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}")
    if driver not in DRIVERS:
        raise ValueError(f"driver must be one of {', '.join(DRIVERS)}")
    schedule = gen_schedule(profile)
    if sample_interval is None:
        sample_interval = max(profile.t, 1e-3) / 100
    if driver == "sim":
        rt = Runtime(seed=f"bench|{profile.seed}|{mode}", cores=CORES,
                     sample_interval=sample_interval)
    else:
        rt = ThreadedRuntime(sample_interval=sample_interval)
    out = _Log()
    body = _guarded(master, out)
    args = (schedule, profile.pr_send, profile.pr_recv, profile.seed, out)
    specs = {MASTER_SIG: MasterSound(), WORKER_SIG: WorkerSound()}
    env = inline = backend = None
    central = None
    if mode == "none":
        rt.spawn(body, *args, sig=MASTER_SIG)
    elif mode == "inline":
        inline = InlineMonitoring(rt, SliceMap(specs.get, "inline"), ANALYSIS_COST)
        inline.launch(body, *args, sig=MASTER_SIG)
    else:
        backend = OnlineTracing(rt)
        reg = MonitorRegistry()
        reg.register(mode, by_signature(specs, mode))
        lam = {MASTER_SIG: mode} if mode == "central" else {MASTER_SIG: mode, WORKER_SIG: mode}
        _, central, env = start(backend, MASTER_SIG, lam, reg, body, args,
                                analysis_cost=ANALYSIS_COST)
    if driver == "sim":
        rt.run()
    else:
        rt.run(timeout=timeout)
    if out.errors:
        raise out.errors[0]

    if inline is not None:
        verdicts = inline.verdicts()
        events = inline.analysed
    elif env is not None:
        env.finalize()
        verdicts = {o: v for o, v in env.verdicts()}
        events = backend.emitted
    else:
        verdicts, events = {}, 0
    vlist = sorted((str(o), v.value) for o, v in verdicts.items())
    st = rt.stats
    tracer_peaks = [n for p, n in st.max_mailbox.items() if p.kind == TRACER]
    rtts = out.rtts
    m = RunMetrics(
        mode=mode, driver=driver, kind=profile.kind, n=profile.n, w=profile.w, seed=profile.seed,
        mean_response_ms=1000 * statistics.fmean(rtts) if rtts else 0.0,
        max_queued=st.max_queued,
        mean_queued=st.mean_queued(),
        central_backlog=st.max_mailbox.get(central, 0) if central else 0,
        max_tracer_backlog=max(tracer_peaks, default=0),
        utilisation=min(1.0, st.utilisation(rt.cores)),
        duration=st.makespan,
        sus_messages=st.sent[SUS],
        tracer_messages=st.sent[TRACER],
        events=events,
        tracers=len(tracer_peaks),
        workers=out.spawned,
        accepts=sum(1 for _, v in vlist if v == Verdict.ACCEPT.value),
        verdict_count=len(vlist),
    )
    return BenchResult(m, vlist, list(st.samples), expected_messages(schedule))


# repetitions ---------------------------------------------------------

class NotConverged(RuntimeError):
    def __init__(self, m: int, deltas: dict):
        super().__init__(f"CV still moving after {m} repetitions: {deltas}")
        self.m = m
        self.deltas = deltas


def coefficient_of_variation(samples) -> float:
    xs = list(samples)
    if not xs:
        raise ValueError("need at least one sample")
    mean = statistics.fmean(xs)
    if mean == 0:
        raise ZeroDivisionError("CV is undefined for a zero mean")
    return statistics.pstdev(xs) / mean


def _cvs(rows: list[dict]) -> dict:
    keys = rows[0].keys()
    out = {}
    for k in keys:
        xs = [r[k] for r in rows]
        out[k] = 0.0 if all(x == xs[0] for x in xs) else coefficient_of_variation(xs)
    return out


def repeat_until_stable(experiment: Callable[[int], dict], m0: int = 3, b: int = 1,
                        eps: float = 0.01, max_iter: int = 50) -> tuple[int, list[dict]]:
    """Grow the repetition count by ``b`` until the CV of every measured
    variable changes by less than ``eps``; return ``m`` and all rows run."""
    if m0 < 1 or b < 1:
        raise ValueError("m0 and b must be at least 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    rows = [experiment(i) for i in range(m0)]
    m = m0
    cv = _cvs(rows)
    for _ in range(max_iter):
        rows += [experiment(i) for i in range(m, m + b)]
        cv2 = _cvs(rows)
        deltas = {k: cv2[k] - cv[k] for k in cv}
        if all(d < eps for d in deltas.values()):
            return m, rows
        m, cv = m + b, cv2
    raise NotConverged(m, deltas)


def select_repetitions(experiment: Callable[[int], dict], m0: int = 3, b: int = 1,
                       eps: float = 0.01, max_iter: int = 50) -> int:
    return repeat_until_stable(experiment, m0, b, eps, max_iter)[0]


def measured(m: RunMetrics) -> dict:
    """The variables the repetition procedure watches."""
    return {"mean_response_ms": m.mean_response_ms, "max_queued": m.max_queued,
            "utilisation": m.utilisation}


# output -----------------------------------------------------------------

def metrics_csv(rows: list[RunMetrics]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["rep"] + RunMetrics.columns())
    for i, r in enumerate(rows):
        wr.writerow([i] + r.row())
    return buf.getvalue()


def series_csv(runs: list[list]) -> str:
    """Backlog samples of each repetition, one row per sample."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["rep", "time", "queued", "tracer_queued"])
    for rep, samples in enumerate(runs):
        for t, q, tq in samples:
            wr.writerow([rep, _fmt(float(t)), q, tq])
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[dict]:
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("not a riarc-bench v1 file")
    return list(csv.DictReader(lines[1:]))

