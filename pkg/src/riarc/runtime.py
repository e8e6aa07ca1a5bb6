"""Actor-model execution engine.

Processes are generator functions ``fn(ctx, *args)``.  A process performs
sends, spawns and cost charges through its :class:`Context` without giving up
control, and yields a :class:`Receive` request (or ``None``) whenever it is
willing to be preempted.  Two drivers run the same process code:

* :class:`Runtime` is a single-threaded discrete-event simulator.  Every
  choice it makes is drawn from a seeded RNG or an explicit schedule, so a
  (seed, schedule, program) triple replays bit-identically.
* :class:`ThreadedRuntime` gives each process its own thread.

Mailboxes keep pairwise FIFO order.  In the simulator every mailbox is in
fact totally ordered by post time, which is stronger than pairwise FIFO and
is what makes the flush barrier of ``clear`` trivial.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

log = logging.getLogger(__name__)

SUS = "sus"
TRACER = "tracer"
SYS = "sys"  # infrastructure processes such as the offline replay engine
KINDS = (SUS, TRACER, SYS)


@dataclass(frozen=True, order=True)
class Pid:
    kind: str
    serial: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pid kind {self.kind!r}")
        if self.serial < 0:
            raise ValueError("pid serial must be non-negative")

    def __str__(self):
        return f"{self.kind}:{self.serial}"

    @property
    def is_sus(self) -> bool:
        return self.kind == SUS

    @classmethod
    def parse(cls, text: str, default_kind: str = SUS) -> "Pid":
        """Parse ``"kind:serial"`` or a bare serial."""
        kind, sep, serial = text.partition(":")
        if not sep:
            kind, serial = default_kind, text
        if not serial.isdigit():
            raise ValueError(f"bad pid {text!r}")
        return cls(kind, int(serial))


def sus(serial: int) -> Pid:
    return Pid(SUS, serial)


def tracer(serial: int) -> Pid:
    return Pid(TRACER, serial)


@dataclass(frozen=True)
class Receive:
    """Yielded by a process to take the earliest message matching ``pred``.

    ``timeout=None`` blocks; a number bounds the wait (``0`` is a poll) and
    the process resumes with ``None`` when it expires.
    """
    pred: Callable[[Any], bool] | None = None
    timeout: float | None = None


class ScheduleError(IndexError):
    pass


class Context:
    """The handle a process uses to talk to its runtime."""

    __slots__ = ("runtime", "self")

    def __init__(self, runtime, pid: Pid):
        self.runtime = runtime
        self.self = pid

    @property
    def now(self) -> float:
        return self.runtime.now

    def send(self, to: Pid, msg) -> None:
        self.runtime.send(self.self, to, msg)

    def spawn(self, fn, *args, sig: str | None = None, kind: str = SUS,
              paused: bool = False) -> Pid:
        return self.runtime.spawn(fn, *args, sig=sig, kind=kind, paused=paused,
                                  parent=self.self)

    def receive(self, pred=None, timeout=None) -> Receive:
        return Receive(pred, timeout)

    def charge(self, dt: float) -> None:
        self.runtime.charge(dt)


class Observer:
    """Hooks the runtime calls for actions of SuS processes."""

    def on_spawn(self, parent: Pid, child: Pid, sig: str | None) -> None: ...
    def on_send(self, sender: Pid, to: Pid, msg) -> None: ...
    def on_receive(self, pid: Pid, msg) -> None: ...
    def on_exit(self, pid: Pid) -> None: ...


@dataclass
class RunStats:
    steps: int = 0
    busy: float = 0.0
    makespan: float = 0.0
    sent: dict = field(default_factory=lambda: {SUS: 0, TRACER: 0, SYS: 0, None: 0})
    dropped: int = 0
    queued: int = 0
    max_queued: int = 0
    queued_area: float = 0.0
    max_mailbox: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)

    def utilisation(self, cores: int | None) -> float:
        if not self.makespan:
            return 0.0
        return self.busy / ((cores or 1) * self.makespan)

    def mean_queued(self) -> float:
        return self.queued_area / self.makespan if self.makespan else 0.0


class _Proc:
    __slots__ = ("pid", "gen", "sig", "parent", "mailbox", "last_arrival",
                 "ready", "waiting", "deadline", "paused", "alive", "version",
                 "sched", "peak")

    def __init__(self, pid, gen, sig, parent, paused, ready):
        self.pid = pid
        self.gen = gen
        self.sig = sig
        self.parent = parent
        self.mailbox = deque()  # (effective arrival, sender, msg)
        self.last_arrival = 0.0
        self.ready = ready
        self.waiting = None
        self.deadline = None
        self.paused = paused
        self.alive = True
        self.version = 0
        self.sched = None
        self.peak = 0

    def first_match(self, limit=None):
        pred = self.waiting.pred if self.waiting else None
        for i, (arr, _, msg) in enumerate(self.mailbox):
            if limit is not None and arr > limit:
                return None
            if pred is None or pred(msg):
                return i
        return None


class _BaseRuntime:
    def __init__(self):
        self._procs: dict[Pid, _Proc] = {}
        self._serials = {k: itertools.count() for k in KINDS}
        self.observer: Observer | None = None
        self.stats = RunStats()
        self.exits: dict[Pid, float] = {}

    def _new_pid(self, kind: str) -> Pid:
        return Pid(kind, next(self._serials[kind]))

    def alive(self, pid: Pid) -> bool:
        p = self._procs.get(pid)
        return bool(p and p.alive)

    def signature(self, pid: Pid) -> str | None:
        p = self._procs.get(pid)
        return p.sig if p else None

    def live(self, kind: str | None = None) -> list[Pid]:
        return sorted(p.pid for p in self._procs.values()
                      if p.alive and (kind is None or p.pid.kind == kind))

    def mailbox(self, pid: Pid) -> list:
        p = self._procs.get(pid)
        return [m for _, _, m in p.mailbox] if p else []

    def _observe(self, pid: Pid | None) -> bool:
        return self.observer is not None and pid is not None and pid.kind == SUS


class Runtime(_BaseRuntime):
    """Deterministic discrete-event driver.

    Each process carries the time at which it may next act.  The scheduler
    picks the enabled process with the earliest such time (ties broken by the
    seeded RNG or by ``schedule``) and runs it on the earliest free core;
    costs charged during the action advance that process and core.
    """

    def __init__(self, seed: int | str = 0, cores: int | None = None,
                 schedule: Iterable[int] | None = None, hop_cost: float = 0.0,
                 sample_interval: float | None = None, record: bool = False):
        super().__init__()
        self.rng = random.Random(seed)
        self.cores = cores
        self._free = [0.0] * cores if cores else None
        self._schedule = deque(schedule or ())
        self.hop_cost = hop_cost
        self.sample_interval = sample_interval
        self._next_sample = 0.0 if sample_interval else None
        self._heap: list = []
        self._tick = itertools.count()
        self._current: _Proc | None = None
        self._start = 0.0
        self._cost = 0.0
        self._last_t = 0.0
        self.actions: list[Pid] | None = [] if record else None
        self.deliveries: list | None = [] if record else None

    # clock -----------------------------------------------------------
    @property
    def now(self) -> float:
        if self._current is None:
            return self._start
        return self._start + self._cost

    def charge(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("negative cost")
        if self._current is not None:
            self._cost += dt

    # process management ----------------------------------------------
    def spawn(self, fn, *args, sig=None, kind=SUS, paused=False, parent=None) -> Pid:
        pid = self._new_pid(kind)
        gen = fn(Context(self, pid), *args)
        if not hasattr(gen, "send"):
            raise TypeError(f"{fn!r} is not a generator function")
        proc = _Proc(pid, gen, sig, parent, paused, self.now)
        self._procs[pid] = proc
        self.stats.max_mailbox[pid] = 0
        if self._observe(parent) and kind == SUS:
            self.observer.on_spawn(parent, pid, sig)
        if not paused:
            self._enable(proc, proc.ready)
        return pid

    def resume(self, pid: Pid) -> None:
        proc = self._procs[pid]
        if proc.paused:
            proc.paused = False
            proc.ready = max(proc.ready, self.now)
            self._reschedule(proc)

    # messaging -------------------------------------------------------
    def send(self, sender: Pid | None, to: Pid, msg) -> None:
        if self._observe(sender):
            self.observer.on_send(sender, to, msg)
        self.stats.sent[sender.kind if sender else None] += 1
        self._deliver(sender, to, msg)

    def post(self, to: Pid, msg) -> None:
        """Deliver on behalf of the tracing infrastructure."""
        self.stats.sent[None] += 1
        self._deliver(None, to, msg)

    def _deliver(self, sender, to, msg) -> None:
        proc = self._procs.get(to)
        if proc is None or not proc.alive:
            self.stats.dropped += 1
            return
        arrival = max(self.now + self.hop_cost, proc.last_arrival)
        proc.last_arrival = arrival
        proc.mailbox.append((arrival, sender, msg))
        n = len(proc.mailbox)
        if n > proc.peak:
            proc.peak = n
            self.stats.max_mailbox[to] = n
        self._queued(+1)
        if proc.waiting is not None and not proc.paused:
            pred = proc.waiting.pred
            if pred is None or pred(msg):
                self._reschedule(proc)

    def _queued(self, delta: int) -> None:
        st = self.stats
        t = self.now
        if t > self._last_t:
            st.queued_area += st.queued * (t - self._last_t)
            self._last_t = t
        st.queued += delta
        if st.queued > st.max_queued:
            st.max_queued = st.queued

    # scheduling ------------------------------------------------------
    def _avail(self, proc: _Proc):
        if not proc.alive or proc.paused:
            return None
        if proc.waiting is None:
            return proc.ready
        best = proc.deadline
        i = proc.first_match()
        if i is not None:
            arr = proc.mailbox[i][0]
            best = arr if best is None else min(best, arr)
        return None if best is None else max(best, proc.ready)

    def _reschedule(self, proc: _Proc) -> None:
        avail = self._avail(proc)
        if avail is not None and (proc.sched is None or avail < proc.sched):
            self._enable(proc, avail)

    def _enable(self, proc: _Proc, avail: float) -> None:
        proc.version += 1
        proc.sched = avail
        heapq.heappush(self._heap, (avail, self.rng.random(), next(self._tick),
                                    proc.pid, proc.version))

    def _valid(self, entry) -> bool:
        proc = self._procs[entry[3]]
        return proc.alive and not proc.paused and entry[4] == proc.version

    def _pick(self):
        heap = self._heap
        while heap and not self._valid(heap[0]):
            heapq.heappop(heap)
        if not heap:
            return None
        if not self._schedule:
            return heapq.heappop(heap)
        first = heapq.heappop(heap)
        tied = [first]
        while heap:
            if not self._valid(heap[0]):
                heapq.heappop(heap)
            elif heap[0][0] == first[0]:
                tied.append(heapq.heappop(heap))
            else:
                break
        tied.sort(key=lambda e: e[3])
        idx = self._schedule.popleft()
        if not 0 <= idx < len(tied):
            for e in tied:
                heapq.heappush(heap, e)
            raise ScheduleError(f"schedule index {idx} out of range for {len(tied)} enabled")
        chosen = tied.pop(idx)
        for e in tied:
            heapq.heappush(heap, e)
        return chosen

    def enabled(self) -> list[Pid]:
        return sorted({e[3] for e in self._heap if self._valid(e)})

    def step(self) -> bool:
        """Run one process action; False when the system is quiescent."""
        entry = self._pick()
        if entry is None:
            return False
        avail, proc = entry[0], self._procs[entry[3]]
        proc.sched = None
        if self._free is not None:
            start = max(avail, self._free[0])
        else:
            start = avail
        self._current = None
        self._start = start
        self._sample(start)
        self._current = proc
        self._cost = 0.0
        self.stats.steps += 1
        if self.actions is not None:
            self.actions.append(proc.pid)
        value = None
        if proc.waiting is not None:
            i = proc.first_match(limit=start)
            if i is not None:
                _, sender, value = proc.mailbox[i]
                del proc.mailbox[i]
                self._queued(-1)
                if self.deliveries is not None:
                    self.deliveries.append((proc.pid, sender, value))
                if self._observe(proc.pid):
                    self.observer.on_receive(proc.pid, value)
            proc.waiting = None
            proc.deadline = None
        try:
            req = proc.gen.send(value)
        except StopIteration:
            req = _EXIT
            self._exit(proc)
        end = start + self._cost
        proc.ready = end
        if self._free is not None:
            heapq.heapreplace(self._free, end)
        self.stats.busy += self._cost
        if end > self.stats.makespan:
            self.stats.makespan = end
        if req is _EXIT:
            pass
        elif req is None:
            self._enable(proc, end)
        elif isinstance(req, Receive):
            proc.waiting = req
            proc.deadline = None if req.timeout is None else end + req.timeout
            self._reschedule(proc)
        else:
            self._current = None
            raise TypeError(f"{proc.pid} yielded {req!r}")
        self._current = None
        self._start = start
        return True

    def _exit(self, proc: _Proc) -> None:
        proc.alive = False
        self.exits[proc.pid] = self.now
        if self._observe(proc.pid):
            self.observer.on_exit(proc.pid)
        if proc.mailbox:
            self._queued(-len(proc.mailbox))
            proc.mailbox.clear()
        proc.gen = None

    def _sample(self, t: float) -> None:
        if self._next_sample is None:
            return
        while t >= self._next_sample:
            tracers = sum(len(p.mailbox) for p in self._procs.values()
                          if p.alive and p.pid.kind == TRACER)
            self.stats.samples.append((self._next_sample, self.stats.queued, tracers))
            self._next_sample += self.sample_interval

    def run(self, max_steps: int | None = None) -> int:
        n = 0
        while max_steps is None or n < max_steps:
            if not self.step():
                break
            n += 1
        if self._current is None and self._last_t < self.stats.makespan:
            self._start = self.stats.makespan
            self._queued(0)
        return n


_EXIT = object()


class ThreadedRuntime(_BaseRuntime):
    """One thread per process; a global lock serialises process actions.

    Costs charged during an action are paid as a busy-wait after the lock is
    released, so other processes run while one is "computing".
    """

    def __init__(self, hop_cost: float = 0.0, sample_interval: float | None = None):
        super().__init__()
        self.hop_cost = hop_cost
        self.sample_interval = sample_interval
        self.cores = None
        self._lock = threading.RLock()
        self._cv = threading.Condition(self._lock)
        self._active = 0
        self._stop = False
        self._t0 = time.perf_counter()
        self._next_sample = 0.0 if sample_interval else None
        self._local = threading.local()
        self._threads: list[threading.Thread] = []
        self._last_t = 0.0

    @property
    def now(self) -> float:
        return time.perf_counter() - self._t0

    def charge(self, dt: float) -> None:
        st = getattr(self._local, "cost", None)
        if st is not None:
            self._local.cost += dt

    def spawn(self, fn, *args, sig=None, kind=SUS, paused=False, parent=None) -> Pid:
        with self._lock:
            pid = self._new_pid(kind)
            gen = fn(Context(self, pid), *args)
            proc = _Proc(pid, gen, sig, parent, paused, 0.0)
            self._procs[pid] = proc
            self.stats.max_mailbox[pid] = 0
            if self._observe(parent) and kind == SUS:
                self.observer.on_spawn(parent, pid, sig)
            if not paused:
                self._active += 1
            th = threading.Thread(target=self._main, args=(proc,), daemon=True,
                                  name=str(pid))
            self._threads.append(th)
            th.start()
            return pid

    def resume(self, pid: Pid) -> None:
        with self._lock:
            proc = self._procs[pid]
            if proc.paused:
                proc.paused = False
                self._active += 1
                self._cv.notify_all()

    def send(self, sender, to, msg) -> None:
        with self._lock:
            if self._observe(sender):
                self.observer.on_send(sender, to, msg)
            self.stats.sent[sender.kind if sender else None] += 1
            self._deliver(sender, to, msg)

    def post(self, to, msg) -> None:
        with self._lock:
            self.stats.sent[None] += 1
            self._deliver(None, to, msg)

    def _deliver(self, sender, to, msg) -> None:
        proc = self._procs.get(to)
        if proc is None or not proc.alive:
            self.stats.dropped += 1
            return
        proc.mailbox.append((0.0, sender, msg))
        n = len(proc.mailbox)
        if n > proc.peak:
            proc.peak = n
            self.stats.max_mailbox[to] = n
        self._queued(+1)
        if proc.sched == "blocked":
            pred = proc.waiting.pred if proc.waiting else None
            if pred is None or pred(msg):
                proc.sched = None
                self._active += 1
        self._cv.notify_all()

    def _queued(self, delta: int) -> None:
        st = self.stats
        t = self.now
        st.queued_area += st.queued * max(0.0, t - self._last_t)
        self._last_t = t
        st.queued += delta
        st.max_queued = max(st.max_queued, st.queued)
        if self._next_sample is not None:
            while t >= self._next_sample:
                tracers = sum(len(p.mailbox) for p in self._procs.values()
                              if p.alive and p.pid.kind == TRACER)
                st.samples.append((self._next_sample, st.queued, tracers))
                self._next_sample += self.sample_interval

    def _main(self, proc: _Proc) -> None:
        value = None
        with self._lock:
            while proc.paused and not self._stop:
                self._cv.wait()
        while True:
            self._local.cost = 0.0
            with self._lock:
                if self._stop:
                    proc.alive = False
                    return
                self.stats.steps += 1
                try:
                    req = proc.gen.send(value)
                except StopIteration:
                    req = _EXIT
                except BaseException:
                    log.exception("process %s crashed", proc.pid)
                    req = _EXIT
                cost = self._local.cost
                self.stats.busy += cost
                if req is _EXIT:
                    proc.alive = False
                    self.exits[proc.pid] = self.now
                    if self._observe(proc.pid):
                        self.observer.on_exit(proc.pid)
                    self._queued(-len(proc.mailbox))
                    proc.mailbox.clear()
            self._local.cost = None
            _spin(cost)
            if req is _EXIT:
                with self._lock:
                    self._active -= 1
                    self.stats.makespan = max(self.stats.makespan, self.now)
                    self._cv.notify_all()
                return
            value = None
            if isinstance(req, Receive):
                self._local.cost = 0.0
                value = self._wait(proc, req)
                if value is _STOP:
                    return
                extra, self._local.cost = self._local.cost, None
                with self._lock:
                    self.stats.busy += extra
                _spin(extra)

    def _wait(self, proc: _Proc, req: Receive):
        deadline = None if req.timeout is None else self.now + req.timeout
        with self._lock:
            proc.waiting = req
            while True:
                if self._stop:
                    proc.alive = False
                    return _STOP
                i = proc.first_match()
                if i is not None:
                    if proc.sched == "blocked":
                        proc.sched = None
                        self._active += 1
                    _, _, msg = proc.mailbox[i]
                    del proc.mailbox[i]
                    self._queued(-1)
                    proc.waiting = None
                    if self._observe(proc.pid):
                        self.observer.on_receive(proc.pid, msg)
                    return msg
                if deadline is not None:
                    left = deadline - self.now
                    if left <= 0:
                        proc.waiting = None
                        return None
                    self._cv.wait(left)
                else:
                    if proc.sched != "blocked":
                        proc.sched = "blocked"
                        self._active -= 1
                        self._cv.notify_all()
                    self._cv.wait()

    def run(self, timeout: float | None = None) -> int:
        """Block until quiescent (no process can progress) or timeout."""
        end = None if timeout is None else time.perf_counter() + timeout
        with self._lock:
            while self._active > 0:
                left = None if end is None else end - time.perf_counter()
                if left is not None and left <= 0:
                    break
                self._cv.wait(left if left is not None else 0.05)
            self.stats.makespan = max(self.stats.makespan, self.now)
            self._stop = True
            self._cv.notify_all()
        for th in self._threads:
            th.join(timeout=1.0)
        return self.stats.steps


_STOP = object()


def _spin(dt: float) -> None:
    if dt <= 0:
        return
    end = time.perf_counter() + dt
    while time.perf_counter() < end:
        pass
