"""``riarc`` command line: replay, check, systest, bench and permute.

Exit codes: 0 pass, 1 verification failure, 2 input error, 3 cap exceeded.
Set ``RIARC_LOG`` (e.g. ``DEBUG``) for log output on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from . import bench as B
from . import verify as V
from .protocol import TraceParseError, read_trace_file, encode_trace
from .runtime import Pid
from .systems import SYSTEMS, from_trace, get_system

log = logging.getLogger("riarc")

OK, FAIL, BAD_INPUT, CAP = 0, 1, 2, 3


class InputError(Exception):
    pass


def _setup_logging():
    level = os.environ.get("RIARC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _system(args):
    try:
        return get_system(args.system)
    except KeyError as exc:
        raise InputError(exc.args[0]) from None


def _partition(text: str, system, name=None) -> V.Configuration:
    """Groups separated by ``;``, members by ``,``; members are process
    names of the system (bare serials for recordings)."""
    cfg = V.Configuration.parse(text, name)
    fixed = []
    for g in cfg.groups:
        members = set()
        for x in g:
            if x in system.names:
                members.add(x)
                continue
            try:
                pid = Pid.parse(x)
            except ValueError:
                raise InputError(f"unknown process {x!r}") from None
            if pid not in system.locals:
                raise InputError(f"unknown process {x!r}")
            members.add(system.name_of(pid))
        fixed.append(frozenset(members))
    try:
        return V.Configuration(cfg.name, tuple(fixed))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _print_case(res: V.CaseResult, out=None):
    for name, why in sorted(res.unsound.items()):
        print(f"unsound {name}: {why}", file=out)
    for v in res.violations:
        print(f"violation {v.id} at {v.tracer}: {v.detail}", file=out)
    for t in res.redundant:
        print(f"redundant tracer {t} alive at quiescence", file=out)
    if res.orphans:
        print(f"{res.orphans} recorded events never reached a tracer", file=out)


# replay -------------------------------------------------------------

def cmd_replay(args) -> int:
    tf = read_trace_file(args.trace)
    root = tf.root[0] if tf.root else None
    rsig = tf.root[1] if tf.root else None
    if args.system:
        system = _system(args)
    else:
        system = from_trace(tf.events, root, rsig, name=Path(args.trace).stem)
        bad = _malformed(system)
        if bad:
            for line in bad:
                print(line)
            return FAIL
    cfg = _partition(args.config, system) if args.config else V.full_decentralisation(system)
    try:
        res, hist, _ = V.run_case(system, tf.events, cfg, kinds=args.monitors or ())
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.history:
        Path(args.history).write_text(hist.to_jsonl(), encoding="utf-8")
    analysed = hist.analysed()
    for name, pid in sorted(system.names.items(), key=lambda kv: kv[1]):
        evs = [e for _, e in analysed.get(pid, [])]
        status = "sound" if name not in res.unsound else "unsound"
        print(f"{name}\t{pid}\t{len(evs)} events\t{status}")
    _print_case(res)
    print("PASS" if res.passed else "FAIL")
    return OK if res.passed else FAIL


def _malformed(system) -> list[str]:
    """Recorded local traces that cannot be real executions."""
    out = []
    for name, pid in sorted(system.names.items(), key=lambda kv: kv[1]):
        evs = system.locals[pid]
        for i, e in enumerate(evs):
            if e.label.value == "exit" and i != len(evs) - 1:
                out.append(f"inconsistent {name}: events after exit at position {i + 1}")
                break
    return out


# check --------------------------------------------------------------

def cmd_check(args) -> int:
    tf = read_trace_file(args.trace)
    if args.ground:
        g = read_trace_file(args.ground)
        ground = from_trace(g.events, g.root[0] if g.root else None)
    elif args.system:
        ground = _system(args)
    else:
        raise InputError("check needs --ground FILE or --system NAME")
    failed = 0
    for name, pid in sorted(ground.names.items(), key=lambda kv: kv[1]):
        try:
            loc = V.LocalExecution(pid, tuple(ground.locals[pid]))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        s = V.is_sound(tf.events, loc)
        pos = "" if s is V.Soundness.SOUND else f" at position {V.first_divergence(tf.events, loc) + 1}"
        print(f"{name}\t{pid}\t{s.value}{pos}")
        failed += s is not V.Soundness.SOUND
    return FAIL if failed else OK


# systest ------------------------------------------------------------

def cmd_systest(args) -> int:
    system = _system(args)
    known = {c.name: c for c in V.default_configurations(system)}
    if args.configs in (None, "all"):
        configs = list(known.values())
    else:
        configs = []
        for name in args.configs.split(","):
            if name not in known:
                raise InputError(f"unknown configuration {name!r}; known: {', '.join(known)}")
            configs.append(known[name])
    for i, p in enumerate(args.partition or ()):
        configs.append(_partition(p, system, f"X{i + 1}"))
    unknown = set(args.mutant or ()) - set(V.MUTANTS)
    if unknown:
        raise InputError(f"unknown mutant(s) {sorted(unknown)}; known: {', '.join(V.MUTANTS)}")
    try:
        summary = V.systest(system, configs, cap=args.cap, force=args.force,
                            seeds=range(args.seeds), mutations=tuple(args.mutant or ()),
                            out_dir=args.out)
    except V.CapExceeded as exc:
        print(f"error: {exc}; rerun with --force or a larger --cap", file=sys.stderr)
        return CAP
    if args.jsonl:
        Path(args.jsonl).write_text(summary.to_jsonl(), encoding="utf-8")
    print(summary.matrix())
    ids = sorted(summary.violation_ids(), key=lambda s: int(s[1:]))
    print(f"{system.name}: {summary.interleavings} interleavings x {len(configs)} configurations"
          f" x {args.seeds} seeds: {summary.passed} passed, {summary.failed} failed")
    if ids:
        print("violations: " + " ".join(ids))
    return OK if summary.ok else FAIL


# bench --------------------------------------------------------------

def _profile(args) -> B.WorkloadProfile:
    data = B.read_profile_mapping(args.profile) if args.profile else {}
    for item in args.set or ():
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        data[k.strip()] = v.strip()
    return B.WorkloadProfile.from_mapping(data)


def cmd_bench(args) -> int:
    profile = _profile(args)
    modes = B.MODES if "all" in args.mode else args.mode
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = OK
    for mode in modes:
        cache: dict[int, B.BenchResult] = {}

        def one(i, mode=mode, cache=cache):
            if i not in cache:
                p = dataclasses.replace(profile, seed=profile.seed + i)
                cache[i] = B.run_master_worker(p, mode, driver=args.driver)
            return cache[i]

        if args.reps == "auto":
            try:
                m = B.select_repetitions(lambda i: B.measured(one(i).metrics),
                                         args.m0, args.batch, args.eps)
            except B.NotConverged as exc:
                print(f"warning: {exc}", file=sys.stderr)
                m = exc.m
        else:
            m = int(args.reps)
        results = [one(i) for i in range(m)]
        (out / f"bench-{mode}.csv").write_text(B.metrics_csv([r.metrics for r in results]),
                                              encoding="utf-8")
        (out / f"series-{mode}.csv").write_text(B.series_csv([r.samples for r in results]),
                                               encoding="utf-8")
        for i, r in enumerate(results):
            mt = r.metrics
            print(f"{mode}\trep {i}\tresponse {mt.mean_response_ms:.4f} ms\tmax queued {mt.max_queued}"
                  f"\ttracer backlog {mt.max_tracer_backlog}\tverdicts {mt.accepts}/{mt.verdict_count}")
            if mt.accepts != mt.verdict_count or mt.sus_messages != r.expected_messages:
                status = FAIL
    return status


# permute ------------------------------------------------------------

def cmd_permute(args) -> int:
    if args.trace:
        tf = read_trace_file(args.trace)
        system = from_trace(tf.events, tf.root[0] if tf.root else None,
                            tf.root[1] if tf.root else None)
    else:
        system = _system(args)
    locs = V.local_executions(system.locals)
    try:
        perms = V.permutations(locs, cap=args.cap, force=args.force)
    except V.CapExceeded as exc:
        print(f"error: {exc}; rerun with --force or a larger --cap", file=sys.stderr)
        return CAP
    except (V.CyclicConstraints, V.AmbiguousMatch) as exc:
        raise InputError(str(exc)) from None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, p in enumerate(perms):
            (out / f"{system.name}-p{i:04d}.trace").write_text(
                encode_trace(p, root=(system.root, system.root_sig)), encoding="utf-8")
    else:
        for i, p in enumerate(perms):
            print(f"{i}\t" + " ".join(str(e) for e in p))
    print(f"{len(perms)} interleavings", file=sys.stderr)
    return OK


# parser -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riarc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    systems = ", ".join(sorted(SYSTEMS)) + ", chainN"

    p = sub.add_parser("replay", help="replay a trace file through the tracer choreography")
    p.add_argument("--trace", required=True, help="trace file")
    p.add_argument("--config", help="partition such as '0;1,2' (default: one tracer per process)")
    p.add_argument("--monitors", nargs="+", choices=V.MONITOR_KINDS,
                   help="monitor per group, or one for all")
    p.add_argument("--system", help=f"compare against a built-in system ({systems})")
    p.add_argument("--history", help="write the tracer history as JSON lines")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("check", help="check a global trace against local executions")
    p.add_argument("--trace", required=True)
    p.add_argument("--ground", help="trace file whose per-process projections are the ground truth")
    p.add_argument("--system", help=f"built-in system as ground truth ({systems})")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("systest", help="replay every interleaving under every configuration")
    p.add_argument("--system", default="fig2a", help=systems)
    p.add_argument("--configs", default="all", help="'all' or a comma list such as C1,C3")
    p.add_argument("--partition", action="append", help="extra configuration, e.g. 'P;Q,R'")
    p.add_argument("--cap", type=int, default=V.DEFAULT_CAP)
    p.add_argument("--force", action="store_true", help="ignore the cap")
    p.add_argument("--seeds", type=int, default=1, help="scheduler seeds per case")
    p.add_argument("--mutant", action="append", help="fault to inject: " + ", ".join(V.MUTANTS))
    p.add_argument("--out", help="directory for failing traces and histories")
    p.add_argument("--jsonl", help="write the summary records here")
    p.set_defaults(func=cmd_systest)

    p = sub.add_parser("bench", help="run the master-worker benchmark")
    p.add_argument("--profile", help="key = value profile file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a profile key")
    p.add_argument("--mode", nargs="+", default=["none"], choices=list(B.MODES) + ["all"])
    p.add_argument("--driver", choices=B.DRIVERS, default="sim")
    p.add_argument("--reps", default="1", help="'auto' or a count")
    p.add_argument("--m0", type=int, default=3)
    p.add_argument("--batch", type=int, default=1, help="repetition batch offset")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--out", default="bench-out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("permute", help="enumerate causal interleavings")
    p.add_argument("--system", default="fig2a")
    p.add_argument("--trace", help="derive local executions from a recording instead")
    p.add_argument("--cap", type=int, default=V.DEFAULT_CAP)
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", help="write one trace file per interleaving")
    p.set_defaults(func=cmd_permute)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "reps", "auto") != "auto" and not (args.reps.isdigit() and int(args.reps) > 0):
        print("error: --reps must be 'auto' or a positive integer", file=sys.stderr)
        return BAD_INPUT
    try:
        return args.func(args)
    except TraceParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT
    except (OSError, InputError, B.ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
