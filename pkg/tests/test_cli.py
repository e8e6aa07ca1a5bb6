import subprocess
import sys

import pytest

from riarc.cli import main

EX7 = "# root 0 f_sP\nrecv\t1\t-\t-\nspawn\t1\t2\tf_sR\nspawn\t0\t1\tf_sQ\nsend\t0\t1\t-\n"


@pytest.fixture
def ex7(tmp_path):
    f = tmp_path / "ex7.trace"
    f.write_text(EX7)
    return f


def test_replay_ex7_single_tracer(ex7, capsys):
    assert main(["replay", "--trace", str(ex7), "--config", "0"]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_replay_writes_history(ex7, tmp_path):
    h = tmp_path / "h.jsonl"
    assert main(["replay", "--trace", str(ex7), "--monitors", "record", "--history", str(h)]) == 0
    assert h.read_text().count("\n") > 5


def test_replay_inconsistent_file(tmp_path, capsys):
    f = tmp_path / "bad.trace"
    f.write_text("spawn 0 1 f_sQ\nexit 0 - -\nsend 0 1 -\n")
    assert main(["replay", "--trace", str(f)]) == 1
    out = capsys.readouterr().out
    assert "0" in out and "position 2" in out


def test_replay_against_system_names_process(tmp_path, capsys):
    f = tmp_path / "swap.trace"
    f.write_text("spawn 0 1 f_sQ\nsend 0 1 -\nexit 0 - -\nrecv 1 - -\nexit 1 - -\nspawn 1 2 f_sR\n")
    assert main(["replay", "--trace", str(f), "--system", "fig2a"]) == 1
    out = capsys.readouterr().out
    assert "unsound Q" in out and "position 2" in out


def test_replay_missing_file(tmp_path):
    assert main(["replay", "--trace", str(tmp_path / "nope.trace")]) == 2


def test_replay_parse_error(tmp_path, capsys):
    f = tmp_path / "junk.trace"
    f.write_text("spawn 0 1\n")
    assert main(["replay", "--trace", str(f)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_check(tmp_path, capsys):
    f = tmp_path / "t.trace"
    f.write_text("spawn 0 1 f_sQ\nrecv 1 - -\nsend 0 1 -\nexit 0 - -\nspawn 1 2 f_sR\nexit 1 - -\n")
    assert main(["check", "--trace", str(f), "--system", "fig2a"]) == 0
    assert main(["check", "--trace", str(f)]) == 2


def test_systest_fig2a(tmp_path, capsys):
    out = tmp_path / "s.jsonl"
    assert main(["systest", "--system", "fig2a", "--configs", "all", "--jsonl", str(out)]) == 0
    assert "28 passed, 0 failed" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 29


def test_systest_cap():
    assert main(["systest", "--system", "fig2a", "--cap", "1"]) == 3


def test_systest_mutant_named(capsys):
    code = main(["systest", "--system", "chain4", "--mutant", "analyse-routed-direct"])
    assert code == 1
    assert "I19" in capsys.readouterr().out


def test_systest_unknown_config():
    assert main(["systest", "--configs", "C99"]) == 2


def test_bench_writes_csvs(tmp_path):
    prof = tmp_path / "desk.ini"
    prof.write_text("kind = steady\nn = 20\nw = 4\n")
    out = tmp_path / "out"
    assert main(["bench", "--profile", str(prof), "--mode", "none", "riarc",
                 "--reps", "1", "--out", str(out)]) == 0
    rows = (out / "bench-riarc.csv").read_text().splitlines()
    assert rows[0] == "# riarc-bench v1" and len(rows) == 3
    assert (out / "series-none.csv").exists()


def test_bench_auto_reps(tmp_path):
    out = tmp_path / "out"
    assert main(["bench", "--set", "n=10", "--set", "w=2", "--reps", "auto", "--eps", "1",
                 "--out", str(out)]) == 0
    assert len((out / "bench-none.csv").read_text().splitlines()) == 2 + 3


def test_bench_is_byte_identical(tmp_path):
    args = ["bench", "--set", "n=15", "--mode", "central", "--reps", "2"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ("bench-central.csv", "series-central.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bench_invalid_mode():
    with pytest.raises(SystemExit) as ei:
        main(["bench", "--mode", "quantum"])
    assert ei.value.code == 2


def test_bench_bad_profile(tmp_path):
    assert main(["bench", "--set", "pr_send=2", "--out", str(tmp_path)]) == 2


def test_permute(tmp_path, capsys):
    assert main(["permute", "--system", "fig2a", "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("*.trace"))) == 4
    assert main(["permute", "--system", "fig2a", "--cap", "2"]) == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "riarc", "permute", "--system", "chain2"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "3 interleavings" in res.stderr
