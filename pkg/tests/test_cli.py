import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simfuzz.bench import from_csv
from simfuzz.cli import UsageError, build_parser, main
from simfuzz.dut import bundled_dir
from simfuzz.executor import FuzzConfig, run_campaign


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_twice_identical_manifests(tmp_path, capsys):
    seeds = str(bundled_dir("toy-cpu", "seeds"))
    for name in ("a", "b"):
        code, _, _ = run_cli(capsys, "run", "--dut", "toy-cpu", "--seeds", seeds, "--max-iters", "1000",
                             "--master-seed", "7", "-o", str(tmp_path / name))
        assert code in (0, 3)
    a = (tmp_path / "a" / "corpus" / "manifest.txt").read_text()
    assert a == (tmp_path / "b" / "corpus" / "manifest.txt").read_text()
    assert len(a.splitlines()) > 4


def test_missing_seeds_dir(tmp_path, capsys):
    missing = tmp_path / "nowhere"
    code, _, err = run_cli(capsys, "run", "--seeds", str(missing))
    assert code == 2
    assert str(missing) in err


def test_empty_seeds_dir(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", "--seeds", str(tmp_path))
    assert code == 2 and "no seeds found" in err


def test_witness_run_exits_3(tmp_path, capsys):
    witness = str(bundled_dir("periph-fsm", "witness"))
    code, out, _ = run_cli(capsys, "-o", str(tmp_path), "run", "--dut", "periph-fsm", "--seeds", witness,
                           "--max-iters", "30")
    assert code == 3
    assert list((tmp_path / "findings").glob("finding-*.bin"))
    assert "findings        1" in out


def test_report_fresh_campaign(tmp_path, capsys):
    run_cli(capsys, "run", "--max-iters", "0", "--stagnation", "0", "-o", str(tmp_path))
    code, out, _ = run_cli(capsys, "report", str(tmp_path))
    assert code == 0
    assert re.search(r"coverage_rate 0\.0+ ", out)
    assert "findings 0" in out
    code, out, _ = run_cli(capsys, "report", str(tmp_path / "report.json"), "--json")
    assert code == 0 and '"coverage_rate": 0.0' in out


def test_report_missing_and_corrupt(tmp_path, capsys):
    assert run_cli(capsys, "report", str(tmp_path))[0] == 1
    (tmp_path / "report.json").write_text("{not json")
    code, _, err = run_cli(capsys, "report", str(tmp_path))
    assert code == 1 and "corrupt" in err


def test_corpus_listing_and_recompute(tmp_path, capsys):
    report = run_campaign(FuzzConfig(dut="toy-cpu", max_iterations=400, master_seed=3, out_dir=tmp_path))
    manifest = (tmp_path / "corpus" / "manifest.txt").read_text().splitlines()
    code, out, _ = run_cli(capsys, "corpus", str(tmp_path / "corpus"))
    assert code == 0
    assert out.splitlines()[-1] == f"{len(manifest)} seeds"
    code, out, _ = run_cli(capsys, "corpus", str(tmp_path / "corpus"), "--dut", "toy-cpu", "--recompute")
    listed = [int(m.group(1)) for m in re.finditer(r"covered (\d+)/", out)]
    assert listed == [len(s.covered) for s in report.corpus.seeds]


def test_corpus_decode(capsys):
    code, out, _ = run_cli(capsys, "corpus", str(bundled_dir("toy-cpu", "seeds")), "--decode", "--dut", "toy-cpu")
    assert code == 0 and "# stimulus" in out and "LDI" in out


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("dut = synth-delay\nmax_iters = 5\nmaster_seed = 2\n")
    code, out, _ = run_cli(capsys, "-c", str(cfg), "run", "--max-iters", "7")
    assert code == 0
    assert "design          synth-delay" in out
    assert "iterations      7 " in out


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("speed = 11\n")
    code, _, err = run_cli(capsys, "run", "-c", str(cfg))
    assert code == 2 and "unknown key" in err


@pytest.mark.parametrize("argv", [
    [], ["fly"], ["run", "--threads", "x"], ["run", "--mode", "turbo"], ["run", "--mode", "serial", "--threads", "2"],
    ["run", "--dut", "toy-cpu", "--delay-us", "3"], ["bench", "--thread-counts", "a,b"],
    ["bench", "--modes", "warp"], ["run", "--templates", "/no/such/file"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert "usage" in err.lower()


def test_help_and_version(capsys):
    assert run_cli(capsys, "--help")[0] == 0
    code, out, _ = run_cli(capsys, "--version")
    assert code == 0 and "simfuzz" in out


def test_list_duts(capsys):
    code, out, _ = run_cli(capsys, "list-duts")
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == ["periph-fsm", "toy-cpu", "synth-delay"]


def test_bench_table_and_csv(tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    code, out, err = run_cli(capsys, "bench", "--delay-us", "50", "--thread-counts", "1,2", "--budget", "0.3",
                             "--csv", str(csv_path), "-o", str(tmp_path / "out"))
    assert code == 0
    rows = from_csv(csv_path.read_text())
    assert [(r.mode, r.threads) for r in rows] == [("serial", 1), ("batch", 1), ("batch", 2),
                                                   ("pipelined", 1), ("pipelined", 2)]
    assert rows[0].speedup == 1.0
    table = out.splitlines()[1:]
    for r, line in zip(rows, table):
        assert line.startswith(r.label)
        assert f"{r.throughput:.3f}" in line
    assert (tmp_path / "out" / "bench.csv").read_text() == csv_path.read_text()


def test_bench_warns_past_core_count(capsys, monkeypatch):
    monkeypatch.setattr("simfuzz.bench.core_count", lambda: 1)
    code, _, err = run_cli(capsys, "bench", "--delay-us", "0", "--thread-counts", "2", "--modes", "batch",
                           "--budget", "0.1")
    assert code == 0 and "exceed" in err


TOKENS = ["run", "bench", "report", "corpus", "list-duts", "--dut", "toy-cpu", "--threads", "2", "-1", "x",
          "--mode", "batch", "-o", "-c", "--max-iters", "--json", "--recompute", "", "--", "-v", "1.5"]


@given(st.lists(st.sampled_from(TOKENS), max_size=6))
@settings(max_examples=300)
def test_parsing_is_total(argv):
    parser = build_parser()
    try:
        parser.parse_args(argv)
    except UsageError:
        pass
    except SystemExit as exc:  # only --help/--version may exit
        assert exc.code == 0
