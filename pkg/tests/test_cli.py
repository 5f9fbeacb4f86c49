"""Command-line interface: subcommands, outputs, and exit codes."""

import json
import shutil
import subprocess
import sys

import pytest

from dslcsim.cli import main

CONFIG = """\
scale: mini
run:
  epoch_limit: 500
synth:
  working_set_pages: 64
  duration_s: 1800
  jitter: 0.0
  seed: 11
  mixture:
    - cadence_s: 600
      weight: 1.0
"""


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(CONFIG)
    return str(p)


def test_run_single_replay(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", config_path, "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "run.json").read_text())
    assert report["policy"] == "dslc" and not report["died"]
    timeline = (out / "run-timeline.csv").read_text()
    assert timeline.startswith("time_hours,")
    counters = (out / "run-counters.csv").read_text()
    assert counters.startswith("counter,value\n")
    assert "policy=dslc" in capsys.readouterr().out


def test_run_lifetime(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--lifetime", "--config", config_path,
               "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "run.json").read_text())
    assert report["died"] and report["lifetime_kb"] > 0
    assert "died=True" in capsys.readouterr().out


def test_run_policy_and_preset_flags(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", config_path, "--out", str(out),
               "--policy", "baseline", "--preset", "mode5"])
    assert rc == 0
    report = json.loads((out / "run.json").read_text())
    assert report["policy"] == "baseline"
    assert report["table_name"] == "baseline"  # baseline ignores the preset
    assert report["mode_states"] == [2]
    capsys.readouterr()


def test_compare(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["compare", "--config", config_path, "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "compare.json").read_text())
    assert summary["lifetime_ratio"] > 1.0
    assert (out / "compare-dslc.json").exists()
    assert (out / "compare-baseline.json").exists()
    assert (out / "compare-baseline-timeline.csv").exists()
    text = capsys.readouterr().out
    assert "lifetime ratio:" in text


def test_sweep(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["sweep", "--config", config_path, "--out", str(out),
               "--presets", "normal3,mode2"])
    assert rc == 0
    rows = json.loads((out / "sweep.json").read_text())
    assert set(rows) == {"normal3", "mode2"}
    for row in rows.values():
        assert row["died"] and row["lifetime_kb"] > 0
    assert (out / "sweep-normal3.log").read_text().startswith("policy=")
    assert (out / "sweep-mode2.json").exists()
    capsys.readouterr()


def test_sweep_rejects_baseline_policy(tmp_path, config_path, capsys):
    rc = main(["sweep", "--config", config_path, "--out", str(tmp_path),
               "--policy", "baseline"])
    assert rc == 2
    assert "baseline" in capsys.readouterr().err


def test_sweep_rejects_unknown_preset(tmp_path, config_path, capsys):
    rc = main(["sweep", "--config", config_path, "--out", str(tmp_path),
               "--presets", "normal3,bogus"])
    assert rc == 2
    assert "unknown preset" in capsys.readouterr().err


def test_synth_then_analyze_and_run(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["synth", "--config", config_path, "--out", str(out)])
    assert rc == 0
    trace = out / "trace.csv"
    assert trace.exists()
    capsys.readouterr()

    rc = main(["analyze", "--config", config_path, "--trace", str(trace),
               "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "longevity samples:" in text
    assert "up_to_1h: 1.0000" in text  # the whole mixture is 600 s cadence
    profile = (out / "profile.csv").read_text()
    assert "longevity_seconds,cdf" in profile

    # The generated trace replays through the simulator unchanged.
    rc = main(["run", "--config", config_path, "--trace", str(trace),
               "--scale", "mini", "--out", str(out)])
    assert rc == 0
    capsys.readouterr()


def test_seed_override_changes_workload(tmp_path, config_path, capsys):
    a, b, c = (tmp_path / n for n in ("a", "b", "c"))
    for out, seed in ((a, "1"), (b, "2"), (c, "1")):
        rc = main(["synth", "--config", config_path, "--out", str(out),
                   "--seed", seed])
        assert rc == 0
    capsys.readouterr()
    ta = (a / "trace.csv").read_text()
    assert ta != (b / "trace.csv").read_text()
    assert ta == (c / "trace.csv").read_text()


def test_no_workload_is_a_config_error(tmp_path, capsys):
    rc = main(["run", "--out", str(tmp_path)])
    assert rc == 2
    assert "no workload" in capsys.readouterr().err


def test_synth_requires_synth_section(tmp_path, capsys):
    cfg = tmp_path / "t.yaml"
    cfg.write_text("scale: mini\ntrace: somewhere.csv\n")
    rc = main(["synth", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 2
    assert "synth" in capsys.readouterr().err


def test_bad_config_reports_problems(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("scale: galactic\n")
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 2
    assert "unknown scale" in capsys.readouterr().err


def test_missing_trace_file(tmp_path, capsys):
    rc = main(["analyze", "--trace", str(tmp_path / "absent.csv"),
               "--out", str(tmp_path)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("dslcsim") is None,
                    reason="console script not on PATH")
def test_console_script(tmp_path, config_path):
    proc = subprocess.run(
        ["dslcsim", "run", "--config", config_path, "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "run.json").exists()


def test_module_entry_point(tmp_path, config_path):
    proc = subprocess.run(
        [sys.executable, "-m", "dslcsim.cli", "analyze",
         "--config", config_path, "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "profile.csv").exists()
