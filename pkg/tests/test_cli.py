import json
import re
import subprocess
import sys

import pytest
import tomli

from coact.analysis.report import validate_report_json
from coact.cli import main

DIAG = re.compile(r"^coact-error code=(\d) kind=(config|runtime|no-input|verification): \S.*$")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def assert_diag(err, code):
    lines = err.strip().splitlines()
    assert lines, "expected a diagnostic on stderr"
    m = DIAG.match(lines[-1])
    assert m and int(m.group(1)) == code, lines[-1]


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(
        "[session]\nsessions = 2\nrequests_min = 4\nrequests_max = 5\nbatch_capacity = 1\nquality_schedule = [2]\nseed = 1\n"
        '[policy]\np_much_more = 0.3\np_moderate = 0.4\n[policy.hazards]\nidea-spark = 0.3\nquality-drop = 0.6\n'
    )
    return path


@pytest.fixture
def logs(tmp_path, small_config, capsys):
    out = tmp_path / "logs"
    code, stdout, _ = run(capsys, "simulate", small_config, "--out", out)
    assert code == 0 and "simulated 2 sessions" in stdout
    return out


def tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_simulate_writes_logs_and_is_deterministic(tmp_path, small_config, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "simulate", small_config, "--seed", 42, "--out", a)[0] == 0
    assert run(capsys, "simulate", small_config, "--seed", 42, "--out", b)[0] == 0
    assert list(tree(a)) == ["session-000.jsonl", "session-001.jsonl"]
    assert tree(a) == tree(b)
    assert run(capsys, "simulate", small_config, "--seed", 42, "--out", tmp_path / "g", "--gzip", "--workers", 2)[0] == 0
    assert sorted(p.name for p in (tmp_path / "g").iterdir()) == ["session-000.jsonl.gz", "session-001.jsonl.gz"]


def test_env_seed_is_used_and_flag_wins(tmp_path, small_config, capsys, monkeypatch):
    monkeypatch.setenv("COACT_SEED", "42")
    run(capsys, "simulate", small_config, "--out", tmp_path / "env")
    run(capsys, "simulate", small_config, "--seed", 42, "--out", tmp_path / "flag")
    run(capsys, "simulate", small_config, "--seed", 7, "--out", tmp_path / "other")
    assert tree(tmp_path / "env") == tree(tmp_path / "flag") != tree(tmp_path / "other")
    monkeypatch.setenv("COACT_SEED", "banana")
    code, _, err = run(capsys, "simulate", small_config, "--out", tmp_path / "bad")
    assert code == 2
    assert_diag(err, 2)


def test_preset_simulation(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "calibrated", "--sessions", 10, "--out", tmp_path / "p")
    assert code == 0 and len(list((tmp_path / "p").iterdir())) == 10
    assert out.startswith("simulated 10 sessions")


@pytest.mark.parametrize("argv", [
    ["simulate", "does-not-exist.toml"],
    ["simulate", "calibrated", "--seed", str(2**64)],
    ["simulate", "calibrated", "--seed", "-1"],
    ["simulate", "calibrated", "--sessions", "0"],
    ["analyze", "--reference-corpus", "--tolerance", "-1"],
    ["frobnicate"],
])
def test_config_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert_diag(err, 2)


def test_bad_config_content(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[policy]\np_steady = 4\n")
    code, _, err = run(capsys, "simulate", bad, "--out", tmp_path / "x")
    assert code == 2
    assert_diag(err, 2)


def test_analyze_reference_corpus_matches_reference_values(capsys):
    code, out, _ = run(capsys, "analyze", "--reference-corpus", "--reference", "--tolerance", 0)
    assert code == 0
    for cat, value in {"H": "70.09", "O": "68.69", "T": "8.88", "D": "28.50", "C": "31.78"}.items():
        assert re.search(rf"^{cat} [\w-]+\s+{value}\s+{value}$", out, re.M), cat


def test_analyze_logs_json_and_plot(tmp_path, logs, capsys):
    svg = tmp_path / "chart.svg"
    code, out, _ = run(capsys, "analyze", logs, "--json", "--plot", svg)
    assert code == 0
    validate_report_json(json.loads(out))
    assert svg.read_text().startswith("<svg")


def test_analyze_tolerance_zero_fails_on_mismatch(logs, capsys):
    code, out, _ = run(capsys, "analyze", str(logs / "*.jsonl"), "--reference", "--tolerance", 0)
    assert code == 5 and "FAIL" in out


def test_analyze_without_logs(tmp_path, capsys):
    code, _, err = run(capsys, "analyze", tmp_path / "nothing-here")
    assert code == 4
    assert_diag(err, 4)


def test_analyze_corrupt_log(tmp_path, capsys):
    (tmp_path / "broken.jsonl").write_text("{nope\n")
    code, _, err = run(capsys, "analyze", tmp_path)
    assert code == 3
    assert_diag(err, 3)


def test_replay_verify(logs, capsys):
    code, out, _ = run(capsys, "replay", logs, "--verify")
    assert code == 0 and out.count(": ok revision") == 2


def test_replay_detects_flipped_value(logs, capsys):
    path = logs / "session-000.jsonl"
    lines = path.read_text().splitlines()
    final = json.loads(lines[-1])
    node = next(n for n in final["canvas"]["nodes"] if n["id"] == "landing")
    node["props"]["item_spacing"] = node["props"]["item_spacing"] + 1
    lines[-1] = json.dumps(final)
    path.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "replay", path, "--verify")
    assert code == 5
    assert_diag(err, 5)


def test_replay_unreadable_and_missing(tmp_path, capsys):
    (tmp_path / "junk.jsonl").write_text("not json at all\n")
    code, _, err = run(capsys, "replay", tmp_path / "junk.jsonl", "--verify")
    assert code == 3
    assert_diag(err, 3)
    code, _, err = run(capsys, "replay", tmp_path / "absent.jsonl")
    assert code == 4
    assert_diag(err, 4)


def test_calibrate_budget_one_echoes_initial(tmp_path, small_config, capsys):
    out = tmp_path / "fit.toml"
    code, stdout, _ = run(capsys, "calibrate", "--config", small_config, "--budget", 1, "--out", out)
    assert code == 0 and "1 evaluations" in stdout
    fitted = tomli.loads(out.read_text())
    assert fitted["policy"]["p_much_more"] == 0.3 and fitted["session"]["sessions"] == 2
    report = json.loads(out.with_suffix(".fit.json").read_text())
    assert report["evaluations"] == 1 and report["score"]["distance"] > 0


def test_calibrate_is_deterministic(tmp_path, small_config, capsys):
    for name in ("a", "b"):
        assert run(capsys, "calibrate", "--config", small_config, "--budget", 4, "--seed", 9, "--out", tmp_path / f"{name}.toml")[0] == 0
    assert (tmp_path / "a.toml").read_bytes() == (tmp_path / "b.toml").read_bytes()
    # the fitted file is itself a usable config
    assert run(capsys, "simulate", tmp_path / "a.toml", "--out", tmp_path / "again")[0] == 0


def test_calibrate_bad_reference(tmp_path, capsys):
    ref = tmp_path / "ref.json"
    ref.write_text('{"presence_pct": {}}')
    code, _, err = run(capsys, "calibrate", "--reference", ref, "--budget", 0, "--out", tmp_path / "x.toml")
    assert code == 2
    assert_diag(err, 2)


def test_console_script_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "coact.cli", "analyze", "--reference-corpus", "--json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["total_turns"] == 214
