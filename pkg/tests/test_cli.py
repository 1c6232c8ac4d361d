import csv
import hashlib
import subprocess
import sys
from collections import Counter

import pytest

from scootflow import cli
from scootflow.ingest import read_events_csv


def digest_tree(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    common = ["--out", str(out), "--seed", "4"]
    assert cli.main(["synth", *common, "--days", "2", "--grid", "6"]) == 0
    inputs = digest_tree(out / "synth")
    for cmd in ("derive", "features-spatial", "features-temporal"):
        assert cli.main([cmd, *common]) == 0, cmd
    assert cli.main(["fit", *common, "--models", "RFR"]) == 0
    return out, inputs


def test_derive_on_synth_log_equals_truth(run):
    out, _ = run
    key = lambda e: (e.kind, e.raw_time, round(e.location.lat, 9), round(e.location.lon, 9))
    derived = read_events_csv(out / "events.csv")
    truth = read_events_csv(out / "synth" / "truth_events.csv")
    assert len(truth) > 0
    assert Counter(map(key, derived)) == Counter(map(key, truth))


def test_commands_leave_inputs_untouched(run):
    out, before = run
    assert digest_tree(out / "synth") == before


def test_outputs_carry_provenance(run):
    out, _ = run
    for p in [out / "events.csv", out / "fit" / "summary.csv", *sorted((out / "features").glob("*.csv"))]:
        first = p.read_text().splitlines()[0]
        assert first.startswith("# scootflow ") and " config=" in first and " seed=4" in first, p


def test_fit_single_model_gives_one_report_per_matrix(run):
    out, _ = run
    with open(out / "fit" / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
    matrices = {p.stem for p in (out / "features").glob("*.csv")}
    assert {r["matrix"] for r in rows} == matrices
    fitted = [r for r in rows if not r["note"].startswith("skipped")]
    assert fitted
    assert Counter(r["matrix"] for r in fitted) == Counter({r["matrix"]: 1 for r in fitted})
    assert {r["model"] for r in fitted} == {"RFR"}
    for r in fitted:
        assert sorted(p.name for p in (out / "fit" / r["matrix"]).iterdir()) == ["RFR.json"]


def test_missing_input_names_config_key(tmp_path, capsys):
    assert cli.main(["derive", "--out", str(tmp_path)]) == 2
    assert "inputs.snapshots" in capsys.readouterr().err


def test_bad_config_exits_two(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[fit]\nratio = 1.5\n")
    assert cli.main(["derive", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "fit.ratio" in capsys.readouterr().err
    cfg.write_text("colour = 'red'\n")
    assert cli.main(["report", "--config", str(cfg)]) == 2


def test_module_help_lists_commands():
    res = subprocess.run([sys.executable, "-m", "scootflow", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in cli.COMMANDS:
        assert name in res.stdout
