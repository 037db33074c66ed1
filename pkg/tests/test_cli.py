import json
import subprocess
import sys

import jsonschema
import pytest

from biasscan.cli import main
from biasscan.report import load_schema

FEATURES = "x1,x2,x3,x4"


def audit_args(data, out, *extra):
    return ["audit", "--data", str(data), "--outcome-col", "y", "--pred-col", "p", "--features", FEATURES, "--out", str(out), *extra]


@pytest.fixture
def null_sample(samples_dir):
    return samples_dir / "null_sample.csv"


@pytest.fixture
def small_report(tmp_path, null_sample):
    out = tmp_path / "r.json"
    assert main(audit_args(null_sample, out, "--restarts", "5", "--bootstrap", "19", "--theta-sweep", "0:1:2")) == 0
    return out


def test_report_validates_against_schema(small_report):
    report = json.loads(small_report.read_text())
    jsonschema.validate(report, load_schema())
    assert set(report["scans"]) == {"UnderEstimated", "OverEstimated"}
    assert len(report["penalty_curve"]) == 2
    assert report["config"]["restarts"] == 5


def test_config_echo_reproduces_report(tmp_path, small_report):
    again = tmp_path / "again.json"
    assert main(["audit", "--config", str(small_report), "--out", str(again)]) == 0
    assert again.read_bytes() == small_report.read_bytes()


def test_flags_override_config(tmp_path, small_report):
    out = tmp_path / "o.json"
    assert main(["audit", "--config", str(small_report), "--direction", "over", "--bootstrap", "0", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert list(report["scans"]) == ["OverEstimated"]
    assert report["significance"] is None


def test_null_sample_not_significant(tmp_path, null_sample):
    out = tmp_path / "r.json"
    assert main(audit_args(null_sample, out)) == 0
    assert json.loads(out.read_text())["significance"]["p_value"] > 0.05


def test_synthetic_sample_recovers_truth(tmp_path, samples_dir):
    from biasscan import Subgroup, SyntheticSpec, evaluate_detection

    out = tmp_path / "r.json"
    assert main(audit_args(samples_dir / "synthetic_2226.csv", out)) == 0
    report = json.loads(out.read_text())
    truth = json.loads((samples_dir / "synthetic_2226_truth.json").read_text())
    space = SyntheticSpec().space
    det = evaluate_detection(Subgroup.build(space, report["detected"]["subgroup"]), Subgroup.build(space, truth["biased_subgroup"]), space)
    assert det.recall >= 0.5
    assert report["significance"]["p_value"] <= 0.05


def test_error_scan(tmp_path, null_sample):
    out = tmp_path / "r.json"
    assert main(audit_args(null_sample, out, "--error-scan", "--threshold", "0.4", "--restarts", "3", "--bootstrap", "0")) == 0
    report = json.loads(out.read_text())
    assert report["config"]["error_scan"] is True
    jsonschema.validate(report, load_schema())


def test_summary_goes_to_stderr(tmp_path, null_sample, capsys):
    assert main(audit_args(null_sample, tmp_path / "r.json", "--restarts", "3", "--bootstrap", "0", "--summary")) == 0
    err = capsys.readouterr().err
    assert "most biased subgroup" in err


@pytest.mark.parametrize(
    "extra",
    [["--theta", "-1"], ["--bootstrap", "5"], ["--restarts", "0"], ["--threshold", "1.5"], ["--features", "x1:bogus"], ["--features", "nope"]],
)
def test_configuration_errors_exit_2(tmp_path, null_sample, extra, capsys):
    assert main(audit_args(null_sample, tmp_path / "r.json", *extra)) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path):
    assert main(audit_args(tmp_path / "nope.csv", tmp_path / "r.json")) == 2


def test_missing_required_flag_exits_2(tmp_path):
    assert main(["audit", "--data", "x.csv"]) == 2


def test_bad_data_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,y,p\na,1,0.5\nb,7,0.5\n")
    assert main(["audit", "--data", str(bad), "--outcome-col", "y", "--pred-col", "p", "--features", "x1", "--out", str(tmp_path / "r.json")]) == 3
    assert "row 2" in capsys.readouterr().err


def test_bad_flag_value_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["audit", "--theta-sweep", "1:2"])
    assert exc.value.code == 2


def test_synth_command(tmp_path):
    out, truth = tmp_path / "s.csv", tmp_path / "t.json"
    assert main(["synth", "--seed", "3", "--out", str(out), "--truth", str(truth)]) == 0
    assert len(out.read_text().splitlines()) == 2701
    assert json.loads(truth.read_text())["affected_rows"] == 100
    assert main(["synth", "--null-rows", "50", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 51
    assert main(["synth", "--pattern", "2,2,9,6", "--out", str(out)]) == 2


def test_experiment_command(tmp_path):
    out = tmp_path / "e.json"
    args = ["experiment", "--pattern", "2,2,2,6", "--pattern", "2,2,6,6", "--reps", "2", "--restarts", "3", "--bootstrap", "19", "--out", str(out)]
    assert main(args) == 0
    rows = json.loads(out.read_text())["results"]
    assert [r["pattern"] for r in rows] == ["2x2x2x6", "2x2x6x6"]
    assert rows[0]["recall"]["count"] == 2
    csv_out = tmp_path / "e.csv"
    assert main(args[:-1] + [str(csv_out)]) == 0
    assert csv_out.read_text().splitlines()[0].startswith("pattern,n_rows,repetitions,recall_mean")
    assert main(["experiment", "--reps", "0"]) == 2


def test_compas_command_requires_file(tmp_path):
    assert main(["compas", "--raw", str(tmp_path / "none.csv"), "--out", str(tmp_path / "c.csv")]) == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "biasscan.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("biasscan ")
