"""Command-line interface: exit codes, report documents, artifacts."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from cubic_moments import cli

DISC_DOC = {"a1": -1.0, "pair": {"real": [0.0, 1.0]}}
CONN_DOC = {"a1": 0.0, "pair": {"complex": [0.0, 1.0]}}


@pytest.fixture
def disc_file(tmp_path):
    path = tmp_path / "disc.json"
    path.write_text(json.dumps(DISC_DOC))
    return str(path)


@pytest.fixture
def conn_file(tmp_path):
    path = tmp_path / "conn.json"
    path.write_text(json.dumps(CONN_DOC))
    return str(path)


def run_json(capsys, argv):
    rc = cli.run(argv)
    out = capsys.readouterr().out
    return rc, json.loads(out)


# --------------------------------------------------------------------------
# argument and input errors
# --------------------------------------------------------------------------


def test_unknown_subcommand_exits_3(capsys):
    assert cli.run(["not-a-command"]) == 3
    err = capsys.readouterr().err
    assert "curve-info" in err  # schema is printed for usage errors


def test_missing_required_flag_exits_3(capsys):
    assert cli.run(["curve-info"]) == 3
    assert "--curve" in capsys.readouterr().err


def test_no_arguments_exits_3(capsys):
    assert cli.run([]) == 3


def test_missing_curve_file_exits_3(tmp_path, capsys):
    assert cli.run(["curve-info", "--curve", str(tmp_path / "nope.json")]) == 3


def test_malformed_curve_file_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.run(["curve-info", "--curve", str(bad)]) == 3
    bad.write_text(json.dumps({"a1": 0.0}))  # missing the root pair
    assert cli.run(["curve-info", "--curve", str(bad)]) == 3


def test_repeated_root_curve_exits_3(tmp_path, capsys):
    bad = tmp_path / "deg.json"
    bad.write_text(json.dumps({"a1": 0.0, "pair": {"real": [0.0, 1.0]}}))
    assert cli.run(["curve-info", "--curve", str(bad)]) == 3


# --------------------------------------------------------------------------
# report documents
# --------------------------------------------------------------------------


def test_curve_info_disconnected(disc_file, capsys):
    rc, doc = run_json(capsys, ["curve-info", "--curve", disc_file])
    assert rc == 0
    assert doc["topology"]["kind"] == "TwoComponents"
    assert set(doc["topology"]["components"]) == {"Oval", "Unbounded"}
    assert len(doc["two_torsion"]["all_real"]) == 4
    assert doc["tolerances"]["rank"] > 0
    assert doc["points_at_infinity"][0]["mult"] == 3


def test_curve_info_connected(conn_file, capsys):
    rc, doc = run_json(capsys, ["curve-info", "--curve", conn_file])
    assert rc == 0
    assert doc["topology"]["kind"] == "Connected"
    assert len(doc["two_torsion"]["all_real"]) == 2


def test_face_check_torsion_divisor(disc_file, tmp_path, capsys):
    div = tmp_path / "div.json"
    div.write_text(json.dumps(
        {"entries": [{"point": [1.0, 0.0, 0.0], "mult": 3, "real": True}]}
    ))
    rc, doc = run_json(capsys, [
        "face-check", "--curve", disc_file, "--divisor", str(div), "--d", "1",
    ])
    assert rc == 0
    assert doc["degree"] == 3
    assert doc["quadric_exists"] is True
    assert doc["torsion_class"] in {"T1", "T2", "T3"}


def test_face_check_bad_divisor_exits_3(disc_file, tmp_path, capsys):
    div = tmp_path / "div.json"
    div.write_text(json.dumps({"entries": [{"point": [0.0, 1.0], "mult": 1}]}))
    assert cli.run([
        "face-check", "--curve", disc_file, "--divisor", str(div),
    ]) == 3


def test_moment_check_member(disc_file, tmp_path, capsys):
    lf = tmp_path / "L.json"
    lf.write_text(json.dumps({"d": 1, "values": [3.0, 0, 0, 0, 0, 2.0]}))
    rc, doc = run_json(capsys, [
        "moment-check", "--curve", disc_file, "--functional", str(lf),
    ])
    assert rc == 0
    assert doc["member"] is True
    assert doc["extension_kind"] == "AlmostFlat"
    assert doc["moment_matrix"]["rank"] == 2
    assert len(doc["decomposition"]["atoms"]) == 3


def test_moment_check_non_member_exits_2(disc_file, tmp_path, capsys):
    lf = tmp_path / "L.json"
    lf.write_text(json.dumps({"d": 1, "values": [1.0, 0, 0, -1.0, 0, 1.0]}))
    rc, doc = run_json(capsys, [
        "moment-check", "--curve", disc_file, "--functional", str(lf),
    ])
    assert rc == 2
    assert doc["member"] is False
    assert doc["certificate"]["value"] < 0


def test_moment_check_d_conflict_exits_3(disc_file, tmp_path, capsys):
    lf = tmp_path / "L.json"
    lf.write_text(json.dumps({"d": 1, "values": [3.0, 0, 0, 0, 0, 2.0]}))
    assert cli.run([
        "moment-check", "--curve", disc_file, "--functional", str(lf),
        "--d", "2",
    ]) == 3


def test_extreme_ray_draws_requested_class(disc_file, capsys):
    rc, doc = run_json(capsys, [
        "extreme-ray", "--curve", disc_file, "--torsion-class", "T1",
        "--seed", "4",
    ])
    assert rc == 0
    assert doc["torsion_class"] == "T1"
    assert doc["nonnegative_predicted"] is True
    assert doc["nonnegative_checked"] is True
    assert doc["verified"] is True


def test_certify_reports_identity(disc_file, capsys):
    rc, doc = run_json(capsys, ["certify", "--curve", disc_file, "--seed", "2"])
    assert rc == 0
    assert doc["certificate"]["residual"] <= 1e-7
    assert doc["certificate"]["alpha"] > 0


def test_reproduce_fixtures(capsys):
    assert cli.run(["reproduce", "nolowerset"]) == 0
    out = capsys.readouterr().out
    assert "lower-set violation: confirmed" in out
    assert out.count("tangency point") == 4
    assert cli.run(["reproduce", "sextic"]) == 0
    assert "extreme ray: confirmed" in capsys.readouterr().out


# --------------------------------------------------------------------------
# experiment artifacts and determinism
# --------------------------------------------------------------------------


def test_cara_experiment_artifacts(conn_file, tmp_path, capsys):
    out = tmp_path / "exp.json"
    rc = cli.run([
        "cara-experiment", "--curve", conn_file, "--d", "1",
        "--trials", "4", "--starts", "24", "--seed", "3",
        "--out", str(out),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["predicted_caratheodory"] == 3
    counts = {int(k): v for k, v in doc["histogram"].items()}
    assert sum(counts.values()) + doc["failed_trials"] == 4
    assert len(doc["records"]) == 4

    csv_path = tmp_path / "exp.csv"
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "k,count"
    total = sum(int(row.split(",")[1]) for row in lines[1:])
    assert total == 4

    png = (tmp_path / "exp.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"

    meta = json.loads((tmp_path / "exp.json.meta.json").read_text())
    assert meta["argv"][0] == "cara-experiment"
    assert len(meta["trial_wall_times_s"]) == 4
    assert str(out) in meta["files"]


def test_same_argv_is_byte_identical(conn_file, tmp_path, capsys):
    out = tmp_path / "exp.json"
    argv = [
        "cara-experiment", "--curve", conn_file, "--d", "1",
        "--trials", "2", "--starts", "16", "--seed", "9", "--out", str(out),
    ]
    assert cli.run(argv) == 0
    first = out.read_bytes()
    assert cli.run(argv) == 0
    assert out.read_bytes() == first


def test_stdout_report_is_deterministic(disc_file, capsys):
    argv = ["curve-info", "--curve", disc_file]
    assert cli.run(argv) == 0
    first = capsys.readouterr().out
    assert cli.run(argv) == 0
    assert capsys.readouterr().out == first


def test_counterexample_writes_figure(disc_file, tmp_path, capsys):
    out = tmp_path / "ce.json"
    rc = cli.run([
        "counterexample", "--curve", disc_file, "--seed", "0",
        "--out", str(out),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] is True
    assert doc["lq_value"] < 0
    assert (tmp_path / "ce.png").exists()


def test_console_script_runs(disc_file):
    exe = shutil.which("cubic-moments")
    assert exe, "console script not installed"
    proc = subprocess.run(
        [exe, "curve-info", "--curve", disc_file],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["command"] == "curve-info"
