import csv
import json
import math

import pytest

from henonlab import cli
from henonlab.cli import (
    EXIT_FINDING,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    main,
    parse_alpha_list,
    parse_float_list,
    parse_n_range,
    read_config,
    to_json,
    write_report,
)

SMALL = ["--nr", "32", "--ntheta", "16"]


def test_parse_float_list():
    assert parse_float_list("25:100:25") == [25.0, 50.0, 75.0, 100.0]
    assert parse_float_list("3,10:20:5") == [3.0, 10.0, 15.0, 20.0]
    assert parse_float_list("") == []
    for bad in ("a", "1:2", "5:1:1", "1:2:0", "1,,2", "inf"):
        with pytest.raises(UsageError):
            parse_float_list(bad)


def test_parse_n_range():
    assert parse_n_range("1..5") == [1, 2, 3, 4, 5]
    assert parse_n_range("2,4..5") == [2, 4, 5]
    for bad in ("5..1", "x", "0..2"):
        with pytest.raises(UsageError):
            parse_n_range(bad)


def test_alpha_list_rejects_negative():
    with pytest.raises(UsageError):
        parse_alpha_list("0,-1")


def test_config_file_and_flags_win(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nnr = 40\nntheta=12\nfloor-aware = false\nseed = 9\n")
    values = read_config(cfg)
    assert values == {"nr": 40, "ntheta": 12, "floor_aware": False, "seed": 9}
    args = cli.build_parser().parse_args(["solve", "--config", str(cfg), "--seed", "3"])
    merged = cli.resolve(args)
    assert merged["nr"] == 40 and merged["seed"] == 3 and merged["floor_aware"] is False
    (tmp_path / "bad.cfg").write_text("unknown = 1\n")
    with pytest.raises(UsageError):
        read_config(tmp_path / "bad.cfg")


def test_json_formatting_round_trips():
    x = 0.1 + 0.2
    text = to_json({"x": x, "nan": math.nan, "s": {2, 1}})
    data = json.loads(text)
    assert data["x"] == x and data["nan"] is None and data["s"] == [1, 2]
    assert cli.fmt(1 / 3) == "0.3333333333"


def test_constants_default_and_guard(capsys):
    assert main(["constants", "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert [row["alpha"] for row in out["thresholds"]] == [0.0, 1.0, 2.0]
    row = out["thresholds"][0]
    assert (row["multiplicity"], row["case1_max_n"], row["case2_max_n"], row["N_alpha"],
            row["guaranteed_quasiradial"]) == (5, 2, 3, 4, 2)
    assert main(["constants", "--alpha=-1"]) == EXIT_USAGE


def test_radial_writes_profile(tmp_path, capsys):
    assert main(["radial", "--alpha", "2", "--p", "10", "--out", str(tmp_path), "--json"]) == EXIT_OK
    rows = list(csv.reader((tmp_path / "radial_a2_p10.csv").open()))
    assert rows[0] == ["r", "value"] and len(rows) > 100
    rec = json.loads((tmp_path / "radial_a2_p10.json").read_text())
    assert rec["alpha"] == 2.0 and rec["p"] == 10.0


def test_solve_classify_morse_pipeline(tmp_path, capsys):
    code = main(["solve", "--alpha", "0", "--p", "8", "--n", "2", *SMALL, "--out", str(tmp_path)])
    assert code == EXIT_OK
    field = tmp_path / "field_a0_p8_n2.csv"
    assert field.exists() and (tmp_path / "field_a0_p8_n2.csv.json").exists()
    capsys.readouterr()
    assert main(["classify", str(field), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["case"] in report["predicted"]["admissible"]
    assert main(["morse", str(field), "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["symmetric"]["negative_count"] == 2


def test_solve_rejects_lists(capsys):
    assert main(["solve", "--p", "3,4"]) == EXIT_USAGE


def test_morse_radial_modes(capsys):
    assert main(["morse", "--alpha", "0", "--p", "10", "--nr", "256", "--json"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["radial_count"] == 2


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    code = main(["sweep", "--alpha", "0", "--p", "8", "--n", "1..3", *SMALL, "--out", str(out)])
    return out, code


def test_sweep_outputs(sweep_dir):
    out, code = sweep_dir
    assert code == EXIT_OK
    rows = list(csv.DictReader((out / "phase.csv").open()))
    assert list(rows[0]) == cli.PHASE_COLUMNS
    assert [int(r["n"]) for r in rows] == [1, 2, 3]
    assert all(r["consistent"] == "true" for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["nr"] == 32 and len(manifest["cells"]) == 3
    assert "seed0" in manifest["run_id"]
    cell = json.loads((out / "cell_a0_p8_n2.json").read_text())
    assert cell["case"] in cell["predicted"]["admissible"]
    assert (out / cell["field_csv"]).exists()


def test_sweep_is_independent_of_worker_count(sweep_dir, tmp_path, monkeypatch):
    out, _ = sweep_dir
    monkeypatch.setenv("HENON_THREADS", "2")
    assert main(["sweep", "--alpha", "0", "--p", "8", "--n", "1..3", *SMALL,
                 "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "phase.csv").read_text() == (out / "phase.csv").read_text()


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("HENON_THREADS", "many")
    assert main(["sweep", "--p", "8", "--n", "1", *SMALL, "--out", str(tmp_path)]) == EXIT_USAGE


def test_report(sweep_dir):
    out, _ = sweep_dir
    path, rows, broken = write_report(out)
    text = path.read_text()
    assert "166.1492336" in text and "165.9782744" in text
    assert len(rows) == 3 and not broken
    assert all(r["status"] == "pass" for r in rows)
    assert (out / "report.csv").exists()


def test_report_flags_and_corrupt_files(tmp_path):
    cell = {"alpha": 0.0, "p": 50.0, "n": 4, "case": "case3", "regions": 6, "m_n": 2,
            "converged": True, "findings": [], "p_energy": 150.0,
            "predicted": {"admissible": ["case3"], "max_regions": 4}}
    (tmp_path / "cell_a0_p50_n4.json").write_text(json.dumps(cell))
    (tmp_path / "cell_broken.json").write_text("{not json")
    path, rows, broken = write_report(tmp_path)
    assert rows[0]["status"] == "flag"
    assert any("exceed" in f for f in rows[0]["flags"])
    assert broken and "cell_broken.json" in broken[0]
    assert "Unreadable" in path.read_text()
    assert main(["report", str(tmp_path)]) == EXIT_FINDING


def test_report_empty_dir_is_usage_error(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_USAGE
