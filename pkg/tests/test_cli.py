"""Command-line interface: exit codes, overrides, determinism, outputs."""

import csv
import datetime as dt
import json
import os

import pytest

from cojump import cli

SESSION = {"start": "07:00", "end": "16:00", "timezone": "America/Chicago",
           "sampling_seconds": 60}

SCENARIO = """\
n_intervals = 540
n_days = 3
sigma = 0.01, 0.012
rho = 0.6
seed = 100
# day 1 common jump, day 2 disjoint jumps
jump = 1, 270, 0.1, 0.12
jump = 2, 100, 0.1, 0.0
jump = 2, 400, 0.0, -0.12
"""


def _write_config(tmp_path, name="config.json", **extra):
    raw = {
        "session": SESSION,
        "instruments": ["TU", "FV"],
        "pairs": [["TU", "FV"]],
        "scenario": "scenario.txt",
        "bootstrap": {"b_reps": 150, "alpha": 0.05},
        "seed": 0,
        "output": "out",
        "start_date": "2017-03-13",
        "announcements": {
            "events": [{"date": "2017-03-14", "time": "13:00",
                        "timezone": "America/Chicago"}],
            "windows": [[0, 30]],
        },
        "estimator": {"g_spacing": 5},
    }
    raw.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(raw, indent=1))
    (tmp_path / "scenario.txt").write_text(SCENARIO)
    return path


def _stderr_json(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_no_config_anywhere(capsys, monkeypatch):
    monkeypatch.delenv(cli.ENV_CONFIG, raising=False)
    assert cli.main(["decompose"]) == cli.EXIT_CONFIG
    msg = _stderr_json(capsys)
    assert msg["error"] == "config"
    assert cli.ENV_CONFIG in msg["message"]


def test_config_file_missing(capsys, monkeypatch, tmp_path):
    monkeypatch.delenv(cli.ENV_CONFIG, raising=False)
    missing = tmp_path / "nope.json"
    assert cli.main(["report", "--config", str(missing)]) == cli.EXIT_IO
    msg = _stderr_json(capsys)
    assert msg["error"] == "io"
    assert str(missing) in msg["message"]


def test_invalid_json_config(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["report", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert _stderr_json(capsys)["error"] == "config"


def test_unknown_instrument_in_pair(capsys, tmp_path):
    cfg = _write_config(tmp_path, pairs=[["TU", "US"]])
    assert cli.main(["decompose", "--config", str(cfg)]) == cli.EXIT_CONFIG
    msg = _stderr_json(capsys)
    assert "US" in msg["message"]


def test_bad_alpha_and_reps(capsys, tmp_path):
    cfg = _write_config(tmp_path, bootstrap={"b_reps": 150, "alpha": 1.5})
    assert cli.main(["simulate", "--config", str(cfg)]) == cli.EXIT_CONFIG
    cfg = _write_config(tmp_path, name="c2.json")
    assert cli.main(
        ["simulate", "--config", str(cfg), "--bootstrap-reps", "10"]
    ) == cli.EXIT_CONFIG


def test_missing_tick_file_is_io_error(capsys, tmp_path):
    cfg = _write_config(
        tmp_path,
        ticks={"TU": {"path": "absent.csv",
                      "schema": {"timestamp": "t", "price": "p", "volume": "v"}}},
    )
    assert cli.main(["ingest", "--config", str(cfg)]) == cli.EXIT_IO
    msg = _stderr_json(capsys)
    assert msg["error"] == "io"
    assert "absent.csv" in msg["message"]


def test_missing_scenario_file_is_io_error(capsys, tmp_path):
    cfg = _write_config(tmp_path)
    os.remove(tmp_path / "scenario.txt")
    assert cli.main(["simulate", "--config", str(cfg)]) == cli.EXIT_IO
    assert "scenario" in _stderr_json(capsys)["message"]


def test_decompose_without_panels(capsys, tmp_path):
    cfg = _write_config(tmp_path)
    assert cli.main(["decompose", "--config", str(cfg)]) == cli.EXIT_IO
    assert "panel" in _stderr_json(capsys)["message"]


def test_scenario_leg_mismatch(capsys, tmp_path):
    cfg = _write_config(tmp_path, instruments=["TU", "FV", "TY"],
                        pairs=[["TU", "FV"]])
    assert cli.main(["simulate", "--config", str(cfg)]) == cli.EXIT_CONFIG
    assert "legs" in _stderr_json(capsys)["message"]


def test_ingest_writes_panels_and_drop_log(tmp_path):
    rows = ["t,p,v"]
    for day in ("2017-03-13", "2017-03-14"):
        for k in range(0, 3600 * 9, 30):
            h, rem = divmod(k, 3600)
            m, s = divmod(rem, 60)
            rows.append(f"{day} {7 + h:02d}:{m:02d}:{s:02d},{100 + 0.01 * (k % 7):.4f},1")
    (tmp_path / "tu.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "fv.csv").write_text("\n".join(rows) + "\n")
    schema = {"timestamp": "t", "price": "p", "volume": "v"}
    cfg = _write_config(
        tmp_path,
        ticks={"TU": {"path": "tu.csv", "schema": schema},
               "FV": {"path": "fv.csv", "schema": schema}},
    )
    assert cli.main(["ingest", "--config", str(cfg)]) == cli.EXIT_OK
    panels = sorted(os.listdir(tmp_path / "out" / "panels"))
    assert panels == ["panel_2017-03-13.csv", "panel_2017-03-14.csv"]
    assert (tmp_path / "out" / "drop_log.csv").exists()


def test_ingest_requires_sources_for_all_instruments(capsys, tmp_path):
    cfg = _write_config(tmp_path, ticks={})
    assert cli.main(["ingest", "--config", str(cfg)]) == cli.EXIT_CONFIG
    assert "tick source" in _stderr_json(capsys)["message"]


@pytest.fixture()
def full_run(tmp_path):
    cfg = _write_config(tmp_path)
    assert cli.main(["simulate", "--config", str(cfg)]) == cli.EXIT_OK
    assert cli.main(["decompose", "--config", str(cfg)]) == cli.EXIT_OK
    assert cli.main(["report", "--config", str(cfg)]) == cli.EXIT_OK
    return tmp_path, cfg


def test_pipeline_end_to_end(full_run):
    tmp_path, _ = full_run
    out = tmp_path / "out"
    for name in (
        "panels/panel_2017-03-13.csv", "truth.csv", "decompositions.csv",
        "events.csv", "jumps.csv", "outcomes.csv", "failures.csv",
        "cj_qv_share.csv", "correlation_regression.csv", "announcement_logit.csv",
        "shift_rotation.csv", "histogram.csv", "manifest.json",
    ):
        assert (out / name).exists(), name

    rows = list(csv.DictReader(open(out / "decompositions.csv", newline="")))
    assert [r["classification"] for r in rows] == [
        "no_discontinuity", "co_jump", "disjoint_only"
    ]
    cj_day = rows[1]
    assert float(cj_day["cj"]) == pytest.approx(0.1 * 0.12, rel=0.1)

    ev_rows = list(csv.DictReader(open(out / "events.csv", newline="")))
    assert len(ev_rows) == 1
    assert ev_rows[0]["index"] == "270"
    assert ev_rows[0]["time"] == "11:30:00"

    hist = list(csv.DictReader(open(out / "histogram.csv", newline="")))
    assert sum(int(r["count"]) for r in hist) == 1
    hit = next(r for r in hist if r["count"] == "1")
    assert hit["bin_start"] == "11:30:00"

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0
    assert manifest["b_reps"] == 150
    assert set(manifest["inputs"]) == {"decompositions.csv", "events.csv", "tuple_days.csv"}


def test_rerun_is_byte_identical(full_run):
    tmp_path, cfg = full_run
    out = tmp_path / "out"
    first = {
        name: (out / name).read_bytes()
        for name in ("decompositions.csv", "events.csv", "outcomes.csv",
                     "jumps.csv", "manifest.json", "histogram.csv")
    }
    assert cli.main(["decompose", "--config", str(cfg)]) == cli.EXIT_OK
    assert cli.main(["report", "--config", str(cfg)]) == cli.EXIT_OK
    for name, blob in first.items():
        assert (out / name).read_bytes() == blob, name


def test_seed_override_changes_outcomes(full_run):
    tmp_path, cfg = full_run
    out = tmp_path / "out"
    baseline = (out / "outcomes.csv").read_bytes()
    assert cli.main(
        ["decompose", "--config", str(cfg), "--seed", "99", "--output",
         str(tmp_path / "out99")]
    ) == cli.EXIT_IO  # panels live under the new output dir, none found yet
    # reuse the simulated panels: decompose in place with a new seed
    assert cli.main(["decompose", "--config", str(cfg), "--seed", "99"]) == cli.EXIT_OK
    changed = (out / "outcomes.csv").read_bytes()
    assert changed != baseline
    rows = list(csv.DictReader(open(out / "outcomes.csv", newline="")))
    assert all(r["seed"] != "" for r in rows)


def test_manifest_hash_tracks_config_content(full_run):
    tmp_path, cfg = full_run
    out = tmp_path / "out"
    h1 = json.loads((out / "manifest.json").read_text())["config_hash"]
    assert cli.main(["report", "--config", str(cfg)]) == cli.EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["config_hash"] == h1
    raw = json.loads(cfg.read_text())
    raw["seed"] = 1
    cfg.write_text(json.dumps(raw, indent=1))
    assert cli.main(["report", "--config", str(cfg)]) == cli.EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["config_hash"] != h1


def test_env_var_config(full_run, monkeypatch):
    tmp_path, cfg = full_run
    monkeypatch.setenv(cli.ENV_CONFIG, str(cfg))
    assert cli.main(["report"]) == cli.EXIT_OK


def test_report_on_empty_decompositions(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    out.mkdir()
    (out / "decompositions.csv").write_text(
        "date,pair,qv,ic,cj,z,p,rejected,inconclusive,classification,"
        "corr_total,corr_cont\n"
    )
    (out / "events.csv").write_text("date,pair,index,time,size_1,size_2\n")
    assert cli.main(["report", "--config", str(cfg)]) == cli.EXIT_OK
    share = list(csv.reader(open(out / "cj_qv_share.csv", newline="")))
    assert share == [["pair", "days_cj", "qv_total", "pct_cj_qv"]]
    hist = list(csv.DictReader(open(out / "histogram.csv", newline="")))
    assert len(hist) == 18
    assert all(r["count"] == "0" for r in hist)


def test_report_requires_decomposition_outputs(capsys, tmp_path):
    cfg = _write_config(tmp_path)
    assert cli.main(["report", "--config", str(cfg)]) == cli.EXIT_IO
    assert "decomposition" in _stderr_json(capsys)["message"]
