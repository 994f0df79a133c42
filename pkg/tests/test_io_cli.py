import csv
import json

import jsonschema
import numpy as np
import pytest

from sparsebreaks.cli import RunConfig, UsageError, main, run
from sparsebreaks.errors import IoError, NonFiniteEntry, NonMonotonicDates, ParseError
from sparsebreaks.io import (
    SeriesData,
    emit_report,
    ingest_csv,
    load_schema,
    report_dict,
    write_panel_csv,
    write_series_csv,
)
from sparsebreaks.panel import RegressionPanel
from sparsebreaks.pipeline import detect_breaks
from sparsebreaks.synth import SyntheticScenario, VecScenario, generate_panel, generate_vecm


def _write(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _validate(path):
    doc = json.loads((path / "report.json").read_text())
    jsonschema.validate(doc, load_schema())
    return doc


def _plot_rows(path):
    with open(path / "plot.csv", newline="") as fh:
        return list(csv.reader(fh))


def test_series_csv_with_dates(tmp_path):
    data = ingest_csv(_write(tmp_path, "date,a,b\n2001-01,1,2\n2001-02,3.5,-4\n"))
    assert isinstance(data, SeriesData)
    assert data.labels == ("2001-01", "2001-02") and data.names == ("a", "b")
    np.testing.assert_array_equal(data.values, [[1, 2], [3.5, -4]])
    full = ingest_csv(_write(tmp_path, "d,a\n2001-01-31,1\n2001-02-28,2\n"))
    assert full.labels == ("2001-01-31", "2001-02-28")


def test_panel_csv_layout(tmp_path):
    text = "t,y1,y2,x1_1,x1_2,x2_1,x2_2\n1,1,2,1,0,0,1\n2,3,4,1,1,1,1\n"
    panel = ingest_csv(_write(tmp_path, text))
    assert isinstance(panel, RegressionPanel) and panel.shape == (2, 2, 2)
    np.testing.assert_array_equal(panel.design_blocks[0], np.eye(2))
    np.testing.assert_array_equal(panel.responses[1], [3, 4])
    assert panel.period_labels == (1, 2)
    assert isinstance(ingest_csv(_write(tmp_path, text), kind="series"), SeriesData)
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, "t,a\n1,2\n"), kind="panel")


def test_parse_error_location(tmp_path):
    with pytest.raises(ParseError) as info:
        ingest_csv(_write(tmp_path, "t,a,b\n1,1,2\n2,3,oops\n"))
    assert (info.value.row, info.value.column) == (3, 3)
    with pytest.raises(ParseError) as info:
        ingest_csv(_write(tmp_path, "t,a,b\n1,1,2\n2,3\n"))
    assert info.value.row == 3
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, "t,a\nJan,1\n"))
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, "t,a\n1,1\n2001-01,2\n"))
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, ""))
    with pytest.raises(ParseError):
        ingest_csv(_write(tmp_path, "t,a\n"))


def test_label_order_and_finiteness(tmp_path):
    with pytest.raises(NonMonotonicDates):
        ingest_csv(_write(tmp_path, "d,a\n2001-02,1\n2001-01,2\n"))
    with pytest.raises(NonMonotonicDates):
        ingest_csv(_write(tmp_path, "t,a\n1,1\n1,2\n"))
    with pytest.raises(NonFiniteEntry):
        ingest_csv(_write(tmp_path, "t,a\n1,nan\n"))


def test_missing_file(tmp_path):
    with pytest.raises(IoError):
        ingest_csv(tmp_path / "absent.csv")


def test_round_trips(tmp_path):
    panel, _ = generate_panel(SyntheticScenario(seed=3, periods=7, obs_dim=2, coef_dim=3))
    write_panel_csv(tmp_path / "p.csv", panel)
    back = ingest_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.design_blocks, panel.design_blocks)
    np.testing.assert_array_equal(back.responses, panel.responses)
    values = np.random.default_rng(0).standard_normal((5, 2))
    write_series_csv(tmp_path / "s.csv", ["2000-01", "2000-02", "2000-03", "2000-04", "2000-05"], values)
    series = ingest_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(series.values, values)
    assert series.names == ("s1", "s2")


def test_report_documents_validate(tmp_path):
    panel, _ = generate_panel(
        SyntheticScenario(seed=1, periods=30, obs_dim=2, coef_dim=2, jump_schedule=[(12, np.array([8.0, 0.0]))])
    )
    report = detect_breaks(panel, num_lambdas=10)
    emit_report(report, tmp_path / "bic", kind="fit", config={"seed": 1})
    doc = _validate(tmp_path / "bic")
    assert doc["kind"] == "fit" and doc["criterion"] == "bic"
    assert [b["period_index"] for b in doc["breaks"]] == report.break_periods
    rows = _plot_rows(tmp_path / "bic")
    assert rows[0] == ["period", "label", "beta_1", "beta_2"] and len(rows) == 31
    d = report_dict(report, kind="lambda-path", config={})
    assert len(d["path_table"]) == len(report.path_table)
    jsonschema.validate(d, load_schema())
    bad = dict(d)
    del bad["path_table"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, load_schema())


def test_emit_report_into_a_file_path_fails(tmp_path):
    panel, _ = generate_panel(SyntheticScenario(seed=1, periods=10, obs_dim=1, coef_dim=1))
    blocker = _write(tmp_path, "x", name="blocker")
    with pytest.raises(IoError):
        emit_report(detect_breaks(panel, num_lambdas=3), blocker / "out", kind="fit", config={})


def test_cli_synth_fit_and_path(tmp_path, capsys):
    assert main(["synth", "--output", str(tmp_path / "s"), "--seed", "4", "--break-at", "30"]) == 0
    truth = json.loads((tmp_path / "s" / "truth.json").read_text())
    assert truth["seed"] == 4 and [j["period"] for j in truth["jumps"]] == [30]
    panel_csv = str(tmp_path / "s" / "panel.csv")
    assert main(["fit", "--input", panel_csv, "--output", str(tmp_path / "f"), "--fixed-k", "1"]) == 0
    doc = _validate(tmp_path / "f")
    assert doc["criterion"] == "fixed_k=1" and doc["breaks"][0]["period_index"] == 30
    assert doc["config"]["fixed_k"] == 1 and "seed" not in doc["config"]
    assert main(["lambda-path", "--input", panel_csv, "--output", str(tmp_path / "p"), "--num-lambdas", "12"]) == 0
    doc = _validate(tmp_path / "p")
    assert len(doc["path_table"]) == 12


def test_cli_vecm(tmp_path):
    scenario = VecScenario(
        seed=2, gammas=np.zeros((1, 2, 2)), pi=np.array([[-0.4, 0.4], [0.0, 0.0]]), length=80
    )
    x, _ = generate_vecm(scenario)
    labels = [f"{1990 + i // 12}-{i % 12 + 1:02d}" for i in range(80)]
    write_series_csv(tmp_path / "x.csv", labels, x, names=["a", "b"])
    code = main(["vecm", "--input", str(tmp_path / "x.csv"), "--output", str(tmp_path / "v"),
                 "--lags", "1", "--rank", "1", "--fixed-k", "1"])
    assert code == 0
    doc = _validate(tmp_path / "v")
    assert doc["vecm"]["effective_T"] == 78
    rows = _plot_rows(tmp_path / "v")
    assert rows[0] == ["period", "label", "degree"]
    assert len(rows) - 1 == doc["vecm"]["effective_T"]
    assert rows[1][1] == labels[2]


def _stderr_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["fit", "--input", str(tmp_path / "none.csv"), "--output", str(tmp_path / "o")]) == 3
    assert _stderr_error(capsys)["error"] == "IoError"
    bad = _write(tmp_path, "t,y1,x1_1\n1,1,oops\n")
    assert main(["fit", "--input", str(bad), "--output", str(tmp_path / "o")]) == 4
    assert _stderr_error(capsys)["exit_code"] == 4
    flat = _write(tmp_path, "t,y1,x1_1\n1,2,0\n2,3,0\n3,2,0\n", name="flat.csv")
    assert main(["fit", "--input", str(flat), "--output", str(tmp_path / "o")]) == 5
    assert _stderr_error(capsys)["error"] == "DegenerateDesign"
    assert main(["fit", "--input", str(flat), "--output", str(tmp_path / "o"),
                 "--lambda", "0.1", "--fixed-k", "1"]) == 2
    assert _stderr_error(capsys)["error"] == "UsageError"
    with pytest.raises(SystemExit) as info:
        main(["fit", "--input", str(flat)])
    assert info.value.code == 2


def test_run_config_validation():
    with pytest.raises(UsageError):
        RunConfig(subcommand="vecm", output="o", input="i").validate()
    with pytest.raises(UsageError):
        RunConfig(subcommand="synth", output="o").validate()
    cfg = RunConfig(subcommand="synth", output="o", seed=1)
    cfg.validate()
    assert "fixed_k" not in cfg.to_json() and cfg.to_json()["seed"] == 1
    assert run(RunConfig(subcommand="synth", output="o")) == 2
