import csv
import datetime as dt
import json

import pytest

from windbma import cli
from windbma.dataset import load, save, simulate
from windbma.mixture import BmaModel, LinkParams

TRUTH = BmaModel.two_group(0.4, LinkParams(0.3, 1.1, 0.6, 0.2))
FAST = ["--window-days", "5"]


@pytest.fixture(scope="module")
def archive_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "archive.csv"
    save(simulate(TRUTH, 12, 4, seed=3), path)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_config_validation():
    with pytest.raises(ValueError):
        cli.RunConfig(window_days=0)
    with pytest.raises(ValueError):
        cli.RunConfig(levels=(0.5, 1.0))


def test_fit_writes_model(archive_path, tmp_path):
    code = cli.main(["fit", "--data", str(archive_path), "--date", "2010-10-10",
                     "--out-dir", str(tmp_path), *FAST])
    assert code == 0
    doc = json.loads((tmp_path / "model_2010-10-10.json").read_text())
    assert doc["scheme"] == "two-group"
    assert doc["fit_window"] == {"start": "2010-10-05", "end": "2010-10-09"}
    assert doc["n_train_cases"] == 20
    assert 0.0 <= doc["weights"]["omega"] <= 1.0


def test_fit_three_group(archive_path, tmp_path):
    code = cli.main(["fit", "--data", str(archive_path), "--date", "2010-10-10",
                     "--scheme", "three-group", "--out-dir", str(tmp_path), *FAST])
    assert code == 0
    w = json.loads((tmp_path / "model_2010-10-10.json").read_text())["weights"]
    assert set(w) == {"omega_c", "omega_o", "omega_e"}
    assert w["omega_c"] + 5 * w["omega_o"] + 5 * w["omega_e"] == pytest.approx(1, abs=1e-10)


def test_fit_empty_window_exit_code(archive_path, tmp_path, capsys):
    code = cli.main(["fit", "--data", str(archive_path), "--date", "2010-10-01",
                     "--out-dir", str(tmp_path)])
    assert code == 2
    assert "2010-09-03..2010-09-30" in capsys.readouterr().err


def test_runtime_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("nonsense\n")
    assert cli.main(["fit", "--data", str(bad), "--date", "2010-10-10"]) == 1
    assert cli.main(["fit", "--data", str(tmp_path / "missing.csv"),
                     "--date", "2010-10-10"]) == 1
    assert "error" in capsys.readouterr().err


def test_verify_outputs(archive_path, tmp_path):
    out = tmp_path / "v"
    code = cli.main(["verify", "--data", str(archive_path), "--from", "2010-10-08",
                     "--to", "2010-10-10", "--out-dir", str(out), *FAST])
    assert code == 0
    for name in ("scores.json", "scores.csv", "rank_histogram.csv", "pit_histogram.csv",
                 "per_day.csv", "per_case.csv"):
        assert (out / name).exists()
    doc = json.loads((out / "scores.json").read_text())
    assert doc["bma"]["n_cases"] == doc["raw"]["n_cases"] == 12
    assert sum(doc["pit_histogram"]["bin_counts"]) == 12
    assert sum(doc["rank_histogram"]["bin_counts"]) == 12
    assert 0.0 <= doc["ks"]["p_value"] <= 1.0
    labels = [r["forecast"] for r in _rows(out / "scores.csv")]
    assert labels == ["bma", "bma", "raw", "raw"]
    per_case = _rows(out / "per_case.csv")
    assert len(per_case) == 12
    assert {"lower_0.667", "upper_0.9", "pit", "bma_crps"} <= set(per_case[0])


def test_verify_single_day_counts_stations(archive_path, tmp_path):
    cli.main(["verify", "--data", str(archive_path), "--from", "2010-10-09",
              "--to", "2010-10-09", "--out-dir", str(tmp_path), *FAST])
    doc = json.loads((tmp_path / "scores.json").read_text())
    assert doc["bma"]["n_cases"] == 4


def test_verify_has_no_forward_leakage(archive_path, tmp_path):
    cli.main(["verify", "--data", str(archive_path), "--from", "2010-10-07",
              "--to", "2010-10-12", "--out-dir", str(tmp_path), *FAST])
    for row in _rows(tmp_path / "per_day.csv"):
        day = dt.date.fromisoformat(row["date"])
        assert dt.date.fromisoformat(row["max_train_date"]) <= day - dt.timedelta(days=1)
        assert dt.date.fromisoformat(row["window_end"]) == day - dt.timedelta(days=1)


def test_verify_skips_unfittable_days(archive_path, tmp_path, caplog):
    code = cli.main(["verify", "--data", str(archive_path), "--from", "2010-10-01",
                     "--to", "2010-10-03", "--out-dir", str(tmp_path), *FAST])
    assert code == 0
    dates = [r["date"] for r in _rows(tmp_path / "per_day.csv")]
    assert dates == ["2010-10-02", "2010-10-03"]


def test_verify_without_any_fittable_day(archive_path, tmp_path):
    code = cli.main(["verify", "--data", str(archive_path), "--from", "2010-10-01",
                     "--to", "2010-10-01", "--out-dir", str(tmp_path)])
    assert code == 2


def test_sweep_rows_and_fixed_range(archive_path, tmp_path):
    code = cli.main(["sweep", "--data", str(archive_path), "--from", "2010-10-11",
                     "--to", "2010-10-12", "--min-days", "3", "--max-days", "6",
                     "--out-dir", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert [int(r["window_days"]) for r in rows] == [3, 4, 5, 6]
    assert {(r["verify_from"], r["verify_to"]) for r in rows} == {("2010-10-11", "2010-10-12")}
    assert {r["n_cases"] for r in rows} == {"8"}


def test_sweep_needs_history(archive_path, tmp_path, capsys):
    code = cli.main(["sweep", "--data", str(archive_path), "--from", "2010-10-05",
                     "--to", "2010-10-06", "--min-days", "3", "--max-days", "10",
                     "--out-dir", str(tmp_path)])
    assert code == 2
    assert "needs data from 2010-09-25" in capsys.readouterr().err


def test_weights_series_and_summary(archive_path, tmp_path):
    code = cli.main(["weights", "--data", str(archive_path), "--from", "2010-10-08",
                     "--to", "2010-10-12", "--scheme", "three-group",
                     "--out-dir", str(tmp_path), *FAST])
    assert code == 0
    rows = _rows(tmp_path / "weights.csv")
    assert len(rows) == 5
    assert {"omega_c", "omega_o", "omega_e", "b0", "b1", "c0", "c1"} <= set(rows[0])
    summary = json.loads((tmp_path / "weights_summary.json").read_text())
    assert summary["n_days"] == 5
    assert 0.0 <= summary["real_mixture_fraction"] <= 1.0
    assert set(summary["relative_sd"]) == {"omega_c", "omega_o", "omega_e",
                                           "b0", "b1", "c0", "c1"}


def test_weight_summary_counts_real_mixtures():
    rows = [{"omega": w, "b0": 1.0, "b1": 1.0, "c0": 1.0, "c1": 0.5} for w in
            (0.5, 0.995, 0.2, 1.0)]
    s = cli.weight_summary(rows, ["omega"], cli.GroupScheme.two_group())
    assert s["real_mixture_fraction"] == 0.5
    assert s["relative_sd"]["b1"] == 0.0


def test_predict(archive_path, tmp_path):
    model_path = tmp_path / "m.json"
    model_path.write_text(TRUTH.to_json())
    code = cli.main(["predict", "--data", str(archive_path), "--model", str(model_path),
                     "--date", "2010-10-03", "--out-dir", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "predict_2010-10-03.csv")
    assert len(rows) == 4
    assert all(float(r["lower_0.9"]) < float(r["median"]) < float(r["upper_0.9"])
               for r in rows)


def test_simulate_command(tmp_path):
    args = ["simulate", "--days", "5", "--stations", "3", "--seed", "4", "--omega", "0.5"]
    assert cli.main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    archive = load(tmp_path / "a.csv")
    assert len(archive) == 15
    assert all(c.obs == 0 or c.obs >= 0.1 for c in archive.cases)


def test_simulate_from_truth_file(tmp_path):
    truth = tmp_path / "truth.json"
    truth.write_text(BmaModel.three_group(0.5, 0.06, 0.04, TRUTH.link).to_json())
    assert cli.main(["simulate", "--truth", str(truth), "--days", "2", "--stations", "2",
                     "--out-dir", str(tmp_path)]) == 0
    assert len(load(tmp_path / "archive.csv")) == 4
    assert cli.main(["simulate", "--scheme", "three-group", "--out-dir", str(tmp_path)]) == 1


def test_commands_are_byte_reproducible(archive_path, tmp_path):
    for run in ("a", "b"):
        cli.main(["verify", "--data", str(archive_path), "--from", "2010-10-09",
                  "--to", "2010-10-10", "--seed", "5", "--out-dir", str(tmp_path / run), *FAST])
    for name in ("scores.json", "scores.csv", "per_case.csv", "per_day.csv",
                 "rank_histogram.csv", "pit_histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
