"""CLI behavior: files, schemas, determinism, exit codes."""

import csv
import json

import pytest

from popsim.cli import EXIT_CONFIG, EXIT_INCORRECT, EXIT_OK, main


def run_cli(*argv):
    return main(list(argv))


class TestRun:
    def test_majority_run_files_and_schema(self, tmp_path):
        code = run_cli("run", "--protocol", "majority", "--n", "200", "--gap", "2",
                       "--seed", "1", "--out", str(tmp_path), "--label", "r1")
        assert code == EXIT_OK
        d = tmp_path / "majority" / "r1"
        result = json.loads((d / "result.json").read_text())
        assert set(result) == {"output", "correct", "stabilization_time",
                               "silent", "interactions"}
        assert result["output"] == "A" and result["correct"] is True
        assert result["silent"] is True
        meta = json.loads((d / "meta.json").read_text())
        assert meta["n"] == 200 and meta["seed"] == 1
        with open(d / "timeline.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows and set(rows[0]) == {"parallel_time", "key", "count"}

    def test_parity_error_exit_1(self, tmp_path, capsys):
        code = run_cli("run", "--protocol", "majority", "--n", "199", "--gap", "2",
                       "--out", str(tmp_path), "--label", "bad")
        assert code == EXIT_CONFIG
        assert "even" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        for label in ("x", "y"):
            assert run_cli("run", "--n", "150", "--gap", "4", "--seed", "7",
                           "--out", str(tmp_path), "--label", label) == EXIT_OK
        base = tmp_path / "majority"
        for name in ("result.json", "timeline.csv"):
            assert (base / "x" / name).read_bytes() == (base / "y" / name).read_bytes()

    def test_truncated_run_reports_incorrect(self, tmp_path):
        code = run_cli("run", "--n", "200", "--gap", "2", "--stop", "time=1",
                       "--out", str(tmp_path), "--label", "cut")
        assert code == EXIT_INCORRECT
        result = json.loads((tmp_path / "majority" / "cut" / "result.json").read_text())
        assert result["correct"] is False and result["silent"] is False

    def test_clock_run_writes_csvs(self, tmp_path):
        code = run_cli("run", "--protocol", "clock", "--n", "5000", "--p", "1",
                       "--k", "3", "--L", "3", "--out", str(tmp_path), "--label", "c")
        assert code == EXIT_OK
        d = tmp_path / "clock" / "c"
        assert (d / "minutes.csv").exists() and (d / "crossings.csv").exists()

    def test_sizeest_report(self, tmp_path):
        code = run_cli("run", "--protocol", "sizeest", "--n", "12", "--seed", "3",
                       "--out", str(tmp_path), "--label", "s")
        assert code == EXIT_OK
        rep = json.loads((tmp_path / "sizeest" / "s" / "report.json").read_text())
        assert rep["l_levels"] == [2, 3] and rep["f_value"] == 3
        assert set(rep) == {"n", "l_levels", "f_value", "silence_time", "ok"}

    def test_backup_run(self, tmp_path):
        code = run_cli("run", "--protocol", "backup", "--n", "8", "--gap", "0",
                       "--seed", "2", "--out", str(tmp_path), "--label", "b")
        assert code == EXIT_OK
        result = json.loads((tmp_path / "backup" / "b" / "result.json").read_text())
        assert result["output"] == "T" and result["correct"] is True

    def test_config_file_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 120\ngap = 6\nseed = 9\n")
        code = run_cli("run", "--config", str(cfg), "--gap", "2",
                       "--out", str(tmp_path), "--label", "cfg")
        assert code == EXIT_OK
        meta = json.loads((tmp_path / "majority" / "cfg" / "meta.json").read_text())
        assert meta["n"] == 120      # from file
        assert meta["gap"] == 2      # flag overrides file
        assert meta["seed"] == 9

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("POPSIM_SEED", "424242")
        assert run_cli("run", "--n", "64", "--gap", "2",
                       "--out", str(tmp_path), "--label", "env") == EXIT_OK
        meta = json.loads((tmp_path / "majority" / "env" / "meta.json").read_text())
        assert meta["seed"] == 424242


class TestSweep:
    def test_gap_axis_summary(self, tmp_path):
        code = run_cli("sweep", "--axis", "gap", "--values", "0,2,20", "--n", "120",
                       "--trials", "3", "--seed", "5", "--out", str(tmp_path),
                       "--label", "sw")
        assert code == EXIT_OK
        with open(tmp_path / "majority" / "sw" / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["axis_value"] for r in rows] == ["0", "2", "20"]
        assert all(r["correct_rate"] == "1.0" for r in rows)
        assert set(rows[0]) == {"axis_value", "trials", "correct_rate",
                                "mean_time", "p90_time"}

    def test_single_point_single_trial_matches_run(self, tmp_path):
        assert run_cli("sweep", "--axis", "n", "--values", "150", "--gap", "4",
                       "--trials", "1", "--seed", "7", "--out", str(tmp_path),
                       "--label", "sw1") == EXIT_OK
        with open(tmp_path / "majority" / "sw1" / "summary.csv") as fh:
            row = next(csv.DictReader(fh))
        # trial 0 uses spawn_seed(7, 0); reproduce directly
        from popsim import MajoritySpec, Silent, majority_inputs, new_population, run_until
        from popsim.majority import paper_sim_params
        from popsim.rng import spawn_seed
        pop = new_population(MajoritySpec(paper_sim_params(150)),
                             majority_inputs(150, 4), seed=spawn_seed(7, 0))
        res = run_until(pop, Silent(), guard=10**9, record_timeline=False)
        assert float(row["mean_time"]) == pytest.approx(res.stabilization_time)
        assert float(row["p90_time"]) == pytest.approx(res.stabilization_time)


class TestExperimentCmd:
    def test_epidemic_json(self, tmp_path):
        code = run_cli("experiment", "epidemic", "--n", "20000", "--trials", "3",
                       "--seed", "3", "--out", str(tmp_path), "--label", "e")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "experiment" / "e" / "experiment.json").read_text())
        assert doc["name"] == "epidemic" and doc["pass"] is True
        assert len(doc["samples"]) == 3

    def test_unknown_experiment_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("experiment", "nonsense", "--out", str(tmp_path))
        assert exc.value.code == EXIT_CONFIG

    def test_minutes_experiment(self, tmp_path):
        code = run_cli("experiment", "minutes", "--n", "20000", "--trials", "2",
                       "--p", "1", "--k", "4", "--L", "5", "--seed", "1",
                       "--out", str(tmp_path), "--label", "m")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "experiment" / "m" / "experiment.json").read_text())
        assert doc["name"] == "minutes" and len(doc["samples"]) == 20
