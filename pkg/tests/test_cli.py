import json

import pytest

from driftsets.cli import main


def read_lines(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.strip().splitlines()]


class TestSimulate:
    def test_single_run_csv_and_summary(self, tmp_path):
        out = tmp_path / "res"
        code = main(
            [
                "simulate", "--n", "300", "--runs", "1", "--alpha", "0.1",
                "--methods", "split2,wcp", "--seed", "3", "--n-test", "100",
                "--workers", "1", "--out", str(out),
            ]
        )
        assert code == 0
        lines = (out / "simulate_records.csv").read_text().splitlines()
        assert lines[0].startswith("# config:")
        assert lines[1] == "method,run,coverage,width,seed"
        assert len(lines) == 4  # comment + header + one row per method
        summary = json.loads((out / "simulate_summary.json").read_text())
        assert summary["config"]["seed"] == 3
        assert set(summary["methods"]) == {"split2", "wcp"}

    def test_byte_identical_reruns(self, tmp_path):
        args = [
            "simulate", "--n", "300", "--runs", "2", "--alpha", "0.1",
            "--methods", "split2", "--seed", "9", "--n-test", "100",
            "--workers", "1", "--out", str(tmp_path / "a"),
        ]
        assert main(args) == 0
        first_json = (tmp_path / "a" / "simulate_summary.json").read_bytes()
        first_csv = (tmp_path / "a" / "simulate_records.csv").read_bytes()
        assert main(args) == 0
        assert (tmp_path / "a" / "simulate_summary.json").read_bytes() == first_json
        assert (tmp_path / "a" / "simulate_records.csv").read_bytes() == first_csv

    def test_unknown_method_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--methods", "bogus", "--out", str(tmp_path / "x")])
        assert exc.value.code == 2
        assert "valid names" in capsys.readouterr().err

    def test_unwritable_out_is_io_error(self, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("a plain file, not a directory")
        code = main(
            [
                "simulate", "--n", "300", "--runs", "1", "--methods", "split2",
                "--seed", "0", "--n-test", "50", "--workers", "1",
                "--out", str(blocker / "sub"),
            ]
        )
        assert code == 1
        assert "I/O error" in capsys.readouterr().err


def write_fit_csv(tmp_path):
    # four labeled units with residual scores {1, 1, 2, 2} around the mean,
    # two unlabeled: the alpha = 0.5 equation solves at theta = 1
    rows = ["x1,y,t"]
    for y in (10.0, 12.0, 9.0, 13.0):
        rows.append(f"0,{y},0")
    rows.extend(["0,NA,1", "0,NA,1"])
    path = tmp_path / "fit.csv"
    path.write_text("\n".join(rows) + "\n")
    return str(path)


class TestPredict:
    def test_hand_instance_intervals(self, tmp_path, capsys):
        fit_csv = write_fit_csv(tmp_path)
        q = tmp_path / "q.csv"
        q.write_text("x1\n0\n1\n-1\n")
        code = main(
            [
                "predict", "--data", fit_csv, "--x-cols", "x1", "--y-col", "y",
                "--t-col", "t", "--variant", "full", "--nuisance", "trivial",
                "--alpha", "0.5", "--query", str(q),
            ]
        )
        assert code == 0
        lines = read_lines(capsys)
        assert len(lines) == 3
        # mu_hat = 11 (constant covariates), theta_hat = 1
        assert lines[0]["lower"] == pytest.approx(10.0)
        assert lines[0]["upper"] == pytest.approx(12.0)
        assert lines[0]["width"] == pytest.approx(2.0)

    def test_infinite_interval_serialized_as_strings(self, tmp_path, capsys):
        rows = ["x1,y,t", "0,5,0"] + ["0,NA,1"] * 5
        fit_csv = tmp_path / "fit.csv"
        fit_csv.write_text("\n".join(rows) + "\n")
        q = tmp_path / "q.csv"
        q.write_text("x1\n0\n")
        code = main(
            [
                "predict", "--data", str(fit_csv), "--x-cols", "x1", "--y-col", "y",
                "--t-col", "t", "--variant", "full", "--nuisance", "trivial",
                "--alpha", "0.001", "--query", str(q),
            ]
        )
        assert code == 0
        (line,) = read_lines(capsys)
        assert line["lower"] == "-inf" and line["upper"] == "inf" and line["width"] == "inf"

    def test_missing_file_reports_error(self, tmp_path, capsys):
        code = main(
            [
                "predict", "--data", str(tmp_path / "none.csv"), "--x-cols", "x1",
                "--query", str(tmp_path / "also_none.csv"),
            ]
        )
        assert code == 1


class TestSensitivity:
    def test_gamma_zero_equals_standard_row(self, tmp_path):
        out = tmp_path / "sens"
        code = main(
            [
                "sensitivity", "--gammas", "0,0.5,1.0", "--true-scale", "0.5",
                "--n", "1500", "--alpha", "0.2", "--seed", "4", "--out", str(out),
            ]
        )
        assert code == 0
        lines = (out / "sensitivity_records.csv").read_text().splitlines()
        assert lines[0].startswith("# config:")
        rows = [l.split(",") for l in lines[2:]]
        assert len(rows) == 4  # standard + three gamma rows
        by_label = {r[0]: r[1:] for r in rows}
        assert by_label["standard"] == by_label["gamma=0"]

    def test_summary_reproducible(self, tmp_path):
        args = [
            "sensitivity", "--gammas", "0,1", "--n", "800", "--alpha", "0.2",
            "--seed", "5", "--out", str(tmp_path / "a"),
        ]
        assert main(args) == 0
        first = (tmp_path / "a" / "sensitivity_summary.json").read_bytes()
        assert main(args) == 0
        assert (tmp_path / "a" / "sensitivity_summary.json").read_bytes() == first

    def test_coverage_recovers_truth_at_true_scale(self, tmp_path):
        out = tmp_path / "sens"
        assert (
            main(
                [
                    "sensitivity", "--gammas", "0,0.8", "--true-scale", "0.8",
                    "--n", "4000", "--alpha", "0.2", "--seed", "6", "--out", str(out),
                ]
            )
            == 0
        )
        summary = json.loads((out / "sensitivity_summary.json").read_text())
        right = summary["rows"]["gamma=0.8"]["coverage"]
        assert right >= 0.8 - 0.05
