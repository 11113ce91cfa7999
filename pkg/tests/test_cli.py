import json
import subprocess
import sys

import numpy as np

from son_flow.cli import main
from son_flow.fileio import (
    parse_csv_report,
    read_matrix_file,
    write_matrix_file,
)
from son_flow.flow import trajectory_records_from_csv, trajectory_records_from_jsonl
from son_flow.manifold import haar_sample


def run_cli(*argv):
    return main(list(argv))


class TestSimulate:
    def test_haar_seed_converges(self, tmp_path):
        out = tmp_path / "traj.jsonl"
        code = run_cli("simulate", "--n", "3", "--seed", "7", "--out", str(out))
        assert code == 0
        records = trajectory_records_from_jsonl(out.read_text())
        final = np.array(records[-1]["state"]).reshape(3, 3)
        assert np.linalg.norm(final - np.eye(3)) <= 1e-4

    def test_identity_init_file_single_record(self, tmp_path):
        init = tmp_path / "init.txt"
        write_matrix_file(str(init), np.eye(3))
        out = tmp_path / "traj.csv"
        code = run_cli("simulate", "--init-file", str(init), "--format", "csv",
                       "--out", str(out))
        assert code == 0
        assert len(trajectory_records_from_csv(out.read_text())) == 1

    def test_negative_step_size(self, capsys):
        code = run_cli("simulate", "--n", "3", "--seed", "1", "--h", "-1")
        assert code == 1
        assert "step size must be positive" in capsys.readouterr().err

    def test_seed_and_init_file_conflict(self, tmp_path, capsys):
        init = tmp_path / "init.txt"
        write_matrix_file(str(init), np.eye(3))
        code = run_cli("simulate", "--n", "3", "--seed", "1",
                       "--init-file", str(init))
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_source(self, capsys):
        assert run_cli("simulate", "--n", "3") == 1

    def test_max_time_exit_code(self, tmp_path):
        out = tmp_path / "t.jsonl"
        code = run_cli("simulate", "--n", "4", "--seed", "3",
                       "--t-max", "0.1", "--out", str(out))
        assert code == 2

    def test_n_mismatch_with_init_file(self, tmp_path):
        init = tmp_path / "init.txt"
        write_matrix_file(str(init), np.eye(3))
        assert run_cli("simulate", "--n", "4", "--init-file", str(init)) == 1

    def test_csv_json_same_numbers(self, tmp_path):
        a = tmp_path / "t.csv"
        b = tmp_path / "t.jsonl"
        run_cli("simulate", "--n", "3", "--seed", "5", "--t-max", "0.2",
                "--format", "csv", "--out", str(a))
        run_cli("simulate", "--n", "3", "--seed", "5", "--t-max", "0.2",
                "--format", "json", "--out", str(b))
        assert trajectory_records_from_csv(a.read_text()) == \
            trajectory_records_from_jsonl(b.read_text())

    def test_seeded_rerun_bit_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = ["simulate", "--n", "4", "--seed", "9", "--t-max", "1",
                "--format", "csv"]
        assert run_cli(*args, "--out", str(a)) == 2  # t_max hit, fine
        assert run_cli(*args, "--out", str(b)) == 2
        assert a.read_bytes() == b.read_bytes()


class TestBasin:
    def test_small_run(self, tmp_path):
        out = tmp_path / "basin.json"
        code = run_cli("basin", "--n", "3", "--trials", "10", "--seed", "2",
                       "--t-max", "40", "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["counts"]["0"] == 10
        assert data["failures"] == 0
        assert "wall_time" not in data

    def test_byte_identical_reruns(self, tmp_path):
        args = ["basin", "--n", "3", "--trials", "8", "--seed", "4",
                "--t-max", "30"]
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert run_cli(*args, "--out", str(a)) == 0
        assert run_cli(*args, "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_csv_parity(self, tmp_path):
        a = tmp_path / "r.json"
        b = tmp_path / "r.csv"
        args = ["basin", "--n", "3", "--trials", "5", "--seed", "1", "--t-max", "30"]
        run_cli(*args, "--out", str(a), "--format", "json")
        run_cli(*args, "--out", str(b), "--format", "csv")
        from son_flow.fileio import flatten_report

        assert parse_csv_report(b.read_text()) == dict(
            flatten_report(json.loads(a.read_text()))
        )

    def test_contract_violation_exit_code(self, tmp_path):
        # a budget too small to converge leaves failures in the report
        out = tmp_path / "basin.json"
        code = run_cli("basin", "--n", "3", "--trials", "3", "--seed", "2",
                       "--t-max", "0.1", "--out", str(out))
        assert code == 4
        data = json.loads(out.read_text())
        assert data["failures"] == 3


class TestSaddle:
    def test_unstable_escape(self, tmp_path):
        out = tmp_path / "saddle.json"
        code = run_cli("saddle", "--n", "4", "--k", "1", "--eps", "1e-3",
                       "--kind", "unstable", "--trials", "5", "--seed", "3",
                       "--t-max", "80", "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["outcomes"] == [0] * 5

    def test_zero_eps_stays(self, tmp_path):
        out = tmp_path / "saddle.json"
        code = run_cli("saddle", "--n", "4", "--k", "1", "--eps", "0",
                       "--kind", "unstable", "--trials", "3", "--seed", "3",
                       "--t-max", "5", "--out", str(out))
        assert code == 0
        assert json.loads(out.read_text())["outcomes"] == [1] * 3

    def test_kernel_contract(self, tmp_path):
        out = tmp_path / "saddle.json"
        code = run_cli("saddle", "--n", "4", "--k", "1", "--eps", "1e-4",
                       "--kind", "kernel", "--trials", "4", "--seed", "5",
                       "--t-max", "10", "--out", str(out))
        assert code == 0

    def test_bad_k(self, capsys):
        assert run_cli("saddle", "--n", "4", "--k", "0") == 1


class TestSpectrum:
    def test_first_saddle_counts(self, tmp_path):
        out = tmp_path / "spec.json"
        code = run_cli("spectrum", "--n", "3", "--k", "1", "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["counts"] == {"stable": 0, "unstable": 1, "zero": 2}
        assert data["verdict"] == "Saddle"

    def test_identity_stable(self, tmp_path):
        out = tmp_path / "spec.json"
        assert run_cli("spectrum", "--n", "4", "--k", "0", "--out", str(out)) == 0
        data = json.loads(out.read_text())
        assert data["verdict"] == "ExponentiallyStable"
        assert all(abs(v + 1.0) <= 1e-9 for v in data["eigenvalues"])

    def test_haar_frame(self, tmp_path):
        out = tmp_path / "spec.json"
        code = run_cli("spectrum", "--n", "5", "--k", "2", "--frame", "haar",
                       "--seed", "9", "--scale", "2", "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["counts"]["zero"] == 2 * 2 * (5 - 4)


class TestCritical:
    def test_minus_identity(self, tmp_path):
        out = tmp_path / "crit.json"
        code = run_cli("critical", "--n", "4", "--k", "2", "--frame", "identity",
                       "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert np.allclose(np.array(data["theta"]), -np.eye(4))
        assert data["trace"] == -4.0

    def test_classify_file(self, tmp_path):
        mat = tmp_path / "m.txt"
        write_matrix_file(str(mat), np.diag([-1.0, -1.0, 1.0]))
        out = tmp_path / "c.json"
        code = run_cli("critical", "--classify", str(mat), "--out", str(out))
        assert code == 0
        assert json.loads(out.read_text())["component"] == 1

    def test_classify_non_critical(self, tmp_path):
        mat = tmp_path / "m.txt"
        write_matrix_file(str(mat), haar_sample(3, 0).entries)
        out = tmp_path / "c.json"
        assert run_cli("critical", "--classify", str(mat), "--out", str(out)) == 0
        assert json.loads(out.read_text())["component"] is None

    def test_connect_contract(self, tmp_path):
        out = tmp_path / "c.json"
        code = run_cli("critical", "--n", "4", "--k", "1", "--frame", "haar",
                       "--seed", "1", "--connect-seed", "2", "--steps", "40",
                       "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["connect"]["all_in_component"] is True
        assert data["connect"]["max_membership_residual"] <= 1e-7

    def test_requires_n_and_k(self):
        assert run_cli("critical", "--n", "4") == 1


class TestVerify:
    def test_small_dims_pass(self, tmp_path):
        out = tmp_path / "verify.json"
        code = run_cli("verify", "--n", "2,3", "--out", str(out))
        assert code == 0
        data = json.loads(out.read_text())
        assert data["passed"] is True

    def test_bad_dimension_list(self):
        assert run_cli("verify", "--n", "2,x") == 1
        assert run_cli("verify", "--n", "1") == 1


class TestOutputHandling:
    def test_stdout_default(self, capsys):
        assert run_cli("spectrum", "--n", "3", "--k", "1") == 0
        data = json.loads(capsys.readouterr().out)
        assert data["verdict"] == "Saddle"

    def test_no_partial_output_on_bad_directory(self, tmp_path):
        missing = tmp_path / "does-not-exist" / "out.json"
        code = run_cli("spectrum", "--n", "3", "--k", "1", "--out", str(missing))
        assert code == 1
        assert not missing.exists()

    def test_matrix_file_roundtrip(self, tmp_path):
        path = tmp_path / "m.txt"
        m = haar_sample(4, 3).entries
        write_matrix_file(str(path), m)
        assert np.array_equal(read_matrix_file(str(path)), m)
        first = path.read_text().split("\n", 1)[0]
        assert first == "4"

    def test_usage_error_exit_code(self):
        assert run_cli("unknown-subcommand") == 1

    def test_entry_point_subprocess(self, tmp_path):
        out = tmp_path / "s.json"
        proc = subprocess.run(
            [sys.executable, "-m", "son_flow.cli", "spectrum", "--n", "2",
             "--k", "1", "--out", str(out)],
            capture_output=True,
        )
        assert proc.returncode == 0
        data = json.loads(out.read_text())
        assert data["counts"] == {"stable": 0, "unstable": 1, "zero": 0}

    def test_threads_env_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SON_FLOW_THREADS", "2")
        out = tmp_path / "b.json"
        code = run_cli("basin", "--n", "3", "--trials", "4", "--seed", "0",
                       "--t-max", "20", "--out", str(out))
        assert code == 0

    def test_threads_env_invalid(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("SON_FLOW_THREADS", "many")
        code = run_cli("basin", "--n", "3", "--trials", "2", "--seed", "0",
                       "--t-max", "20")
        assert code == 1
