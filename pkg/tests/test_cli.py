"""End-to-end runs of the command line front end.

Everything goes through main(argv) with files in tmp_path, checking the
documented examples: byte-identical reruns, the binary orthogonal
enumeration row, depolarizing decoupling at zero, and the smoke battery
wall-clock budget.
"""

import csv
import json
import math
import time

import pytest

from softcover import cli
from softcover.errors import MalformedInputError


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_mode_is_validated(self):
        with pytest.raises(MalformedInputError, match="mode"):
            cli.ExperimentConfig(mode="cover-everything")

    def test_trials_floor(self):
        with pytest.raises(MalformedInputError, match="trials"):
            cli.ExperimentConfig(mode="decouple", trials=1)

    def test_epsilon_range_depends_on_mode(self):
        cli.ExperimentConfig(mode="decouple", epsilon=0.05)
        with pytest.raises(MalformedInputError, match="epsilon"):
            cli.ExperimentConfig(mode="cover-quantum", epsilon=0.05, eta=0.01)

    def test_covering_needs_eta_with_epsilon(self):
        with pytest.raises(MalformedInputError, match="eta"):
            cli.ExperimentConfig(mode="cover-cq", epsilon=0.01)

    def test_inline_parse_error_has_location(self):
        with pytest.raises(MalformedInputError, match="line 1"):
            cli.load_instance_doc('{"dim": ')

    def test_missing_file_is_reported(self):
        with pytest.raises(MalformedInputError, match="not found"):
            cli.load_instance_doc("/no/such/config.json")


class TestRunModes:
    def test_audit_lemmas_rerun_is_byte_identical(self, tmp_path):
        argv_base = ["--mode", "audit-lemmas", "--seed", "42", "--trials", "3"]
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        assert cli.main(argv_base + ["--out", str(first)]) == 0
        assert cli.main(argv_base + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        rows = read_rows(first)
        assert len(rows) == 13 * 3
        assert set(rows[0]) == set(cli.AUDIT_COLUMNS)

    def test_cover_cq_binary_orthogonal_exact_row(self, tmp_path):
        out = tmp_path / "cq.csv"
        code = cli.main(["--mode", "cover-cq", "--theta", "2", "--out", str(out)])
        assert code == 0
        (row,) = read_rows(out)
        assert row["mode"] == "exact"
        assert float(row["E_D"]) == 0.5
        assert abs(float(row["bound"]) - math.log2(math.e)) < 1e-12
        assert float(row["slack"]) > 0.0

    def test_decouple_depolarizing_rows_are_zero(self, tmp_path):
        out = tmp_path / "dec.csv"
        code = cli.main(["--mode", "decouple", "--trials", "8", "--out", str(out)])
        assert code == 0
        rows = read_rows(out)
        assert len(rows) == 8
        for row in rows:
            assert abs(float(row["d_value"])) < 1e-10
            assert row["excluded_flag"] == "0"

    def test_cover_quantum_rows_carry_bound_and_target(self, tmp_path):
        out = tmp_path / "q.csv"
        code = cli.main(["--mode", "cover-quantum", "--trials", "5",
                         "--theta", "2", "--seed", "7", "--out", str(out)])
        assert code == 0
        rows = read_rows(out)
        assert [r["trial"] for r in rows] == ["0", "1", "2", "3", "4"]
        assert len({r["bound"] for r in rows}) == 1
        assert abs(float(rows[0]["q2_target"]) - 2.0) < 1e-9
        assert rows[0]["M"] == "1"

    def test_cover_quantum_inline_instance(self, tmp_path):
        out = tmp_path / "q4.csv"
        config = '{"dim": 4, "channel": {"kind": "random", "n_kraus": 2, "seed": 5}}'
        code = cli.main(["--mode", "cover-quantum", "--config", config,
                         "--trials", "6", "--theta", "2", "--out", str(out)])
        assert code == 0
        rows = read_rows(out)
        assert rows[0]["D"] == "4" and rows[0]["M"] == "2"

    def test_cover_classical_default(self, tmp_path):
        out = tmp_path / "cl.csv"
        assert cli.main(["--mode", "cover-classical", "--theta", "2",
                         "--out", str(out)]) == 0
        (row,) = read_rows(out)
        assert row["mode"] == "exact"
        assert float(row["slack"]) > 0.0

    def test_json_format_is_valid_and_deterministic(self, tmp_path):
        argv = ["--mode", "cover-quantum", "--trials", "4", "--seed", "3",
                "--format", "json"]
        first = tmp_path / "r1.json"
        second = tmp_path / "r2.json"
        assert cli.main(argv + ["--out", str(first)]) == 0
        assert cli.main(argv + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        doc = json.loads(first.read_text())
        assert doc["columns"] == list(cli.QUANTUM_COLUMNS)
        assert len(doc["rows"]) == 4
        assert doc["violations"] == 0
        # 17 significant digits survive the round trip
        raw = first.read_text()
        bound = doc["rows"][0][7]
        assert format(bound, ".17g") in raw

    def test_bad_theta_exits_with_usage_error(self, tmp_path, capsys):
        out = tmp_path / "x.csv"
        code = cli.main(["--mode", "cover-quantum", "--theta", "3",
                         "--out", str(out)])
        assert code == 2
        assert "divide" in capsys.readouterr().err

    def test_unknown_ensemble_exits_with_usage_error(self, tmp_path, capsys):
        code = cli.main(["--mode", "cover-cq", "--config",
                         '{"ensemble": "nope"}', "--out", str(tmp_path / "n.csv")])
        assert code == 2
        assert "nope" in capsys.readouterr().err

    def test_epsilon_prints_smoothed_terms(self, tmp_path, capsys):
        out = tmp_path / "e.csv"
        code = cli.main(["--mode", "decouple", "--trials", "4",
                         "--epsilon", "0.01", "--out", str(out)])
        assert code == 0
        assert "smoothed decoupling bound" in capsys.readouterr().out


class TestSuiteCommand:
    def test_smoke_suite_passes_within_budget(self, tmp_path, capsys):
        start = time.monotonic()
        code = cli.main(["--suite", "smoke", "--out", str(tmp_path / "s.txt")])
        elapsed = time.monotonic() - start
        assert code == 0
        assert elapsed < 60.0
        out = capsys.readouterr().out
        assert "suite preset=smoke: PASS" in out
        text = (tmp_path / "s.txt").read_text()
        assert text.count("worst_slack") == 9

    def test_mode_and_suite_are_exclusive(self):
        with pytest.raises(SystemExit):
            cli.build_parser().parse_args(["--mode", "decouple", "--suite", "smoke"])
