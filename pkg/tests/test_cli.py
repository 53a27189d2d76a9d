"""Tests for the mg1 command line"""

import json

import pytest

from app import cli
from app.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main
from app.services.tails import ClassDiagnostics
from app.config import DATA_DIR
from tests.chains import TEST_DATA

S1 = str(DATA_DIR / "s1.json")
S2 = str(DATA_DIR / "s2.json")


class TestValidate:

    def test_s1(self, capsys):
        assert main(["validate", "--spec", S1]) == EXIT_OK
        out = capsys.readouterr().out
        assert "valid = true" in out
        sigma = next(line for line in out.splitlines() if line.startswith("sigma = "))
        assert float(sigma.split(" = ")[1]) == pytest.approx(-0.2, abs=1e-15)
        assert "assumption1_ok = true" in out

    def test_row_sum_violation(self, capsys):
        assert main(["validate", "--spec", str(TEST_DATA / "bad_row_sums.json")]) == EXIT_INPUT
        out = capsys.readouterr().out
        assert "valid = false" in out
        assert "stochastic" in out

    def test_gamma_too_small(self, capsys):
        assert main(["validate", "--spec", str(TEST_DATA / "gamma_below_one.json")]) == EXIT_INPUT
        assert "gamma" in capsys.readouterr().out

    def test_positive_drift(self, capsys):
        assert main(["validate", "--spec", str(TEST_DATA / "positive_drift.json")]) == EXIT_FAIL
        assert "assumption1_ok = false" in capsys.readouterr().out

    def test_missing_file(self, capsys, tmp_path):
        assert main(["validate", "--spec", str(tmp_path / "nope.json")]) == EXIT_INPUT
        assert "ERROR IO_ERROR:" in capsys.readouterr().err

    def test_malformed_json(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["validate", "--spec", str(path)]) == EXIT_INPUT
        assert "ERROR INVALID_INPUT:" in capsys.readouterr().err

    def test_ragged_matrix(self, capsys, tmp_path):
        doc = json.loads((DATA_DIR / "s1.json").read_text())
        doc["B_minus1"] = [[0.6], [0.1, 0.2]]
        path = tmp_path / "ragged.json"
        path.write_text(json.dumps(doc))
        assert main(["validate", "--spec", str(path)]) == EXIT_INPUT
        assert "INVALID_INPUT" in capsys.readouterr().err


class TestSolve:

    def test_csv_to_stdout(self, capsys):
        assert main(["solve", "--spec", S1, "--N", "1", "--L", "10"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "k,i,pi"
        assert len(lines) == 12
        k, i, pi = lines[1].split(",")
        assert (k, i) == ("0", "0")
        assert float(pi) == pytest.approx(1 / 3, abs=1e-10)

    def test_output_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["solve", "--spec", S2, "--N", "20", "--L", "80", "--out", str(a)]) == EXIT_OK
        assert main(["solve", "--spec", S2, "--N", "20", "--L", "80", "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_chain(self, capsys):
        assert main(["solve", "--spec", str(TEST_DATA / "bad_row_sums.json"), "--N", "2"]) == EXIT_INPUT
        assert "ERROR INVALID_SPEC:" in capsys.readouterr().err

    def test_bad_truncation_level(self, capsys):
        code = main(["solve", "--spec", S1, "--N", "0"])
        assert code != EXIT_OK
        assert "ERROR" in capsys.readouterr().err


class TestSweep:

    def test_bounded_chain(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        assert main(["sweep", "--spec", S1, "--Ns", "1,2", "--Nref", "16", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "N,tv,tv_slack,Fbar,ratio_F,tail_mass_ref,ratio_tail,const_theory"
        assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]
        doc = json.loads(out.with_suffix(".json").read_text())
        assert doc["applicable"] is False
        assert "ratio_F: not_applicable" in capsys.readouterr().out

    def test_reference_too_small(self, capsys):
        assert main(["sweep", "--spec", S2, "--Ns", "10,20", "--Nref", "40"]) == EXIT_INPUT
        assert "ERROR PRECONDITION:" in capsys.readouterr().err

    def test_bad_Ns(self, capsys):
        assert main(["sweep", "--spec", S2, "--Ns", "ten", "--Nref", "40"]) == EXIT_INPUT
        err = capsys.readouterr().err
        assert err.startswith("ERROR INVALID_INPUT:")
        assert len(err.strip().splitlines()) == 1


class TestTailsCheck:

    def test_integrated_power_tail(self, capsys):
        assert main(["tails-check", "--gamma", "3"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "IntegratedTail(gamma=3)" in out
        assert "ExponentialTail (control)" in out
        assert "subexponential" in out

    def test_gamma_too_small(self, capsys):
        assert main(["tails-check", "--gamma", "1"]) == EXIT_INPUT
        assert "ERROR GAMMA_TOO_SMALL:" in capsys.readouterr().err

    def test_control_must_fail(self, capsys, monkeypatch):
        def passing(F, cutoff):
            return [ClassDiagnostics(check="long_tailed", distribution=F.name, xs=[1.0], ratios=[1.0],
                                     target=1.0, tolerance=0.01, limit_estimate=1.0, verdict=True)]

        monkeypatch.setattr(cli, "class_report", passing)
        assert main(["tails-check", "--gamma", "3"]) == EXIT_FAIL
        assert "ExponentialTail (control)" in capsys.readouterr().out


class TestUsageErrors:

    @pytest.mark.parametrize("argv", [
        ["solve", "--spec", S1, "--N", "abc"],
        ["solve", "--spec", S1],
        ["frobnicate"],
        [],
        ["tails-check", "--gamma", "three"],
    ])
    def test_single_line_invalid_input(self, argv, capsys):
        assert main(argv) == EXIT_INPUT
        captured = capsys.readouterr()
        lines = captured.err.strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("ERROR INVALID_INPUT: mg1")
        assert "usage:" not in captured.err

    def test_help_still_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "tails-check" in capsys.readouterr().out
