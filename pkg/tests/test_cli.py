import json
import subprocess
import sys

import pytest

from krylovlab.cli import EXIT_COMPUTE, EXIT_OK, EXIT_USAGE, _Outputs, main


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("KRYLOVLAB_OUT", str(tmp_path))
    return tmp_path


def _config(tmp_path, **extra):
    data = {"experiment": "small", "kind": "gmres", "operator": "diag:1/n",
            "solution": "rule:1/n:10", "orders": [1, 2, 5, 10]}
    data.update(extra)
    folder = tmp_path / "configs"
    folder.mkdir(exist_ok=True)
    path = folder / "small.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestList:
    @pytest.mark.parametrize("what,needle", [("operators", "volterra"),
                                             ("experiments", "sec2.6-baseline"),
                                             ("scenarios", "ex5.1")])
    def test_contains(self, what, needle, capsys):
        assert main(["list", what]) == EXIT_OK
        assert needle in capsys.readouterr().out

    def test_unknown_category(self, capsys):
        assert main(["list", "widgets"]) == EXIT_USAGE


class TestRun:
    def test_writes_csv_and_json(self, out, tmp_path):
        assert main(["run", _config(tmp_path)]) == EXIT_OK
        text = (out / "small.csv").read_text()
        assert text.startswith("experiment,N,")
        assert json.loads((out / "small.json").read_text())["rows"] == 4

    def test_rerun_is_byte_identical(self, out, tmp_path):
        cfg = _config(tmp_path)
        main(["run", cfg])
        first = (out / "small.csv").read_bytes()
        main(["run", cfg, "--jobs", "2"])
        assert (out / "small.csv").read_bytes() == first

    def test_out_flag_beats_env(self, out, tmp_path):
        target = tmp_path / "elsewhere"
        assert main(["run", _config(tmp_path), "--out", str(target)]) == EXIT_OK
        assert (target / "small.csv").exists()

    def test_failing_check_and_strict(self, out, tmp_path):
        cfg = _config(tmp_path, checks=[{"column": "res", "max": 1e-300}])
        assert main(["run", cfg]) == EXIT_OK
        assert main(["run", cfg, "--strict"]) == EXIT_COMPUTE

    def test_bad_config_is_usage_error(self, out, tmp_path):
        assert main(["run", _config(tmp_path, kind="nope")]) == EXIT_USAGE
        assert main(["run", "missing-config"]) == EXIT_USAGE

    def test_compute_failure_removes_outputs(self, out, tmp_path):
        # the Krylov window of the shift outgrows the coefficient cap
        cfg = _config(tmp_path, operator="right-shift-N", solution=None, datum="unit:1",
                      orders=None, N_max=3000)
        assert main(["run", cfg]) == EXIT_COMPUTE
        assert not list(out.glob("small.*"))

    def test_config_not_overwritten(self, tmp_path, monkeypatch):
        cfg = _config(tmp_path)
        monkeypatch.setenv("KRYLOVLAB_OUT", str(tmp_path / "configs"))
        before = (tmp_path / "configs" / "small.json").read_text()
        assert main(["run", cfg]) == EXIT_USAGE
        assert (tmp_path / "configs" / "small.json").read_text() == before

    def test_rollback_removes_written_files(self, tmp_path):
        outputs = _Outputs()
        outputs.write(tmp_path / "a.csv", "x\r\n")
        outputs.rollback()
        assert not list(tmp_path.iterdir())

    def test_bad_jobs(self, out, tmp_path):
        assert main(["run", _config(tmp_path), "--jobs", "0"]) == EXIT_USAGE

    def test_missing_subcommand(self):
        assert main([]) == EXIT_USAGE


class TestPlot:
    def test_plot_expression(self, out, tmp_path):
        main(["run", _config(tmp_path)])
        svg = tmp_path / "p.svg"
        assert main(["plot", str(out / "small.csv"), "--cols", "res", "err*N^2",
                     "--out", str(svg), "--log"]) == EXIT_OK
        assert svg.read_text().count("<polyline") >= 2

    def test_unknown_column(self, out, tmp_path, capsys):
        main(["run", _config(tmp_path)])
        svg = tmp_path / "p.svg"
        code = main(["plot", str(out / "small.csv"), "--cols", "nope", "--out", str(svg)])
        assert code == EXIT_USAGE
        assert "available" in capsys.readouterr().err
        assert not svg.exists()

    def test_missing_csv(self, tmp_path):
        assert main(["plot", str(tmp_path / "x.csv"), "--cols", "a",
                     "--out", str(tmp_path / "p.svg")]) == EXIT_USAGE


class TestGapAndScenario:
    def test_gap(self, out):
        assert main(["gap", "--N", "2", "4", "--ref", "8", "--samples", "16",
                     "--iters", "20"]) == EXIT_OK
        lines = (out / "gap.csv").read_text().splitlines()
        assert lines[0] == "N,delta_hat,dhat,dw_forward,dw_backward,dw_hat"
        assert len(lines) == 3

    def test_scenario(self, out, capsys):
        assert main(["scenario", "ex5.1", "--n", "2", "4", "--strict"]) == EXIT_OK
        data = json.loads((out / "scenario-ex5.1.json").read_text())
        assert data["ok"] and len(data["rows"]) == 2
        assert (out / "scenario-ex5.1.csv").read_text().startswith("n,")
        assert "PASS" in capsys.readouterr().out

    def test_scenario_unknown(self, out):
        assert main(["scenario", "ex0"]) == EXIT_USAGE


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "krylovlab", "list", "scenarios"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0 and "lemma5.1" in proc.stdout
