import json

import numpy as np
import pytest

from proxdeconv import Image
from proxdeconv.cli import main
from proxdeconv.rasters import read_raster, write_raster


@pytest.fixture
def workspace(tmp_path):
    """Truth, identity PSF, and a small count raster on disk."""
    truth = np.zeros((6, 6))
    truth[1:4, 2:5] = [[3, 0, 7], [0, 5, 0], [9, 0, 4]]
    counts = truth.copy()  # integer-valued, doubles as a noiseless count map
    paths = {
        "truth": str(tmp_path / "truth.f64"),
        "psf": str(tmp_path / "psf.f64"),
        "counts": str(tmp_path / "counts.pgm"),
        "dir": tmp_path,
    }
    write_raster(paths["truth"], Image.from_2d(truth))
    write_raster(paths["psf"], Image.from_2d([[1.0]]))
    write_raster(paths["counts"], Image.from_2d(counts))
    return paths


def _read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestSimulate:
    def test_runs_are_byte_identical(self, workspace, capsys):
        out_a = str(workspace["dir"] / "sim_a.pgm")
        out_b = str(workspace["dir"] / "sim_b.pgm")
        base = ["simulate", "--input", workspace["truth"], "--psf",
                workspace["psf"], "--peak", "30", "--seed", "4"]
        assert main(base + ["--out", out_a]) == 0
        assert main(base + ["--out", out_b]) == 0
        assert _read_bytes(out_a) == _read_bytes(out_b)
        assert _read_bytes(out_a + ".prov.json") \
            == _read_bytes(out_b + ".prov.json")
        assert "wrote" in capsys.readouterr().out

    def test_provenance_sidecar(self, workspace):
        out = str(workspace["dir"] / "sim.pgm")
        main(["simulate", "--input", workspace["truth"], "--psf",
              workspace["psf"], "--peak", "30", "--seed", "4", "--out", out])
        with open(out + ".prov.json") as fh:
            prov = json.load(fh)
        assert prov["seed"] == 4
        assert prov["peak"] == 30.0
        assert prov["width"] == 6 and prov["height"] == 6
        assert len(prov["psf_sha256"]) == 64

    def test_replicates_fan_out_with_sequential_seeds(self, workspace):
        out = str(workspace["dir"] / "rep.pgm")
        code = main(["simulate", "--input", workspace["truth"], "--psf",
                     workspace["psf"], "--peak", "30", "--seed", "5",
                     "--replicates", "3", "--out", out])
        assert code == 0
        seeds = []
        for k in range(3):
            path = str(workspace["dir"] / f"rep_{k:03d}.pgm")
            assert read_raster(path).n == 36
            with open(path + ".prov.json") as fh:
                seeds.append(json.load(fh)["seed"])
        assert seeds == [5, 6, 7]

    def test_bad_peak_is_a_usage_error(self, workspace, capsys):
        code = main(["simulate", "--input", workspace["truth"], "--psf",
                     workspace["psf"], "--peak", "0", "--out",
                     str(workspace["dir"] / "x.pgm")])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestDeconvolve:
    def _run(self, workspace, out_name, extra):
        out = str(workspace["dir"] / out_name)
        argv = ["deconvolve", "--counts", workspace["counts"], "--psf",
                workspace["psf"], "--dict", "dirac", "--out", out] + extra
        return main(argv), out

    def test_gamma_flag_is_required(self, workspace, capsys):
        code, _ = self._run(workspace, "x.f64", [])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_gamma_and_grid_are_exclusive(self, workspace, capsys):
        code, _ = self._run(workspace, "x.f64",
                            ["--gamma", "0.5", "--gamma-grid", "0.1,0.5"])
        assert code == 1
        capsys.readouterr()

    def test_converged_run_exits_zero_and_writes_metrics(self, workspace):
        code, out = self._run(workspace, "rest.f64",
                              ["--gamma", "0.5", "--iters", "3000",
                               "--tol", "1e-8"])
        assert code == 0
        with open(out + ".metrics.json") as fh:
            metrics = json.load(fh)
        assert metrics["converged"] is True
        assert metrics["relative_change_trace"][-1] <= 1e-8
        assert metrics["gamma"] == 0.5
        assert read_raster(out).n == 36

    def test_iteration_cap_exits_two(self, workspace):
        code, out = self._run(workspace, "capped.f64",
                              ["--gamma", "0.5", "--iters", "2",
                               "--tol", "1e-14"])
        assert code == 2
        with open(out + ".metrics.json") as fh:
            assert json.load(fh)["converged"] is False

    def test_priors_agree_for_dirac(self, workspace):
        _, out_syn = self._run(workspace, "syn.f64",
                               ["--gamma", "0.5", "--iters", "4000",
                                "--tol", "1e-10", "--prior", "synthesis"])
        _, out_ana = self._run(workspace, "ana.f64",
                               ["--gamma", "0.5", "--iters", "4000",
                                "--tol", "1e-10", "--prior", "analysis"])
        gap = np.max(np.abs(read_raster(out_syn).data
                            - read_raster(out_ana).data))
        assert gap <= 1e-5

    def test_grid_selection_prints_the_winner(self, workspace, capsys):
        code, out = self._run(workspace, "grid.f64",
                              ["--gamma-grid", "0.000001,2.0",
                               "--iters", "3000", "--tol", "1e-10"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "selected_gamma=1e-06" in stdout
        with open(out + ".metrics.json") as fh:
            assert json.load(fh)["gamma"] == 1e-6

    def test_no_timing_zeroes_the_wall_clock(self, workspace):
        code, out = self._run(workspace, "nt.f64",
                              ["--gamma", "0.5", "--iters", "500",
                               "--no-timing"])
        assert code in (0, 2)
        with open(out + ".metrics.json") as fh:
            assert json.load(fh)["wall_time_s"] == 0.0

    def test_custom_metrics_path(self, workspace):
        metrics = str(workspace["dir"] / "m.json")
        code, _ = self._run(workspace, "cm.f64",
                            ["--gamma", "0.5", "--iters", "500",
                             "--metrics", metrics])
        assert code in (0, 2)
        with open(metrics) as fh:
            assert "iterations" in json.load(fh)

    def test_unknown_dictionary_spec_fails_cleanly(self, workspace, capsys):
        out = str(workspace["dir"] / "x.f64")
        code = main(["deconvolve", "--counts", workspace["counts"], "--psf",
                     workspace["psf"], "--dict", "wavelet:levels=2",
                     "--gamma", "0.5", "--out", out])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_theta_outside_range_fails_cleanly(self, workspace, capsys):
        code, _ = self._run(workspace, "x.f64",
                            ["--gamma", "0.5", "--theta", "2.0"])
        assert code == 1
        capsys.readouterr()


class TestEvaluate:
    def test_identical_rasters_score_zero(self, workspace, capsys):
        code = main(["evaluate", "--restored", workspace["truth"],
                     "--truth", workspace["truth"]])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mae"] == 0.0
        assert doc["files"][0]["path"] == workspace["truth"]

    def test_constant_shift_and_means(self, tmp_path, capsys):
        truth = str(tmp_path / "t.f64")
        write_raster(truth, Image.from_2d(np.full((2, 2), 5.0)))
        a = str(tmp_path / "est_a.f64")
        b = str(tmp_path / "est_b.f64")
        write_raster(a, Image.from_2d(np.full((2, 2), 6.0)))
        write_raster(b, Image.from_2d(np.full((2, 2), 8.0)))

        assert main(["evaluate", "--restored", a, "--truth", truth]) == 0
        assert json.loads(capsys.readouterr().out)["mae"] == 1.0

        pattern = str(tmp_path / "est_*.f64")
        assert main(["evaluate", "--glob", pattern, "--truth", truth]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mae"] == 2.0
        assert doc["relative_mae"] == pytest.approx(0.4)
        assert len(doc["files"]) == 2

    def test_out_file_replaces_stdout(self, workspace, capsys):
        out = str(workspace["dir"] / "eval.json")
        code = main(["evaluate", "--restored", workspace["truth"],
                     "--truth", workspace["truth"], "--out", out])
        assert code == 0
        assert capsys.readouterr().out == ""
        with open(out) as fh:
            assert json.load(fh)["mae"] == 0.0

    def test_empty_glob_is_an_error(self, workspace, capsys):
        code = main(["evaluate", "--glob",
                     str(workspace["dir"] / "missing_*.f64"),
                     "--truth", workspace["truth"]])
        assert code == 1
        assert "no files match" in capsys.readouterr().err


class TestGcvScan:
    def test_csv_table_and_selection(self, workspace, capsys):
        out = str(workspace["dir"] / "scan.csv")
        code = main(["gcv-scan", "--counts", workspace["counts"], "--psf",
                     workspace["psf"], "--dict", "dirac",
                     "--gamma-grid", "0.000001,2.0", "--iters", "3000",
                     "--tol", "1e-10", "--out", out])
        assert code == 0
        assert "selected_gamma=1e-06" in capsys.readouterr().out
        with open(out) as fh:
            lines = fh.read().strip().split("\n")
        assert lines[0] == "gamma,gcv"
        assert len(lines) == 3
        first = lines[1].split(",")
        assert float(first[0]) == 1e-6

    def test_truth_adds_an_mae_column(self, workspace):
        out = str(workspace["dir"] / "scan_mae.csv")
        code = main(["gcv-scan", "--counts", workspace["counts"], "--psf",
                     workspace["psf"], "--dict", "dirac",
                     "--gamma-grid", "0.000001", "--iters", "3000",
                     "--tol", "1e-10", "--truth", workspace["truth"],
                     "--out", out])
        assert code == 0
        with open(out) as fh:
            lines = fh.read().strip().split("\n")
        assert lines[0] == "gamma,gcv,mae"
        assert float(lines[1].split(",")[2]) <= 1e-5


class TestParsing:
    def test_unknown_command_is_a_usage_error(self, capsys):
        assert main(["restore"]) == 1
        capsys.readouterr()

    def test_bad_gamma_grid_ordering(self, workspace, capsys):
        code = main(["deconvolve", "--counts", workspace["counts"], "--psf",
                     workspace["psf"], "--dict", "dirac",
                     "--gamma-grid", "0.5,0.1",
                     "--out", str(workspace["dir"] / "x.f64")])
        assert code == 1
        assert "increasing" in capsys.readouterr().err
