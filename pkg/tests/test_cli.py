import csv
import json
import subprocess
import sys

import pytest

from qmlkit import cli
from qmlkit.experiments import RUNNERS, RunResult
from qmlkit.qnn import TrainingError

SUMMARY_FIELDS = {"schema", "experiment", "config", "final_loss", "metrics", "wall_time_s", "shots_total", "circuits",
                  "cache_hits", "files"}


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = cli.main([*argv, "--output", str(out)])
    return code, out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- resolution ------------------------------------------------------------------------------------------


def test_shots_imply_sampled_and_p_implies_depolarizing():
    cfg, _ = cli.resolve(["qnn-abs", "--shots", "100"])
    assert cfg.backend == "sampled" and cfg.shots == 100
    cfg, _ = cli.resolve(["pqk-matern", "--p", "0.1", "--shots", "50"])
    assert cfg.backend == "depolarizing"
    cfg, _ = cli.resolve(["kernel-regularize"])
    assert (cfg.backend, cfg.shots, cfg.p) == ("depolarizing", 500, 0.05)
    cfg, _ = cli.resolve(["kernel-regularize", "--backend", "exact"])
    assert cfg.backend == "exact" and cfg.shots is None


def test_config_file_is_overridden_by_flags(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"nu": 1.5, "length-scale": 0.5, "seed": 4}))
    cfg, run = cli.resolve(["pqk-matern", "--config", str(path), "--nu", "2.5"])
    assert cfg.nu == 2.5 and cfg.length_scale == 0.5 and cfg.seed == 4
    assert run["output"].endswith("pqk-matern")


@pytest.mark.parametrize("argv", [
    ["qnn-abs", "--backend", "exact", "--shots", "10"],
    ["pqk-matern", "--epochs", "3"],
    ["pqk-matern", "--nu", "1.0"],
    ["qnn-abs", "--backend", "quantum"],
    ["pipeline-search", "--C-grid", "a,b"],
    ["no-such-experiment"],
])
def test_config_errors_exit_two(tmp_path, argv, capsys):
    code, out = run(tmp_path, *argv)
    assert code == 2
    assert not out.exists()


def test_misapplied_knob_in_config_file_exits_two(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"maxiter": 5}))
    assert run(tmp_path, "qnn-abs", "--config", str(path))[0] == 2
    path.write_text("[1, 2]")
    assert run(tmp_path, "qnn-abs", "--config", str(path))[0] == 2


def test_numeric_failure_exits_three(tmp_path, monkeypatch, capsys):
    def diverge(cfg, ex):
        raise TrainingError(4, "loss became non-finite")

    monkeypatch.setitem(RUNNERS, "qnn-abs", diverge)
    code, out = run(tmp_path, "qnn-abs")
    assert code == 3
    assert "numeric failure" in capsys.readouterr().err
    assert not out.exists()


# -- artifacts ----------------------------------------------------------------------------------------------


def test_kernel_regularize_outputs_and_summary(tmp_path, capsys):
    code, out = run(tmp_path, "kernel-regularize", "--seed", "3")
    assert code == 0
    printed = capsys.readouterr().out
    assert "eigenvalues" in printed.lower() and "diagonal" in printed.lower()
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == SUMMARY_FIELDS
    assert summary["schema"] == 1 and summary["wall_time_s"] is None
    assert summary["config"]["backend"] == "depolarizing" and summary["shots_total"] > 0
    assert sorted(p.name for p in out.iterdir()) == summary["files"]
    for name in summary["files"]:
        if name.endswith(".csv"):
            rows = read_csv(out / name)
            assert len(rows) >= 2 and all(len(r) == len(rows[0]) for r in rows)


def test_record_time_fills_wall_time(tmp_path):
    code, out = run(tmp_path, "pqk-matern", "--record-time")
    assert code == 0
    assert json.loads((out / "summary.json").read_text())["wall_time_s"] > 0


def test_kernel_optimize_emits_both_prediction_series(tmp_path):
    code, out = run(tmp_path, "kernel-optimize", "--maxiter", "2")
    assert code == 0
    for name in ("plot_prediction_optimized.csv", "plot_prediction_unoptimized.csv", "plot_train_scatter.csv"):
        assert len(read_csv(out / name)) > 2


def test_qnn_abs_prediction_grid(tmp_path):
    code, out = run(tmp_path, "qnn-abs", "--epochs", "2")
    assert code == 0
    rows = read_csv(out / "plot_prediction_curve.csv")
    xs = [float(r[0]) for r in rows[1:]]
    assert len(xs) == 161
    assert xs[0] == pytest.approx(-0.8) and xs[-1] == pytest.approx(0.8)
    assert read_csv(out / "plot_train_scatter.csv")[0][:2] == ["x", "y"]


def test_empty_series_writes_nothing(tmp_path):
    res = RunResult(series={"good": (["x"], [[1.0]]), "empty": (["x"], [])})
    with pytest.raises(ValueError):
        cli.emit_plotdata(res, tmp_path / "plots")
    assert not (tmp_path / "plots").exists() or not any((tmp_path / "plots").iterdir())


@pytest.mark.parametrize("argv", [
    ["kernel-regularize", "--n-jobs", "4"],
    ["pqk-matern", "--shots", "200", "--n-jobs", "3"],
    ["qnn-abs", "--shots", "300", "--epochs", "3", "--variance", "0.005"],
])
def test_reruns_are_byte_identical(tmp_path, argv):
    assert run(tmp_path, *argv, name="a")[0] == 0
    assert run(tmp_path, *argv, name="b")[0] == 0
    a, b = tmp_path / "a", tmp_path / "b"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        if n == "summary.json":
            sa, sb = (json.loads((d / n).read_text()) for d in (a, b))
            assert sa == sb
        else:
            assert (a / n).read_bytes() == (b / n).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qmlkit", "pqk-matern", "--output", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "wrote" in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "qmlkit", "pqk-matern", "--cv", "3"], capture_output=True, text=True)
    assert bad.returncode == 2
