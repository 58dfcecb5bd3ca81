"""``qmlkit <experiment> [options]``: run an experiment and write CSV and JSON artifacts.

Exit codes: 0 success, 2 invalid configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .circuits import DomainError
from .estimators import ConvergenceError
from .executor import ExecutionError, Executor
from .experiments import EXPERIMENTS, RUNNERS, ConfigError, ExperimentConfig, RunResult
from .qnn import TrainingError

SCHEMA = 1

# knob -> experiments accepting it (common flags are accepted everywhere)
KNOBS = {
    "epochs": ("qnn-abs", "qcnn-moons"),
    "maxiter": ("kernel-optimize",),
    "lr": ("qnn-abs", "qcnn-moons", "kernel-optimize"),
    "variance": ("qnn-abs",),
    "shot_policy": ("qnn-abs",),
    "nu": ("pqk-matern",),
    "length_scale": ("pqk-matern",),
    "gamma": ("kernel-optimize",),
    "c_grid": ("pipeline-search",),
    "cv": ("pipeline-search",),
}

EXPERIMENT_DEFAULTS = {
    "kernel-regularize": {"backend": "depolarizing", "shots": 500, "p": 0.05},
}


def _c_grid(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --C-grid {text!r}; expected comma-separated numbers") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmlkit", description="Run quantum machine learning experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file with option values; explicit flags take precedence")
        p.add_argument("--backend", choices=["exact", "sampled", "depolarizing"])
        p.add_argument("--shots", type=int)
        p.add_argument("--p", type=float, help="depolarizing strength")
        p.add_argument("--seed", type=int)
        p.add_argument("--output", help="output directory (default runs/<experiment>)")
        p.add_argument("--log-file", dest="log_file")
        p.add_argument("--log-level", dest="log_level")
        p.add_argument("--cache", choices=["off", "memory", "disk"])
        p.add_argument("--n-jobs", dest="n_jobs", type=int)
        p.add_argument("--record-time", dest="record_time", action="store_true",
                       help="store wall time in the summary (makes it run-dependent)")
        if name in KNOBS["epochs"]:
            p.add_argument("--epochs", type=int)
        if name in KNOBS["maxiter"]:
            p.add_argument("--maxiter", type=int)
        if name in KNOBS["lr"]:
            p.add_argument("--lr", type=float)
        if name in KNOBS["variance"]:
            p.add_argument("--variance", type=float)
            p.add_argument("--shot-policy", dest="shot_policy", choices=["fixed", "rstd"])
        if name in KNOBS["nu"]:
            p.add_argument("--nu", type=float)
            p.add_argument("--length-scale", dest="length_scale", type=float)
        if name in KNOBS["gamma"]:
            p.add_argument("--gamma", type=float)
        if name in KNOBS["c_grid"]:
            p.add_argument("--C-grid", dest="c_grid", type=_c_grid)
            p.add_argument("--cv", type=int)
    return parser


RUN_KEYS = ("output", "log_file", "log_level", "record_time")


def resolve(argv) -> tuple[ExperimentConfig, dict]:
    """Merge defaults, config file and flags (flags win)."""
    args = vars(build_parser().parse_args(argv))
    name = args.pop("experiment")
    values: dict = dict(EXPERIMENT_DEFAULTS.get(name, {}))
    if "config" in args:
        path = args.pop("config")
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        loaded.pop("experiment", None)
        if "c_grid" in loaded and not isinstance(loaded["c_grid"], (list, tuple)):
            loaded["c_grid"] = _c_grid(loaded["c_grid"])
        values.update(loaded)
    if "p" in args and "backend" not in args and values.get("backend", "exact") == "exact":
        values["backend"] = "depolarizing"
    if "shots" in args and "backend" not in args and "backend" not in values:
        values["backend"] = "sampled"  # shots imply a shot-based backend
    values.update(args)
    if values.get("backend") == "exact" and "shots" not in args and "shots" in EXPERIMENT_DEFAULTS.get(name, {}):
        values.pop("shots", None)
        values.pop("p", None)
    run = {k: values.pop(k) for k in RUN_KEYS if k in values}
    known = set(ExperimentConfig.__dataclass_fields__) - {"experiment"}
    bad = sorted(set(values) - known)
    if bad:
        raise ConfigError(f"unknown option(s) {bad}")
    for knob, owners in KNOBS.items():
        if knob in values and name not in owners:
            raise ConfigError(f"option {knob!r} does not apply to {name}")
    if "c_grid" in values:
        values["c_grid"] = tuple(float(c) for c in values["c_grid"])
    cfg = ExperimentConfig(experiment=name, **values)
    cfg.validate()
    run.setdefault("output", str(Path("runs") / name))
    return cfg, run


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def emit_plotdata(result: RunResult, outdir) -> list[str]:
    """Write each plot series as ``plot_<name>.csv``; nothing is written if any series is empty."""
    if not result.series:
        raise ValueError("run produced no plot series")
    for name, (_, rows) in result.series.items():
        if not rows:
            raise ValueError(f"plot series {name!r} is empty")
    texts = {f"plot_{name}.csv": _csv_text(h, rows) for name, (h, rows) in result.series.items()}
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for fname, text in texts.items():
        (outdir / fname).write_text(text)
    return sorted(texts)


def write_artifacts(cfg: ExperimentConfig, result: RunResult, ex: Executor, outdir, wall_time) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, (header, rows) in result.tables.items():
        (outdir / f"{name}.csv").write_text(_csv_text(header, rows))
        files.append(f"{name}.csv")
    files += emit_plotdata(result, outdir)
    summary = {
        "schema": SCHEMA,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "final_loss": result.final_loss,
        "metrics": result.metrics,
        "wall_time_s": wall_time,
        "shots_total": ex.stats["shots"],
        "circuits": ex.stats["circuits"],
        "cache_hits": ex.stats["cache_hits"],
        "files": sorted(files) + ["summary.json"],
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    return summary


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg, run = resolve(argv)
    except ConfigError as exc:
        print(f"qmlkit: configuration error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else 2
    except (TypeError, ValueError) as exc:
        print(f"qmlkit: configuration error: {exc}", file=sys.stderr)
        return 2
    logger = logging.getLogger("qmlkit")
    handler = None
    if run.get("log_file"):
        handler = logging.FileHandler(run["log_file"])
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
        logger.addHandler(handler)
    try:
        ex = Executor(cfg.plan(run.get("log_level", "INFO" if run.get("log_file") else "WARNING")))
        t0 = time.perf_counter()
        try:
            result = RUNNERS[cfg.experiment](cfg, ex)
        except (TrainingError, FloatingPointError, np.linalg.LinAlgError, ConvergenceError, DomainError,
                ExecutionError) as exc:
            print(f"qmlkit: numeric failure: {exc}", file=sys.stderr)
            return 3
        wall = time.perf_counter() - t0 if run.get("record_time") else None
        summary = write_artifacts(cfg, result, ex, run["output"], wall)
        for line in result.printed:
            print(line)
        print(f"{cfg.experiment}: wrote {len(summary['files'])} files to {run['output']}")
        return 0
    finally:
        if handler is not None:
            logger.removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    raise SystemExit(main())
