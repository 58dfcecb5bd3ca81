"""Experiment definitions behind the command-line runner.

Each experiment takes an :class:`ExperimentConfig` and returns a
:class:`RunResult` holding tables, plot series and summary metrics; the
CLI decides where they are written.  Experiment logic never inspects the
backend: switching backends only changes the execution plan.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .circuits import QCNN, ChebyshevPQC, HighDim, Layered, YzCx
from .estimators import QGPR, QKRR, QSVC, QNNClassifier
from .executor import Backend, ExecutionPlan, Executor
from .kernels import FidelityKernel, ProjectedKernel, mitigate_msplit, optimize_kernel, regularize, target_alignment
from .observables import summed_paulis
from .qnn import QNN, Adam, FixedShots, RstdShots, TrainConfig, fit, init_theta
from .toolkit import MinMaxScaler, Pipeline, SelectKBest, grid_search_cv, make_classification, make_moons
from .toolkit import train_test_split

EXPERIMENTS = ("qnn-abs", "qcnn-moons", "pqk-matern", "kernel-optimize", "kernel-regularize", "pipeline-search")


class ConfigError(ValueError):
    """Invalid flag or knob combination."""


@dataclass
class ExperimentConfig:
    experiment: str
    backend: str = "exact"
    shots: int | None = None
    p: float | None = None
    seed: int = 0
    epochs: int | None = None
    maxiter: int | None = None
    lr: float | None = None
    variance: float = 0.0
    shot_policy: str = "rstd"
    nu: float = 0.5
    gamma: float = 1.0
    length_scale: float = 1.0
    c_grid: tuple = (0.01, 0.1, 1.0)
    cv: int = 5
    cache: str = "memory"
    n_jobs: int = 1

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.backend not in ("exact", "sampled", "depolarizing"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "exact" and self.shots is not None:
            raise ConfigError("--shots needs a shot-based backend (sampled or depolarizing)")
        if self.backend != "exact" and (self.shots is None or self.shots < 1):
            raise ConfigError(f"backend {self.backend} needs --shots >= 1")
        if self.p is not None and self.backend != "depolarizing":
            raise ConfigError("--p applies only to the depolarizing backend")
        if self.backend == "depolarizing" and not 0 <= (self.p if self.p is not None else 0.0) <= 1:
            raise ConfigError("--p must lie in [0, 1]")
        for name in ("epochs", "maxiter"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"--{name} must be >= 0")
        if self.lr is not None and self.lr <= 0:
            raise ConfigError("--lr must be > 0")
        if self.variance < 0:
            raise ConfigError("--variance must be >= 0")
        if self.variance > 0 and self.experiment != "qnn-abs":
            raise ConfigError("--variance applies only to qnn-abs")
        if self.nu not in (0.5, 1.5, 2.5):
            raise ConfigError("--nu must be 0.5, 1.5 or 2.5")
        if self.gamma <= 0 or self.length_scale <= 0:
            raise ConfigError("--gamma and --length-scale must be > 0")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ConfigError("--C-grid needs positive values")
        if self.cv < 2:
            raise ConfigError("--cv must be >= 2")
        if self.shot_policy not in ("fixed", "rstd"):
            raise ConfigError("--shot-policy must be fixed or rstd")
        if self.n_jobs < 1:
            raise ConfigError("--n-jobs must be >= 1")

    def plan(self, log_level: str = "WARNING") -> ExecutionPlan:
        backend = Backend(self.backend, self.shots, self.p or 0.0)
        return ExecutionPlan(backend, base_seed=self.seed, cache=self.cache, log_level=log_level,
                             n_jobs=self.n_jobs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c_grid"] = list(self.c_grid)
        return d


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    series: dict = field(default_factory=dict)  # plot series name -> (header, rows)
    metrics: dict = field(default_factory=dict)
    final_loss: float | None = None
    printed: list[str] = field(default_factory=list)


def _rows(*cols):
    return [list(r) for r in zip(*cols)]


# ---------------------------------------------------------------------------------------------


def qnn_abs(cfg: ExperimentConfig, ex: Executor) -> RunResult:
    x = np.arange(-0.7, 0.8, 0.1)
    y = np.abs(x)
    circuit = ChebyshevPQC(4, 1, 3).circuit
    qnn = QNN(circuit, summed_paulis(4), ex)
    policy = None
    if cfg.backend != "exact":
        policy = (RstdShots(min_shots=min(100, cfg.shots), max_shots=cfg.shots) if cfg.shot_policy == "rstd"
                  else FixedShots(cfg.shots))
    tc = TrainConfig(epochs=cfg.epochs if cfg.epochs is not None else 200,
                     optimizer=Adam(cfg.lr if cfg.lr is not None else 0.3), variance=cfg.variance,
                     shot_policy=policy, seed=cfg.seed)
    res = fit(qnn, x, y, tc, theta0=init_theta(circuit.n_params, cfg.seed))
    pred_train = qnn.evaluate(x, res.theta, res.coef)[:, 0]
    x_curve = np.arange(-0.8, 0.81, 0.01)
    curve = qnn.evaluate(x_curve, res.theta, res.coef)[:, 0]
    out = RunResult(final_loss=res.history[-1] if res.history else None)
    out.tables["predictions"] = (["x", "target", "prediction"], _rows(x, y, pred_train))
    out.tables["loss_history"] = (["epoch", "loss"], _rows(range(1, len(res.history) + 1), res.history))
    out.series["train_scatter"] = (["x", "y"], _rows(x, y))
    out.series["prediction_curve"] = (["x", "prediction"], _rows(x_curve, curve))
    out.metrics["train_mse"] = float(np.mean((pred_train - y) ** 2))
    return out


def qcnn_moons(cfg: ExperimentConfig, ex: Executor) -> RunResult:
    X, y = make_moons(100, noise=0.3, seed=cfg.seed)
    Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=0.3, seed=cfg.seed)
    qc = QCNN(4, 2).convolution().pooling(measurement=True).repeat_layers().fully_connected()
    clf = QNNClassifier(qc, "qcnn", ex, lr=cfg.lr if cfg.lr is not None else 0.1,
                        epochs=cfg.epochs if cfg.epochs is not None else 200, seed=cfg.seed)
    clf.fit(Xtr, ytr)
    ptr, pte = clf.predict(Xtr), clf.predict(Xte)
    out = RunResult(final_loss=clf.history_[-1] if clf.history_ else None)
    rows = [[a, b, t, p, "train"] for (a, b), t, p in zip(Xtr, ytr, ptr)]
    rows += [[a, b, t, p, "test"] for (a, b), t, p in zip(Xte, yte, pte)]
    out.tables["predictions"] = (["x0", "x1", "target", "prediction", "split"], rows)
    out.tables["loss_history"] = (["epoch", "loss"], _rows(range(1, len(clf.history_) + 1), clf.history_))
    out.series["train_scatter"] = (["x0", "x1", "label"], [[a, b, t] for (a, b), t in zip(Xtr, ytr)])
    out.series["test_prediction"] = (["x0", "x1", "prediction"], [[a, b, p] for (a, b), p in zip(Xte, pte)])
    out.metrics["train_accuracy"] = float(np.mean(ptr == ytr))
    out.metrics["test_accuracy"] = float(np.mean(pte == yte))
    return out


def _target(x):
    return x * np.exp(np.sin(10 * x))


def pqk_matern(cfg: ExperimentConfig, ex: Executor) -> RunResult:
    x_train = np.linspace(-1, 1, 25)
    y_train = _target(x_train)
    x_test = np.linspace(-1, 1, 200)
    y_test = _target(x_test)
    meas = ["ZZZZ", "YYYY", "XXXX"]
    from .kernels import Matern

    kernel = ProjectedKernel(YzCx(4, 1, 2).circuit, ex, measurement=meas,
                             outer=Matern(cfg.nu, cfg.length_scale), seed=cfg.seed)
    gpr = QGPR(quantum_kernel=kernel).fit(x_train, y_train)
    pred = gpr.predict(x_test)
    out = RunResult()
    out.tables["predictions"] = (["x", "target", "prediction"], _rows(x_test, y_test, pred))
    out.series["train_scatter"] = (["x", "y"], _rows(x_train, y_train))
    out.series["prediction_curve"] = (["x", "prediction"], _rows(x_test, pred))
    out.metrics["test_mse"] = float(np.mean((pred - y_test) ** 2))
    out.final_loss = out.metrics["test_mse"]
    return out


def kernel_optimize(cfg: ExperimentConfig, ex: Executor) -> RunResult:
    x_train = np.linspace(-1, 1, 10).reshape(-1, 1)
    x_test = np.linspace(-1, 1, 100).reshape(-1, 1)
    y_train = np.sin(np.pi * x_train.ravel())
    y_test = np.sin(np.pi * x_test.ravel())
    kernel = ProjectedKernel(ChebyshevPQC(4, 1, 1).circuit, ex, seed=cfg.seed)
    before = QKRR(quantum_kernel=kernel).fit(x_train, y_train).predict(x_test)
    align0 = target_alignment(kernel.evaluate(x_train), y_train)
    res = optimize_kernel(kernel, x_train, y_train, "alignment",
                          Adam(cfg.lr if cfg.lr is not None else 0.1),
                          maxiter=cfg.maxiter if cfg.maxiter is not None else 20)
    align1 = target_alignment(kernel.evaluate(x_train), y_train)
    after = QKRR(quantum_kernel=kernel).fit(x_train, y_train).predict(x_test)
    out = RunResult(final_loss=res.history[-1])
    xt = x_test.ravel()
    out.tables["predictions"] = (["x", "target", "prediction_unoptimized", "prediction_optimized"],
                                 _rows(xt, y_test, before, after))
    out.tables["loss_history"] = (["iteration", "loss"], _rows(range(len(res.history)), res.history))
    out.series["train_scatter"] = (["x", "y"], _rows(x_train.ravel(), y_train))
    out.series["prediction_unoptimized"] = (["x", "prediction"], _rows(xt, before))
    out.series["prediction_optimized"] = (["x", "prediction"], _rows(xt, after))
    out.metrics.update(alignment_before=align0, alignment_after=align1,
                       test_mse_unoptimized=float(np.mean((before - y_test) ** 2)),
                       test_mse_optimized=float(np.mean((after - y_test) ** 2)))
    return out


def kernel_regularize(cfg: ExperimentConfig, ex: Executor) -> RunResult:
    x = np.linspace(-1.5, 1.5, 20).reshape(-1, 1)
    circuit = YzCx(5, 1, 3).circuit
    fqk = FidelityKernel(circuit, ex, evaluate_duplicates="all", seed=cfg.seed)
    K = fqk.evaluate(x)
    K_tik = regularize(K, "tikhonov")
    K_thr = regularize(K, "thresholding")
    K_mit = mitigate_msplit(K)
    ev = [np.linalg.eigvalsh(0.5 * (M + M.T)) for M in (K, K_tik, K_thr)]
    out = RunResult()
    out.tables["eigenvalues"] = (["index", "unregularized", "tikhonov", "thresholding"],
                                 _rows(range(len(x)), *ev))
    out.tables["diagonal"] = (["index", "unmitigated", "mitigated"], _rows(range(len(x)), np.diag(K), np.diag(K_mit)))
    out.series["eigenvalues"] = out.tables["eigenvalues"]
    out.series["diagonal"] = out.tables["diagonal"]
    fmt = lambda v: "[" + ", ".join(f"{a:.6g}" for a in v) + "]"  # noqa: E731
    out.printed = [
        "Eigenvalues without regularization: " + fmt(ev[0]),
        "Eigenvalues with Tikhonov regularization: " + fmt(ev[1]),
        "Eigenvalues with thresholding: " + fmt(ev[2]),
        "Diagonal of the unmitigated matrix: " + fmt(np.diag(K)),
        "Diagonal of the mitigated matrix: " + fmt(np.diag(K_mit)),
    ]
    out.metrics.update(min_eigenvalue=float(ev[0][0]), min_eigenvalue_tikhonov=float(ev[1][0]),
                       min_eigenvalue_thresholding=float(ev[2][0]))
    return out


def pipeline_search(cfg: ExperimentConfig, ex: Executor) -> RunResult:
    X, y = make_classification(100, 10, seed=cfg.seed)
    Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=0.2, seed=cfg.seed)
    hd = HighDim(4, 3, 2)
    lay = Layered("Ry(x)-Rz(x)-Rx(p)-cx", 4, 3, 2)
    pipe = Pipeline([("scaler", MinMaxScaler((0.01, 0.99))), ("feature_selection", SelectKBest(3)),
                     ("qsvc", QSVC(hd, executor=ex, kernel_seed=cfg.seed))])
    grid = {"qsvc__encoding_circuit": [lay, hd], "qsvc__outer_kernel": ["gaussian", "dot_product"],
            "qsvc__n_qubits": [3, 4], "qsvc__n_layers": [1, 2, 3], "qsvc__C": list(cfg.c_grid)}
    res = grid_search_cv(pipe, grid, Xtr, ytr, cv=cfg.cv, seed=cfg.seed)
    n_folds = cfg.cv
    rows = []
    for c, params in enumerate(res.configurations()):
        scores = [r["score"] for r in res.table if r["config"] == c]
        enc = params["qsvc__encoding_circuit"]
        rows.append([c, type(enc).__name__, params["qsvc__outer_kernel"], params["qsvc__n_qubits"],
                     params["qsvc__n_layers"], params["qsvc__C"], *scores, res.mean_scores[c]])
    header = ["config", "encoding", "outer_kernel", "n_qubits", "n_layers", "C"] + \
             [f"fold{i}" for i in range(n_folds)] + ["mean_score"]
    best = res.best_estimator
    out = RunResult()
    out.tables["grid"] = (header, rows)
    out.metrics.update(n_configurations=len(rows), fold_fits=res.fold_fits, refits=res.refits,
                       best_config=int(np.argmax(res.mean_scores)), best_cv_score=res.best_score,
                       train_accuracy=best.score(Xtr, ytr), test_accuracy=best.score(Xte, yte))
    out.series["cv_scores"] = (["config", "mean_score"], _rows(range(len(rows)), res.mean_scores))
    return out


RUNNERS = {
    "qnn-abs": qnn_abs, "qcnn-moons": qcnn_moons, "pqk-matern": pqk_matern, "kernel-optimize": kernel_optimize,
    "kernel-regularize": kernel_regularize, "pipeline-search": pipeline_search,
}
