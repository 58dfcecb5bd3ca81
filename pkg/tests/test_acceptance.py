"""Acceptance suite: one PASS/FAIL line per criterion, printed straight to the terminal."""

import json
import time

import numpy as np
import pytest

from qmlkit import cli
from qmlkit import state as sv
from qmlkit.circuits import AngleExpr, EncodingCircuit, Op, YzCx, detect_redundant, qfim
from qmlkit.executor import Depolarizing, ExecutionPlan, Executor, Sampled
from qmlkit.experiments import EXPERIMENTS, RUNNERS, ExperimentConfig
from qmlkit.kernels import FidelityKernel, ProjectedKernel, mitigate_msplit, regularize
from qmlkit.qnn import QNN
from qmlkit.state import Gate, StateVector

from .helpers import features_in_domain, random_circuit, random_observable
from .test_circuits import fubini_study_fd
from .test_kernels import RY, brute_force_pqk_features
from .test_qnn import finite_difference


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {n}: {detail}"
    return emit


def run_experiment(**kw):
    cfg = ExperimentConfig(**kw)
    cfg.validate()
    return RUNNERS[cfg.experiment](cfg, Executor(cfg.plan("WARNING")))


# 1 ------------------------------------------------------------------------------------------------------


def test_criterion_01_gradient_oracle(report):
    t0 = time.perf_counter()
    worst1 = worst2 = 0.0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(1, 7))
        k = int(rng.integers(1, 13))
        c = random_circuit(rng, n, 2, k, int(rng.integers(6, 16)), maps=("id", "arccos", "square"))
        q = QNN(c, random_observable(rng, n, 2))
        X = features_in_domain(rng, 2).reshape(1, -1)
        theta = rng.uniform(-np.pi, np.pi, k)
        coef = q.initial_coefficients() + rng.normal(size=q.n_coefs)
        targets = ([("p", j) for j in range(k)] + [("x", 0), ("x", 1)]
                   + [("c", j) for j in range(q.n_coefs)])
        for t in targets:
            d = q.derivative(X, theta, [t], coef)
            worst1 = max(worst1, float(np.abs(d - finite_difference(q, X, theta, coef, t, 1e-5)).max()))
        h = 1e-5
        for a, b in [(("p", 0), ("p", k - 1)), (("x", 0), ("p", 0)), (("x", 1), ("x", 1))]:
            d2 = q.derivative(X, theta, [a, b], coef)
            kind, i = b

            def first(delta):
                th, x = theta.copy(), X.copy()
                (th if kind == "p" else x[0])[i] += delta
                return q.derivative(x, th, [a], coef)

            worst2 = max(worst2, float(np.abs(d2 - (first(h) - first(-h)) / (2 * h)).max()))
    elapsed = time.perf_counter() - t0
    ok = worst1 <= 1e-6 and worst2 <= 1e-4 and elapsed < 60
    report(1, ok, f"max |d1 - FD| = {worst1:.2e}, max |d2 - FD| = {worst2:.2e}, {elapsed:.1f} s")


# 2 ------------------------------------------------------------------------------------------------------


def test_criterion_02_kernel_equivalence(report):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        c = random_circuit(rng, int(rng.integers(1, 6)), 2, 3, 12)
        theta = rng.uniform(-np.pi, np.pi, 3)
        a, b = features_in_domain(rng, 2), features_in_domain(rng, 2)
        k = FidelityKernel(c, theta=theta, method="overlap")
        worst = max(worst, abs(k.entry(a, b) - k.entry_via_circuit(a, b)))
    report(2, worst <= 1e-10, f"max |overlap - test circuit| = {worst:.2e} over 20 pairs")


# 3 ------------------------------------------------------------------------------------------------------


def test_criterion_03_pqk_oracle(report):
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(3000 + seed)
        c = random_circuit(rng, int(rng.integers(1, 5)), 2, 3, 12)
        theta = rng.uniform(-np.pi, np.pi, 3)
        X = np.stack([features_in_domain(rng, 2) for _ in range(4)])
        F = np.array([brute_force_pqk_features(c, x, theta) for x in X])
        ref = np.exp(-np.sum((F[:, None] - F[None]) ** 2, axis=-1))
        worst = max(worst, float(np.abs(ProjectedKernel(c, theta=theta).evaluate(X) - ref).max()))
    analytic = abs(ProjectedKernel(RY).entry([0.0], [np.pi / 2]) - np.exp(-2.0))
    ok = worst <= 1e-10 and analytic <= 1e-12
    report(3, ok, f"max |PQK - partial trace| = {worst:.2e}, |K(0, pi/2) - e^-2| = {analytic:.1e}")


# 4 ------------------------------------------------------------------------------------------------------


def test_criterion_04_psd_repair(report):
    rng = np.random.default_rng(4)
    worst = np.inf
    done = 0
    while done < 100:
        n = int(rng.integers(3, 12))
        A = rng.normal(size=(n, n))
        E = rng.normal(size=(n, n)) * 0.3
        K = A @ A.T / n + (E + E.T) / 2
        if np.linalg.eigvalsh(K)[0] >= 0:
            continue
        done += 1
        for m in ("thresholding", "tikhonov"):
            worst = min(worst, float(np.linalg.eigvalsh(regularize(K, m))[0]))
    K2 = np.array([[1.0, 1.2], [1.2, 1.0]])
    e_thr = np.abs(regularize(K2, "thresholding") - 1.1).max()
    e_tik = np.abs(regularize(K2, "tikhonov") - 1.2).max()
    ok = worst >= -1e-10 and e_thr <= 1e-12 and e_tik <= 1e-12
    report(4, ok, f"min eigenvalue after repair {worst:.1e}; 2x2 errors {e_thr:.1e}, {e_tik:.1e}")


# 5 ------------------------------------------------------------------------------------------------------


def test_criterion_05_msplit_mitigation(report):
    # same data and circuit as the kernel-regularize experiment
    x = np.linspace(-1.5, 1.5, 20).reshape(-1, 1)
    circuit = YzCx(5, 1, 3).circuit
    iu = np.triu_indices(20, 1)
    fractions, unit = [], True
    for seed in range(10):
        exact = FidelityKernel(circuit, seed=seed).evaluate(x)
        ex = Executor(ExecutionPlan(Depolarizing(500, 0.05), base_seed=seed))
        noisy = FidelityKernel(circuit, ex, evaluate_duplicates="all", seed=seed).evaluate(x)
        mitigated = mitigate_msplit(noisy)
        unit &= bool(np.array_equal(np.diag(mitigated), np.ones(20)))
        better = np.abs(mitigated - exact)[iu] < np.abs(noisy - exact)[iu]
        fractions.append(float(better.mean()))
    frac = float(np.mean(fractions))
    report(5, unit and frac >= 0.8, f"unit diagonal: {unit}; mitigated entry closer in {frac:.1%} of entries "
                                    f"(per seed {min(fractions):.2f} to {max(fractions):.2f}; need 80%)")


# 6 ------------------------------------------------------------------------------------------------------


def test_criterion_06_abs_regression(report):
    t0 = time.perf_counter()
    exact = run_experiment(experiment="qnn-abs", lr=0.3, epochs=300)
    sampled = run_experiment(experiment="qnn-abs", backend="sampled", shots=5000, lr=0.3, variance=0.005,
                             epochs=300)
    elapsed = time.perf_counter() - t0
    m1, m2 = exact.metrics["train_mse"], sampled.metrics["train_mse"]
    ok = m1 <= 0.01 and m2 <= 0.05 and elapsed < 300
    report(6, ok, f"train MSE exact {m1:.2e}, sampled(5000) with variance 0.005 {m2:.2e}, {elapsed:.0f} s")


# 7 ------------------------------------------------------------------------------------------------------


def test_criterion_07_kernel_optimization(report):
    m = run_experiment(experiment="kernel-optimize", seed=0).metrics
    up = m["alignment_after"] > m["alignment_before"]
    mse_ok = m["test_mse_optimized"] <= m["test_mse_unoptimized"]
    report(7, up and mse_ok, f"alignment {m['alignment_before']:.4f} -> {m['alignment_after']:.4f}; "
                             f"QKRR test MSE unoptimized {m['test_mse_unoptimized']:.2e}, "
                             f"optimized {m['test_mse_optimized']:.2e}")


# 8 ------------------------------------------------------------------------------------------------------


def test_criterion_08_qcnn_moons(report):
    m = run_experiment(experiment="qcnn-moons", epochs=200).metrics
    report(8, m["train_accuracy"] >= 0.8, f"train accuracy {m['train_accuracy']:.3f} "
                                          f"(test {m['test_accuracy']:.3f}) after 200 epochs")


# 9 ------------------------------------------------------------------------------------------------------


def test_criterion_09_qfim_redundancy(report):
    rz_first = EncodingCircuit(1, 1, 2, (Op("RZ", (0,), AngleExpr("p", 0)), Op("RY", (0,), AngleExpr("p", 1))))
    two_ry = EncodingCircuit(1, 1, 2, (Op("RY", (0,), AngleExpr("p", 0)), Op("RY", (0,), AngleExpr("p", 1))))
    full = EncodingCircuit(2, 1, 4, (Op("RY", (0,), AngleExpr("p", 0)), Op("RY", (1,), AngleExpr("p", 1)),
                                     Op("CX", (0, 1)), Op("RX", (0,), AngleExpr("p", 2)),
                                     Op("RY", (1,), AngleExpr("p", 3))))
    flags = (detect_redundant(rz_first) == {0}, len(detect_redundant(two_ry)) == 1, detect_redundant(full) == set())
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(9000 + seed)
        c = random_circuit(rng, 1 + seed % 3, 2, 4, 10)
        x = rng.uniform(-0.9, 0.9, (1, 2))
        theta = rng.uniform(-np.pi, np.pi, 4)
        worst = max(worst, float(np.abs(qfim(c, x, theta).qfim - fubini_study_fd(c, x, theta)).max()))
    ok = all(flags) and worst <= 1e-6
    report(9, ok, f"redundancy flags (Rz first, double Ry, full rank) {flags}; max |QFIM - FD| = {worst:.1e}")


# 10 -----------------------------------------------------------------------------------------------------


def test_criterion_10_pipeline_search(report):
    a = run_experiment(experiment="pipeline-search", seed=0)
    b = run_experiment(experiment="pipeline-search", seed=0)
    m = a.metrics
    same = a.tables == b.tables and a.metrics == b.metrics
    ok = (m["n_configurations"] == 72 and m["fold_fits"] == 360 and m["refits"] == 1 and same
          and m["train_accuracy"] >= m["best_cv_score"] - 0.1)
    report(10, ok, f"{m['n_configurations']} configurations, {m['fold_fits']} fold fits + {m['refits']} refit, "
                   f"deterministic {same}; best CV {m['best_cv_score']:.3f}, refit train accuracy "
                   f"{m['train_accuracy']:.3f}")


# 11 -----------------------------------------------------------------------------------------------------


def _outputs(d):
    out = {}
    for p in sorted(d.iterdir()):
        out[p.name] = p.read_bytes()
    return out


def test_criterion_11_cli_reproducibility(report, tmp_path, capsys):
    runs = [[e] for e in EXPERIMENTS] + [
        ["kernel-regularize", "--n-jobs", "4"],
        ["pqk-matern", "--shots", "300", "--n-jobs", "3"],
        ["kernel-optimize", "--backend", "sampled", "--shots", "2000", "--maxiter", "3", "--n-jobs", "2"],
        ["qnn-abs", "--shots", "500", "--variance", "0.005", "--epochs", "5"],
    ]
    mismatched = []
    for i, argv in enumerate(runs):
        first = tmp_path / f"{i}a"
        second = tmp_path / f"{i}b"
        codes = [cli.main(argv + ["--output", str(first)]), cli.main(argv + ["--output", str(second)])]
        if codes != [0, 0] or _outputs(first) != _outputs(second):
            mismatched.append(" ".join(argv))
        json.loads((first / "summary.json").read_text())
    capsys.readouterr()
    report(11, not mismatched, f"{len(runs)} CLI invocations run twice; byte differences in: {mismatched or 'none'}")


# 12 -----------------------------------------------------------------------------------------------------


def test_criterion_12_sampling_statistics(report):
    shots = 10_000
    plus = sv.apply_gate(StateVector.zero(1), Gate("H", (0,)))
    sigma = np.sqrt(0.25 / shots)
    worst_h = max(abs(sv.sample(plus, shots, seed).counts.get(b, 0) / shots - 0.5) / sigma
                  for seed in range(10) for b in "01")
    rng = np.random.default_rng(12)
    circuit = YzCx(3, 1, 1).circuit
    exact = FidelityKernel(circuit, seed=1)
    sampled = FidelityKernel(circuit, Executor(ExecutionPlan(Sampled(shots), base_seed=12)), seed=1)
    worst_k = 0.0
    for a, b in zip(rng.uniform(-1, 1, (20, 1)), rng.uniform(-1, 1, (20, 1))):
        p = exact.entry(a, b)
        s = np.sqrt(max(p * (1 - p), 1e-12) / shots)
        worst_k = max(worst_k, abs(sampled.entry(a, b) - p) / s)
    ok = worst_h <= 4 and worst_k <= 4
    report(12, ok, f"H|0> worst deviation {worst_h:.2f} sigma over 10 seeds; sampled FQK worst {worst_k:.2f} "
                   f"sigma over 20 pairs")
