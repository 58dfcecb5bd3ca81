"""Per-seed statistics for the seed-sensitive experiment outcomes.

* kernel-optimize: does alignment training lower the QKRR test error?
* kernel-regularize: how often does the noisy Gram matrix have a negative eigenvalue?
* msplit: per-entry and mean error of mitigated vs raw noisy Gram entries.

Usage: python scripts/seed_scan.py [n_seeds]
"""

import sys

import numpy as np

from qmlkit.circuits import YzCx
from qmlkit.executor import Depolarizing, ExecutionPlan, Executor
from qmlkit.experiments import RUNNERS, ExperimentConfig
from qmlkit.kernels import FidelityKernel, mitigate_msplit


def run(**kw):
    cfg = ExperimentConfig(**kw)
    cfg.validate()
    return RUNNERS[cfg.experiment](cfg, Executor(cfg.plan("WARNING"))).metrics


def main(n_seeds: int) -> None:
    wins = 0
    print("seed  align_before  align_after  mse_unopt   mse_opt")
    for s in range(n_seeds):
        m = run(experiment="kernel-optimize", seed=s)
        wins += m["test_mse_optimized"] <= m["test_mse_unoptimized"]
        print(f"{s:4d}  {m['alignment_before']:12.4f}  {m['alignment_after']:11.4f}  "
              f"{m['test_mse_unoptimized']:.3e}  {m['test_mse_optimized']:.3e}")
    print(f"optimized QKRR no worse on {wins}/{n_seeds} seeds\n")

    negative = []
    for s in range(n_seeds):
        m = run(experiment="kernel-regularize", backend="depolarizing", shots=500, p=0.05, seed=s)
        if m["min_eigenvalue"] < 0:
            negative.append(s)
    print(f"kernel-regularize: negative eigenvalue on seeds {negative} ({len(negative)}/{n_seeds})\n")

    x = np.linspace(-1.5, 1.5, 20).reshape(-1, 1)
    circuit = YzCx(5, 1, 3).circuit
    iu = np.triu_indices(20, 1)
    print("seed  frac_closer  mae_raw  mae_msplit")
    for s in range(n_seeds):
        exact = FidelityKernel(circuit, seed=s).evaluate(x)
        ex = Executor(ExecutionPlan(Depolarizing(500, 0.05), base_seed=s))
        noisy = FidelityKernel(circuit, ex, evaluate_duplicates="all", seed=s).evaluate(x)
        raw = np.abs(noisy - exact)[iu]
        mit = np.abs(mitigate_msplit(noisy) - exact)[iu]
        print(f"{s:4d}  {np.mean(mit < raw):11.3f}  {raw.mean():.4f}   {mit.mean():.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
