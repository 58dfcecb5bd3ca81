"""Gradient-based training of quantum kernel parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..qnn import Adam, TrainingError
from .gram import nll_grad, nll_loss, target_alignment, target_alignment_grad
from .quantum import QuantumKernel


@dataclass
class KernelFitResult:
    theta: np.ndarray
    history: list[float]


def kernel_loss(kernel: QuantumKernel, X, y, loss: str = "alignment", noise: float = 1e-8) -> float:
    K = kernel.evaluate(X)
    if loss == "alignment":
        return -target_alignment(K, y)
    if loss == "nll":
        return nll_loss(K, y, noise)
    raise ValueError(f"unknown kernel loss {loss!r}; use 'alignment' or 'nll'")


def _loss_and_grad(kernel, X, y, loss, noise):
    K, dK = kernel.gram_gradient(X)
    if loss == "alignment":
        value = -target_alignment(K, y)
        G = -target_alignment_grad(K, y)
    elif loss == "nll":
        value = nll_loss(K, y, noise)
        G = nll_grad(K, y, noise)
    else:
        raise ValueError(f"unknown kernel loss {loss!r}; use 'alignment' or 'nll'")
    return value, np.einsum("nm,nmk->k", G, dK)


def optimize_kernel(kernel: QuantumKernel, X, y, loss: str = "alignment", optimizer=None, maxiter: int = 20,
                    noise: float = 1e-8, callback=None) -> KernelFitResult:
    """Minimise ``-alignment`` or the GP NLL over ``kernel.theta`` (updated in place).

    ``history[0]`` is the initial loss and ``history[i]`` the loss after
    step ``i``.
    """
    if kernel.n_params < 1:
        raise ValueError("kernel circuit has no trainable parameters")
    opt = optimizer or Adam(lr=0.1)
    opt.reset()
    y = np.asarray(y, dtype=float).ravel()
    history = []
    theta = kernel.theta.copy()
    for it in range(maxiter + 1):
        kernel.theta = theta
        value, grad = _loss_and_grad(kernel, X, y, loss, noise)
        if not math.isfinite(value) or not np.all(np.isfinite(grad)):
            raise TrainingError(it, "non-finite kernel loss")
        history.append(value)
        if callback is not None:
            callback(it, value)
        if it == maxiter:
            break
        theta = opt.step(theta, grad)
    kernel.theta = theta
    return KernelFitResult(theta.copy(), history)
