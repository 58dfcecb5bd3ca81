"""Quantum Fisher information and redundant-parameter detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import state as sv
from .core import EncodingCircuit


@dataclass(frozen=True)
class QfimReport:
    qfim: np.ndarray
    rank: int
    redundant: frozenset = frozenset()


def state_jacobian(circuit: EncodingCircuit, x, theta) -> tuple[np.ndarray, np.ndarray]:
    """Statevector and its exact derivatives d|psi>/d theta_k, shape (K, 2**n)."""
    angles = circuit.angles(x, theta)
    J = circuit.angle_jacobian(x, theta, "p")[0]  # (G, K)
    psi = sv.run_ops(circuit.n_qubits, circuit.structure, angles)[0]
    dpsi = np.zeros((circuit.n_params, psi.size), dtype=complex)
    for g in np.flatnonzero(np.any(J != 0.0, axis=1)):
        d_g = sv.run_ops(circuit.n_qubits, circuit.structure, angles, derivative_at=int(g))[0]
        dpsi += np.outer(J[g], d_g)
    return psi, dpsi


def qfim(circuit: EncodingCircuit, x, theta, plan=None) -> QfimReport:
    """``F_ij = 4 Re[<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>]``.

    Exact statevector only; a shot-based ``plan`` is rejected.
    """
    if plan is not None and plan.backend.kind != "exact":
        raise ValueError("the QFIM is only available on the exact backend")
    psi, dpsi = state_jacobian(circuit, x, theta)
    G = dpsi.conj() @ dpsi.T
    v = dpsi.conj() @ psi
    F = 4.0 * np.real(G - np.outer(v, v.conj()))
    F = 0.5 * (F + F.T)
    return QfimReport(F, matrix_rank(F))


def matrix_rank(F: np.ndarray, rtol: float = 1e-10, atol: float = 1e-12) -> int:
    """Singular values above ``max(rtol * s_max, atol)``; atol absorbs round-off zeros."""
    if F.size == 0:
        return 0
    s = np.linalg.svd(F, compute_uv=False)
    return int(np.sum(s > max(rtol * s[0], atol)))


def detect_redundant(circuit: EncodingCircuit, n_samples: int = 3, seed: int = 0, rtol: float = 1e-10) -> set[int]:
    """Parameters whose QFIM column lies in the span of the others at every sample.

    Removal is greedy, one parameter at a time, scanning from the highest
    index down so the earliest occurrence of an over-parameterised rotation
    survives.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = sv.make_rng(seed)
    mats = []
    for _ in range(n_samples):
        x = rng.uniform(-np.pi, np.pi, circuit.n_features)
        if any(op.angle.map == "arccos" for op in circuit.angled if op.angle.source == "x"):
            x = rng.uniform(-1.0, 1.0, circuit.n_features)
        theta = rng.uniform(-np.pi, np.pi, circuit.n_params)
        mats.append(qfim(circuit, x.reshape(1, -1), theta).qfim)
    active = list(range(circuit.n_params))
    redundant: set[int] = set()
    changed = True
    while changed:
        changed = False
        for i in reversed(active):
            rest = [j for j in active if j != i]
            if all(matrix_rank(F[np.ix_(active, active)], rtol) == matrix_rank(F[np.ix_(rest, rest)], rtol) for F in mats):
                active = rest
                redundant.add(i)
                changed = True
                break
    return redundant


def remove_redundant(circuit: EncodingCircuit, n_samples: int = 3, seed: int = 0) -> tuple[EncodingCircuit, set[int]]:
    red = detect_redundant(circuit, n_samples, seed)
    return circuit.remove_parameters(red), red
