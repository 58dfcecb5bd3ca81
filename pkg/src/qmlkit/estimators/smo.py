"""Sequential minimal optimisation for box-constrained SVM duals.

Solves ``min 1/2 a^T Q a + p^T a`` subject to ``y^T a = 0`` and
``0 <= a <= C`` with ``y`` in {+1, -1}, using second-order working-set
selection.  Classification and epsilon-regression both reduce to this form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAU = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    objective: float
    iterations: int


def solve(Q: np.ndarray, p: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
          max_passes: int = 200) -> SmoResult:
    """Run SMO until the maximal KKT violation drops below ``tol``.

    At most ``max_passes * n`` pair updates are made; exceeding that raises
    :class:`ConvergenceError` instead of returning a partial solution.
    """
    n = len(p)
    y = np.asarray(y, dtype=float)
    alpha = np.zeros(n)
    G = np.asarray(p, dtype=float).copy()
    QD = np.diag(Q).copy()
    limit = max(1, max_passes * n)
    it = 0
    while True:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        m = yG[i]
        M = yG[low].min()
        if m - M < tol:
            break
        if it >= limit:
            raise ConvergenceError(f"SMO did not converge within {max_passes} passes (gap {m - M:.3g})")
        it += 1
        cand = low & (yG < m)
        b = m - yG[cand]
        a = QD[i] + QD[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, TAU)
        idx = np.flatnonzero(cand)
        j = int(idx[np.argmin(-(b * b) / a)])

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            delta = (-G[i] - G[j]) / max(quad, TAU)
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            delta = (G[i] - G[j]) / max(quad, TAU)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[:, i] * (ni - ai) + Q[:, j] * (nj - aj)
        alpha[i], alpha[j] = ni, nj

    rho = _rho(alpha, G, y, C)
    obj = 0.5 * float(alpha @ (G + p))
    return SmoResult(alpha, rho, obj, it)


def _rho(alpha, G, y, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_ub = alpha >= C
    ub_mask = (at_ub & (y < 0)) | (~at_ub & (y > 0))
    lb_mask = (at_ub & (y > 0)) | (~at_ub & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float(0.5 * (ub + lb))


def svc_dual(K: np.ndarray, y: np.ndarray, C: float, **kw) -> SmoResult:
    """Classification dual; ``y`` in {+1, -1}.  Decision: ``sum a_i y_i K(x_i, x) - rho``."""
    y = np.asarray(y, dtype=float)
    return solve(np.outer(y, y) * K, -np.ones(len(y)), y, C, **kw)


def svr_dual(K: np.ndarray, t: np.ndarray, C: float, epsilon: float, **kw) -> tuple[np.ndarray, SmoResult]:
    """Epsilon-insensitive regression dual with 2N variables.

    Returns ``(beta, result)`` with ``beta = a - a*``; prediction is
    ``sum beta_i K(x_i, x) - rho``.
    """
    t = np.asarray(t, dtype=float)
    N = len(t)
    y = np.concatenate([np.ones(N), -np.ones(N)])
    Q = np.outer(y, y) * np.block([[K, K], [K, K]])
    p = np.concatenate([epsilon - t, epsilon + t])
    res = solve(Q, p, y, C, **kw)
    return res.alpha[:N] - res.alpha[N:], res
