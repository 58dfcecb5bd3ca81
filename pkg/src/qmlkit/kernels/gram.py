"""Gram matrices: PSD repair, noise mitigation, training losses and text I/O."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class GramMatrix:
    values: np.ndarray
    symmetric: bool
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def with_values(self, values, **prov) -> "GramMatrix":
        return replace(self, values=values, provenance={**self.provenance, **prov})


def _square(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {K.shape}")
    return K


def regularize(K, method: str) -> np.ndarray:
    """Restore positive semi-definiteness.

    ``"thresholding"`` clips negative eigenvalues to zero; ``"tikhonov"``
    adds ``|lambda_min| I`` when the smallest eigenvalue is negative.
    """
    K = _square(K)
    K = 0.5 * (K + K.T)
    if method == "thresholding":
        w, V = np.linalg.eigh(K)
        if w[0] >= 0:
            return K
        R = (V * np.maximum(w, 0.0)) @ V.T
        return 0.5 * (R + R.T)
    if method == "tikhonov":
        lo = np.linalg.eigvalsh(K)[0]
        return K - lo * np.eye(K.shape[0]) if lo < 0 else K
    raise ValueError(f"unknown regularization {method!r}; use 'thresholding' or 'tikhonov'")


def mitigate_msplit(K, diag_rows=None, diag_cols=None) -> np.ndarray:
    """``K_ij / sqrt(d_i d'_j)``; for a square matrix the diagonal of K is used.

    Pass explicit diagonals for a cross Gram between two point sets.
    """
    K = np.asarray(K, dtype=float)
    if diag_rows is None:
        K = _square(K)
        diag_rows = diag_cols = np.diag(K).copy()
    diag_rows = np.asarray(diag_rows, dtype=float)
    diag_cols = diag_rows if diag_cols is None else np.asarray(diag_cols, dtype=float)
    if np.any(diag_rows <= 0) or np.any(diag_cols <= 0):
        raise ValueError("non-positive diagonal entry: noise too strong to mitigate")
    out = K / np.sqrt(np.outer(diag_rows, diag_cols))
    if out.shape[0] == out.shape[1] and diag_cols is diag_rows:
        np.fill_diagonal(out, 1.0)
    return out


def target_alignment(K, y) -> float:
    """Cosine similarity ``<K, yy^T>_F / (||K||_F ||yy^T||_F)``."""
    K = _square(K)
    y = np.asarray(y, dtype=float).ravel()
    nk, ny = np.linalg.norm(K), float(y @ y)
    if nk == 0 or ny == 0:
        raise ValueError("target alignment of a zero-norm input is undefined")
    return float(y @ K @ y / (nk * ny))


def target_alignment_grad(K, y) -> np.ndarray:
    """d alignment / dK."""
    K = _square(K)
    y = np.asarray(y, dtype=float).ravel()
    nk, ny = np.linalg.norm(K), float(y @ y)
    a = float(y @ K @ y)
    return np.outer(y, y) / (nk * ny) - a * K / (nk**3 * ny)


def cholesky_with_jitter(K, noise):
    N = K.shape[0]
    A = K + noise * np.eye(N)
    jitter = 0.0
    for jitter in (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        try:
            return cho_factor(A + jitter * np.eye(N), lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("Cholesky failed even with jitter 1e-6")


def nll_loss(K, y, noise: float = 0.0) -> float:
    """Gaussian-process negative log marginal likelihood."""
    K = _square(K)
    y = np.asarray(y, dtype=float).ravel()
    (L, low), _ = cholesky_with_jitter(K, noise)
    alpha = cho_solve((L, low), y)
    return float(0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * len(y) * LOG_2PI)


def nll_grad(K, y, noise: float = 0.0) -> np.ndarray:
    """d NLL / dK = 1/2 (A^-1 - alpha alpha^T), A = K + noise I."""
    K = _square(K)
    y = np.asarray(y, dtype=float).ravel()
    c, _ = cholesky_with_jitter(K, noise)
    alpha = cho_solve(c, y)
    Ainv = cho_solve(c, np.eye(len(y)))
    return 0.5 * (Ainv - np.outer(alpha, alpha))


# ---------------------------------------------------------------------------------------------
# text format


def save_gram(gram: GramMatrix, path) -> None:
    """Header line ``N M kind backend shots seed`` then rows in ``%.17g``."""
    p = gram.provenance
    V = np.asarray(gram.values, dtype=float)
    head = " ".join(str(v) for v in (V.shape[0], V.shape[1], p.get("kind", "unknown"),
                                     p.get("backend", "unknown"), p.get("shots", "none"), p.get("seed", "none")))
    lines = ["# " + head] + [" ".join("%.17g" % v for v in row) for row in V]
    Path(path).write_text("\n".join(lines) + "\n")


def load_gram(path) -> GramMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing Gram header")
    n, m, kind, backend, shots, seed = lines[0][2:].split()
    values = np.array([[float(t) for t in ln.split()] for ln in lines[1:] if ln.strip()], dtype=float)
    values = values.reshape(int(n), int(m))
    prov = {"kind": kind, "backend": backend, "shots": None if shots == "none" else int(shots),
            "seed": None if seed == "none" else int(seed)}
    return GramMatrix(values, int(n) == int(m) and np.array_equal(values, values.T), prov)
