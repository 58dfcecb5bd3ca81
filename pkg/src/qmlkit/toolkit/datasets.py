"""Synthetic data sets, splitting and CSV storage."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..state import make_rng


def make_classification(n_samples: int = 100, n_features: int = 10, seed: int = 0, n_informative: int = 2,
                        class_sep: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian classes separated along ``n_informative`` features; the rest is unit noise.

    Class sizes are ``ceil(N/2)`` and ``floor(N/2)``; rows are shuffled.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if n_features < 2:
        raise ValueError("n_features must be >= 2")
    n_informative = min(n_informative, n_features)
    rng = make_rng(seed)
    y = np.array([0] * math.ceil(n_samples / 2) + [1] * (n_samples // 2))
    direction = rng.choice([-1.0, 1.0], n_informative) * class_sep
    X = rng.normal(size=(n_samples, n_features))
    X[:, :n_informative] += np.where(y[:, None] == 1, 1.0, -1.0) * direction
    # informative columns sit at random positions
    cols = rng.permutation(n_features)
    X = X[:, cols]
    order = rng.permutation(n_samples)
    return X[order], y[order]


def make_moons(n_samples: int = 100, noise: float = 0.0, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved half circles: label 0 on the unit upper half circle, label 1 shifted by (1, 0.5)."""
    if noise < 0:
        raise ValueError("noise must be >= 0")
    n0 = math.ceil(n_samples / 2)
    n1 = n_samples - n0
    t0 = np.linspace(0, np.pi, n0)
    t1 = np.linspace(0, np.pi, n1)
    X = np.vstack([np.column_stack([np.cos(t0), np.sin(t0)]),
                   np.column_stack([1 - np.cos(t1), 0.5 - np.sin(t1)])])
    y = np.array([0] * n0 + [1] * n1)
    rng = make_rng(seed)
    order = rng.permutation(n_samples)
    X, y = X[order], y[order]
    if noise > 0:
        X = X + rng.normal(scale=noise, size=X.shape)
    return X, y


def train_test_split(X, y, test_size: float = 0.25, seed: int = 0):
    """Shuffled split; the test set holds ``ceil(test_size * N)`` rows."""
    X = np.asarray(X)
    y = np.asarray(y)
    N = X.shape[0]
    if not 0 < test_size < 1:
        raise ValueError("test_size must lie in (0, 1)")
    n_test = math.ceil(test_size * N)
    if n_test >= N:
        raise ValueError("test set would leave no training data")
    perm = make_rng(seed).permutation(N)
    test, train = perm[:n_test], perm[n_test:]
    return X[train], X[test], y[train], y[test]


def save_csv(path, X, y, feature_names=None) -> None:
    """One header line (feature names, then ``label``) and one row per sample."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] != y.shape[0]:
        raise ValueError("row counts differ")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ValueError("feature_names length differs from the number of columns")
    as_int = np.issubdtype(y.dtype, np.integer)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["label"])
        for row, label in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(label) if as_int else repr(float(label))])


def load_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "label":
        raise ValueError("CSV header must end with 'label'")
    names = rows[0][:-1]
    body = rows[1:]
    X = np.array([[float(v) for v in r[:-1]] for r in body], dtype=float).reshape(len(body), len(names))
    labels = [r[-1] for r in body]
    try:
        y = np.array([int(v) for v in labels])
    except ValueError:
        y = np.array([float(v) for v in labels])
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in data set")
    return X, y, names
