"""Seeded k-fold splitting and exhaustive grid search."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..state import make_rng
from .pipeline import is_classification


def kfold(n_samples: int, n_splits: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    if not 2 <= n_splits <= n_samples:
        raise ValueError(f"n_splits must lie in [2, {n_samples}]")
    perm = make_rng(seed).permutation(n_samples)
    folds = np.array_split(perm, n_splits)
    return [(np.sort(np.concatenate(folds[:i] + folds[i + 1:])), np.sort(f)) for i, f in enumerate(folds)]


def stratified_kfold(y, n_splits: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Each class is shuffled and dealt round-robin onto the folds."""
    y = np.asarray(y).ravel()
    if n_splits < 2:
        raise ValueError("n_splits must be >= 2")
    rng = make_rng(seed)
    fold_of = np.empty(len(y), dtype=int)
    offset = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = (np.arange(len(idx)) + offset) % n_splits
        offset += len(idx)
    out = []
    for i in range(n_splits):
        test = np.flatnonzero(fold_of == i)
        if len(test) == 0:
            raise ValueError("more folds than samples")
        out.append((np.flatnonzero(fold_of != i), test))
    return out


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    best_estimator: object
    table: list[dict] = field(default_factory=list)  # one row per (configuration, fold)
    mean_scores: list[float] = field(default_factory=list)
    fold_fits: int = 0
    refits: int = 0

    def configurations(self) -> list[dict]:
        seen, out = set(), []
        for row in self.table:
            if row["config"] not in seen:
                seen.add(row["config"])
                out.append(row["params"])
        return out


def expand_grid(param_grid: dict) -> list[dict]:
    """Cartesian product in declared key order; the first key varies slowest."""
    keys = list(param_grid)
    for k in keys:
        if len(param_grid[k]) == 0:
            raise ValueError(f"empty value list for {k!r}")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(param_grid[k] for k in keys))]


def _metric(estimator, X, y, classification):
    pred = estimator.predict(X)
    if classification:
        return float(np.mean(pred == y))
    return -float(np.mean((np.asarray(pred, dtype=float) - y) ** 2))


def grid_search_cv(estimator, param_grid: dict, X, y, cv: int = 5, seed: int = 0, n_jobs: int = 1,
                   classification: bool | None = None) -> GridSearchResult:
    """Score every configuration by k-fold CV and refit the best on all data.

    The score is mean accuracy for classification (stratified folds) or
    negative mean squared error otherwise; the first configuration in grid
    order wins ties.
    """
    X = np.asarray(X)
    y = np.asarray(y).ravel()
    configs = expand_grid(param_grid)
    probe = estimator.clone()
    for cfg in configs:  # resolve every key before any fitting
        probe.set_params(**cfg)
    classification = is_classification(y) if classification is None else classification
    splits = stratified_kfold(y, cv, seed) if classification else kfold(len(y), cv, seed)

    def run(job):
        c, f = job
        est = estimator.clone().set_params(**configs[c])
        train, test = splits[f]
        est.fit(X[train], y[train])
        return _metric(est, X[test], y[test], classification)

    jobs = [(c, f) for c in range(len(configs)) for f in range(len(splits))]
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            scores = list(pool.map(run, jobs))
    else:
        scores = [run(j) for j in jobs]
    table = [{"config": c, "fold": f, "params": configs[c], "score": s} for (c, f), s in zip(jobs, scores)]
    means = [float(np.mean(scores[c * len(splits):(c + 1) * len(splits)])) for c in range(len(configs))]
    best = 0
    for c, m in enumerate(means):
        if m > means[best]:
            best = c
    final = estimator.clone().set_params(**configs[best]).fit(X, y)
    return GridSearchResult(configs[best], means[best], final, table, means, len(jobs), 1)
