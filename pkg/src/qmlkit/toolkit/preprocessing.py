"""Min-max scaling and ANOVA F-score feature selection."""

from __future__ import annotations

import numpy as np

from ..estimators.base import Estimator, NotFittedError, as_2d


class MinMaxScaler(Estimator):
    """Column-wise affine map of the training range onto ``feature_range``.

    Constant training columns map to the midpoint of the range.
    """

    _params = ("feature_range",)
    _structural = frozenset({"feature_range"})

    def __init__(self, feature_range=(0.0, 1.0)):
        super().__init__()
        self.feature_range = tuple(feature_range)

    def fit(self, X, y=None):
        lo, hi = self.feature_range
        if not hi > lo:
            raise ValueError("feature_range needs hi > lo")
        X = as_2d(X)
        self.min_ = X.min(axis=0)
        self.max_ = X.max(axis=0)
        self._fitted = True
        return self

    def transform(self, X):
        if not self._fitted:
            raise NotFittedError("MinMaxScaler must be fitted before transform")
        lo, hi = self.feature_range
        X = as_2d(X)
        span = self.max_ - self.min_
        const = span == 0
        scaled = (X - self.min_) / np.where(const, 1.0, span)
        out = lo + scaled * (hi - lo)
        out[:, const] = 0.5 * (lo + hi)
        # exact endpoints for the training extremes
        out = np.where(X == self.min_, lo, out)
        out = np.where((X == self.max_) & ~const, hi, out)
        out[:, const] = 0.5 * (lo + hi)
        return out

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)


def f_classif(X, y) -> np.ndarray:
    """One-way ANOVA F statistic per feature.

    Zero within-class spread gives ``inf`` when the class means differ
    and ``0`` when they do not.
    """
    X = as_2d(X)
    y = np.asarray(y).ravel()
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("F-score needs at least two classes")
    N, k = X.shape[0], len(classes)
    mean = X.mean(axis=0)
    ssb = np.zeros(X.shape[1])
    ssw = np.zeros(X.shape[1])
    for c in classes:
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        ssb += Xc.shape[0] * (mc - mean) ** 2
        ssw += ((Xc - mc) ** 2).sum(axis=0)
    scale = 1e-12 * np.maximum(np.abs(X).max(axis=0), 1.0) ** 2 * N
    ssb = np.where(ssb <= scale, 0.0, ssb)
    ssw = np.where(ssw <= scale, 0.0, ssw)
    dfb, dfw = k - 1, N - k
    with np.errstate(divide="ignore", invalid="ignore"):
        F = (ssb / dfb) / (ssw / max(dfw, 1))
    F = np.where(ssw == 0, np.where(ssb > 0, np.inf, 0.0), F)
    return F


class SelectKBest(Estimator):
    """Keep the ``k`` features with the highest F-score; ties go to the lower index."""

    _params = ("k",)
    _structural = frozenset({"k"})

    def __init__(self, k: int = 10):
        super().__init__()
        self.k = k

    def fit(self, X, y):
        X = as_2d(X)
        if not 1 <= self.k <= X.shape[1]:
            raise ValueError(f"k must lie in [1, {X.shape[1]}], got {self.k}")
        self.scores_ = f_classif(X, y)
        order = np.argsort(-self.scores_, kind="stable")
        self.support_ = np.sort(order[: self.k])
        self._fitted = True
        return self

    def transform(self, X):
        if not self._fitted:
            raise NotFittedError("SelectKBest must be fitted before transform")
        return as_2d(X)[:, self.support_]

    def fit_transform(self, X, y):
        return self.fit(X, y).transform(X)
