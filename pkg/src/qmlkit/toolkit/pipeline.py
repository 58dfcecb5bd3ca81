"""Sequential transformer chain ending in an estimator."""

from __future__ import annotations

import numpy as np


class Pipeline:
    """``Pipeline([("scaler", s), ("select", f), ("model", m)])``.

    Hyperparameters are addressed as ``step__param``.
    """

    def __init__(self, steps):
        names = [n for n, _ in steps]
        if len(set(names)) != len(names):
            raise ValueError("step names must be unique")
        if not steps:
            raise ValueError("a pipeline needs at least one step")
        for n in names:
            if "__" in n:
                raise ValueError(f"step name {n!r} must not contain '__'")
        self.steps = list(steps)

    @property
    def named_steps(self) -> dict:
        return dict(self.steps)

    @property
    def final(self):
        return self.steps[-1][1]

    def _transform(self, X):
        for _, step in self.steps[:-1]:
            X = step.transform(X)
        return X

    def fit(self, X, y):
        for _, step in self.steps[:-1]:
            X = step.fit_transform(X, y)
        self.final.fit(X, y)
        return self

    def predict(self, X):
        return self.final.predict(self._transform(X))

    def score(self, X, y):
        return self.final.score(self._transform(X), y)

    def get_params(self) -> dict:
        out = {}
        for name, step in self.steps:
            for k, v in step.get_params().items():
                out[f"{name}__{k}"] = v
        return out

    def set_params(self, **params) -> "Pipeline":
        grouped: dict[str, dict] = {}
        for key, v in params.items():
            name, sep, sub = key.partition("__")
            if not sep or name not in self.named_steps:
                raise ValueError(f"cannot resolve parameter {key!r}; expected '<step>__<param>' with step in "
                                 f"{[n for n, _ in self.steps]}")
            grouped.setdefault(name, {})[sub] = v
        for name, sub in grouped.items():
            self.named_steps[name].set_params(**sub)
        return self

    def clone(self) -> "Pipeline":
        return Pipeline([(n, s.clone()) for n, s in self.steps])

    def __repr__(self):
        return f"Pipeline({[n for n, _ in self.steps]})"


def is_classification(y) -> bool:
    """Labels with at most 20 distinct values are treated as classes."""
    return len(np.unique(np.asarray(y))) <= 20
