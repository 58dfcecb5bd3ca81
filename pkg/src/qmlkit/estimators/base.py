"""Hyperparameter handling shared by all estimators."""

from __future__ import annotations

import copy

import numpy as np

ALIASES = {"num_qubits": "n_qubits", "num_layers": "n_layers", "encoding": "encoding_circuit"}


class NotFittedError(RuntimeError):
    pass


class Estimator:
    """``get_params``/``set_params`` over a declared, flat hyperparameter list.

    Subclasses list their hyperparameters in ``_params``; keys in
    ``_structural`` rebuild the circuit and discard the fitted state.
    Setting ``encoding_circuit`` also adopts its qubit and layer counts
    unless those keys are given in the same call.
    """

    _params: tuple[str, ...] = ()
    _structural: frozenset = frozenset({"encoding_circuit", "n_qubits", "n_layers"})

    def __init__(self):
        self._fitted = False
        self.refit_required = False

    def get_params(self, deep: bool = False) -> dict:
        return {k: getattr(self, k) for k in self._params}

    def set_params(self, **params) -> "Estimator":
        params = {ALIASES.get(k, k): v for k, v in params.items()}
        unknown = sorted(set(params) - set(self._params))
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) {unknown} for {type(self).__name__}; "
                             f"valid keys: {list(self._params)}")
        if "encoding_circuit" in params:
            enc = params.pop("encoding_circuit")
            self.encoding_circuit = enc
            if enc is not None and hasattr(enc, "n_qubits"):
                params.setdefault("n_qubits", enc.n_qubits)
                params.setdefault("n_layers", getattr(enc, "n_layers", None))
        changed = False
        for k, v in params.items():
            old = getattr(self, k)
            setattr(self, k, v)
            changed |= not _same(old, v)
        if self._fitted and (changed or "encoding_circuit" in params):
            self._fitted = False
            self.refit_required = True
        self._on_params_changed()
        return self

    def _on_params_changed(self):
        pass

    def clone(self) -> "Estimator":
        """Unfitted copy with identical hyperparameters."""
        new = copy.copy(self)
        new.__dict__ = {k: v for k, v in self.__dict__.items() if not k.endswith("_") or k.startswith("_")}
        new._fitted = False
        new.refit_required = False
        return new

    def _check_fitted(self):
        if not self._fitted:
            raise NotFittedError(f"{type(self).__name__} must be fitted before predict")

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


def _same(a, b) -> bool:
    try:
        r = a == b
        return bool(np.all(r)) if not isinstance(r, bool) else r
    except Exception:
        return a is b


def as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


def resolve_family(encoding, n_qubits, n_layers, n_features):
    """Family with the requested sizes; ``n_features`` follows the data."""
    if encoding is None:
        raise ValueError("no encoding circuit configured")
    changes = {"n_features": n_features}
    if n_qubits is not None:
        changes["n_qubits"] = n_qubits
    if n_layers is not None:
        changes["n_layers"] = n_layers
    return encoding.replace(**changes)
