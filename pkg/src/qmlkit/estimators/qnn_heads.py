"""QNN regressor and classifier."""

from __future__ import annotations

import json

import numpy as np

from ..circuits import EncodingCircuit, family_from_dict
from ..executor import Executor
from ..observables import PauliObservable, ising_hamiltonian, summed_paulis
from ..qnn import QNN, Adam, TrainConfig, fit, init_theta, tanh_link
from ..qnn.training import optimizer_from_dict
from .base import Estimator, as_2d, resolve_family

_NAMED_OBSERVABLES = {
    "summed_paulis": lambda fam: summed_paulis(fam.n_qubits),
    "ising": lambda fam: ising_hamiltonian(fam.n_qubits),
    "qcnn": lambda fam: fam.observable(),
}


class _QnnHead(Estimator):
    _params = ("encoding_circuit", "n_qubits", "n_layers", "observable", "lr", "epochs", "batch_size",
               "variance", "shot_policy", "seed", "optimizer")

    def __init__(self, encoding_circuit, observable="summed_paulis", executor: Executor | None = None, *,
                 n_qubits=None, n_layers=None, lr: float = 0.1, epochs: int = 100, batch_size=None,
                 variance: float = 0.0, shot_policy=None, seed: int = 0, optimizer: str = "adam"):
        super().__init__()
        self.executor = executor or Executor()
        self.encoding_circuit = encoding_circuit
        self.n_qubits = n_qubits if n_qubits is not None else getattr(encoding_circuit, "n_qubits", None)
        self.n_layers = n_layers if n_layers is not None else getattr(encoding_circuit, "n_layers", None)
        self.observable = observable
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.variance = variance
        self.shot_policy = shot_policy
        self.seed = seed
        self.optimizer = optimizer

    # -- model assembly ------------------------------------------------------------------
    def _circuit(self, n_features):
        enc = self.encoding_circuit
        if isinstance(enc, EncodingCircuit):
            if enc.n_features != n_features:
                raise ValueError(f"circuit expects {enc.n_features} features, data has {n_features}")
            return enc, enc
        fam = resolve_family(enc, self.n_qubits, self.n_layers, n_features)
        return fam, fam.circuit

    def _observable(self, fam, n_outputs) -> list[PauliObservable]:
        obs = self.observable
        if isinstance(obs, str):
            if obs not in _NAMED_OBSERVABLES:
                raise ValueError(f"unknown observable {obs!r}; choose from {sorted(_NAMED_OBSERVABLES)}")
            obs = _NAMED_OBSERVABLES[obs](fam)
        elif callable(obs):
            obs = obs(fam)
        if isinstance(obs, PauliObservable):
            obs = [obs] * n_outputs
        if len(obs) != n_outputs:
            raise ValueError(f"need {n_outputs} observables, got {len(obs)}")
        return list(obs)

    def _config(self) -> TrainConfig:
        opt = Adam(self.lr) if self.optimizer == "adam" else optimizer_from_dict({"name": self.optimizer,
                                                                                  "lr": self.lr})
        return TrainConfig(epochs=self.epochs, optimizer=opt, batch_size=self.batch_size, variance=self.variance,
                           shot_policy=self.shot_policy, seed=self.seed)

    def _fit_targets(self, X, T, link):
        fam, circuit = self._circuit(X.shape[1])
        obs = self._observable(fam, T.shape[1])
        self.qnn_ = QNN(circuit, obs, self.executor)
        cfg = self._config()
        res = fit(self.qnn_, X, T, cfg, theta0=init_theta(circuit.n_params, self.seed), link=link)
        self.theta_, self.coef_, self.history_ = res.theta, res.coef, res.history
        self._fitted = True
        self.refit_required = False
        return self

    def _raw(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_2d(X) if np.size(X) else np.zeros((0, self.qnn_.circuit.n_features))
        if X.shape[0] == 0:
            return np.zeros((0, self.qnn_.n_outputs))
        return self.qnn_.evaluate(X, self.theta_, self.coef_)

    # -- serialization -------------------------------------------------------------------
    def to_text(self) -> str:
        self._check_fitted()
        enc = self.encoding_circuit
        doc = {"format": "qmlkit-model", "version": 1, "estimator": type(self).__name__,
               "circuit": self.qnn_.circuit.to_dict(),
               "encoding": enc.to_dict(),
               "observables": [{"n_qubits": o.n_qubits, "terms": [[c, s] for c, s in o.terms],
                                "trainable": list(o.trainable)} for o in self.qnn_.observables],
               "theta": [float(t) for t in self.theta_], "coef": [float(c) for c in self.coef_],
               "config": self._config().to_dict(), "extra": self._extra()}
        return json.dumps(doc, indent=1)

    @classmethod
    def from_text(cls, text: str, executor: Executor | None = None):
        doc = json.loads(text)
        if doc.get("estimator") != cls.__name__:
            raise ValueError(f"document holds a {doc.get('estimator')}, not a {cls.__name__}")
        enc = doc["encoding"]
        enc = EncodingCircuit.from_dict(enc) if "ops" in enc else family_from_dict(enc)
        obs = [PauliObservable(o["n_qubits"], tuple((float(c), s) for c, s in o["terms"]), tuple(o["trainable"]))
               for o in doc["observables"]]
        cfg = doc["config"]
        est = cls(enc, obs if len(obs) > 1 else obs[0], executor, lr=cfg["optimizer"]["lr"],
                  epochs=cfg["epochs"], batch_size=cfg["batch_size"], variance=cfg["variance"], seed=cfg["seed"],
                  optimizer=cfg["optimizer"]["name"])
        est.qnn_ = QNN(EncodingCircuit.from_dict(doc["circuit"]), obs, est.executor)
        est.theta_ = np.array(doc["theta"], dtype=float)
        est.coef_ = np.array(doc["coef"], dtype=float)
        est.history_ = []
        est._load_extra(doc["extra"])
        est._fitted = True
        return est

    def _extra(self):
        return {}

    def _load_extra(self, extra):
        pass


class QNNRegressor(_QnnHead):
    """Squared-loss regression with optional variance regularisation."""

    def fit(self, X, y):
        X = as_2d(X)
        y = np.asarray(y, dtype=float)
        T = y.reshape(-1, 1) if y.ndim == 1 else y
        if T.shape[0] != X.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        self.n_outputs_ = T.shape[1]
        return self._fit_targets(X, T, None)

    def predict(self, X) -> np.ndarray:
        out = self._raw(X)
        return out[:, 0] if self.n_outputs_ == 1 else out

    def score(self, X, y) -> float:
        return -float(np.mean((self.predict(X) - np.asarray(y, dtype=float)) ** 2))

    def _extra(self):
        return {"n_outputs": self.n_outputs_}

    def _load_extra(self, extra):
        self.n_outputs_ = extra["n_outputs"]


class QNNClassifier(_QnnHead):
    """Outputs squashed by ``tanh`` and trained on +-1 targets.

    Two classes use one output (``classes_[1]`` is the positive class, and
    an output of exactly zero counts as positive); more classes use one
    output per class against the rest and predict the largest output.
    """

    def fit(self, X, y):
        X = as_2d(X)
        y = np.asarray(y).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        if len(self.classes_) == 2:
            T = np.where(y == self.classes_[1], 1.0, -1.0).reshape(-1, 1)
        else:
            T = np.where(y[:, None] == self.classes_[None, :], 1.0, -1.0)
        return self._fit_targets(X, T, tanh_link)

    def decision_function(self, X) -> np.ndarray:
        out = self._raw(X)
        return out[:, 0] if len(self.classes_) == 2 else out

    def predict(self, X) -> np.ndarray:
        D = self.decision_function(X)
        if len(self.classes_) == 2:
            return np.where(D >= 0, self.classes_[1], self.classes_[0])
        return self.classes_[np.argmax(D, axis=1)] if D.shape[0] else self.classes_[:0]

    def score(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y).ravel()))

    def _extra(self):
        return {"classes": self.classes_.tolist()}

    def _load_extra(self, extra):
        self.classes_ = np.array(extra["classes"])
