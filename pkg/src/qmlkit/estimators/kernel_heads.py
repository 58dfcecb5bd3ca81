"""Kernel-method heads on precomputed quantum Gram matrices."""

from __future__ import annotations

import json

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..circuits import family_from_dict
from ..executor import Executor
from ..kernels.gram import cholesky_with_jitter
from ..kernels import FidelityKernel, ProjectedKernel, QuantumKernel, kernel_from_dict, outer_kernel
from .base import Estimator, as_2d, resolve_family
from .smo import svc_dual, svr_dual

_KERNEL_PARAMS = ("encoding_circuit", "n_qubits", "n_layers", "kernel", "outer_kernel", "gamma", "nu",
                  "length_scale", "rq_alpha", "evaluate_duplicates", "mitigation", "regularization", "kernel_seed",
                  "quantum_kernel")


class KernelHead(Estimator):
    """Builds its quantum kernel from hyperparameters at fit time.

    Pass ``quantum_kernel`` to use a ready kernel object (for example one
    whose parameters were optimised); structural keys then do not apply.
    """

    _head_params: tuple[str, ...] = ()

    def __init__(self, encoding_circuit=None, *, quantum_kernel: QuantumKernel | None = None,
                 executor: Executor | None = None, n_qubits=None, n_layers=None, kernel: str = "projected",
                 outer_kernel: str = "gaussian", gamma: float = 1.0, nu: float = 1.5, length_scale: float = 1.0,
                 rq_alpha: float = 1.0, evaluate_duplicates: str = "off_diagonal", mitigation=None,
                 regularization=None, kernel_seed: int = 0):
        super().__init__()
        self._params = _KERNEL_PARAMS + self._head_params
        self.executor = executor or (quantum_kernel.executor if quantum_kernel is not None else Executor())
        self.quantum_kernel = quantum_kernel
        self.encoding_circuit = encoding_circuit
        self.n_qubits = n_qubits if n_qubits is not None else getattr(encoding_circuit, "n_qubits", None)
        self.n_layers = n_layers if n_layers is not None else getattr(encoding_circuit, "n_layers", None)
        self.kernel = kernel
        self.outer_kernel = outer_kernel
        self.gamma = gamma
        self.nu = nu
        self.length_scale = length_scale
        self.rq_alpha = rq_alpha
        self.evaluate_duplicates = evaluate_duplicates
        self.mitigation = mitigation
        self.regularization = regularization
        self.kernel_seed = kernel_seed
        if quantum_kernel is None and encoding_circuit is None:
            raise ValueError("give an encoding_circuit or a quantum_kernel")

    def _outer(self):
        name = str(self.outer_kernel).lower()
        name = {"dotproduct": "dot_product", "rationalquadratic": "rational_quadratic", "rbf": "gaussian"}.get(
            name, name)
        opts = {"gaussian": {"gamma": self.gamma}, "matern": {"nu": self.nu, "length_scale": self.length_scale},
                "rational_quadratic": {"alpha": self.rq_alpha, "length_scale": self.length_scale},
                "dot_product": {}}
        if name not in opts:
            raise ValueError(f"unknown outer kernel {self.outer_kernel!r}")
        return outer_kernel(name, **opts[name])

    def build_kernel(self, n_features: int) -> QuantumKernel:
        if self.quantum_kernel is not None:
            if self.quantum_kernel.circuit.n_features != n_features:
                raise ValueError("data width does not match the quantum kernel's circuit")
            return self.quantum_kernel
        fam = resolve_family(self.encoding_circuit, self.n_qubits, self.n_layers, n_features)
        circuit = fam.circuit
        if self.kernel == "projected":
            return ProjectedKernel(circuit, self.executor, outer=self._outer(), regularization=self.regularization,
                                   seed=self.kernel_seed)
        if self.kernel == "fidelity":
            return FidelityKernel(circuit, self.executor, evaluate_duplicates=self.evaluate_duplicates,
                                  mitigation=self.mitigation, regularization=self.regularization,
                                  seed=self.kernel_seed)
        raise ValueError(f"kernel must be 'projected' or 'fidelity', got {self.kernel!r}")

    def fit(self, X, y):
        X = as_2d(X)
        y = np.asarray(y).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        self.kernel_ = self.build_kernel(X.shape[1])
        K = self.kernel_.evaluate(X)
        if not np.all(np.isfinite(K)):
            raise FloatingPointError("non-finite kernel entries")
        self.X_train_ = X.copy()
        self._fit_gram(K, y)
        self._fitted = True
        self.refit_required = False
        return self

    def fit_precomputed(self, K, y):
        """Fit on a given training Gram matrix (no quantum evaluation)."""
        K = np.asarray(K, dtype=float)
        if not np.all(np.isfinite(K)):
            raise FloatingPointError("non-finite kernel entries")
        self.kernel_ = None
        self.X_train_ = None
        self._fit_gram(K, np.asarray(y).ravel())
        self._fitted = True
        return self

    def predict_precomputed(self, Kx):
        """Predict from a cross Gram ``K(X, X_train)``."""
        self._check_fitted()
        return self._predict_cross(np.atleast_2d(np.asarray(Kx, dtype=float)))

    def predict(self, X):
        return self._predict_cross(self._cross(X))

    def _cross(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_2d(X) if np.size(X) else np.zeros((0, self.X_train_.shape[1]))
        if X.shape[0] == 0:
            return np.zeros((0, self.X_train_.shape[0]))
        return self.kernel_.evaluate(X, self.X_train_)

    # -- serialization ----------------------------------------------------------------
    def _hyper_dict(self) -> dict:
        out = {}
        for k in self._params:
            v = getattr(self, k)
            if k == "quantum_kernel":
                continue
            if k == "encoding_circuit" and v is not None:
                v = v.to_dict()
            out[k] = v
        return out

    def to_text(self) -> str:
        self._check_fitted()
        doc = {"format": "qmlkit-model", "version": 1, "estimator": type(self).__name__,
               "hyperparameters": self._hyper_dict(), "kernel": self.kernel_.to_dict(),
               "X_train": self.X_train_.tolist(), "state": self._state_dict()}
        return json.dumps(doc, indent=1)

    @classmethod
    def from_text(cls, text: str, executor: Executor | None = None) -> "KernelHead":
        doc = json.loads(text)
        if doc.get("estimator") != cls.__name__:
            raise ValueError(f"document holds a {doc.get('estimator')}, not a {cls.__name__}")
        hp = dict(doc["hyperparameters"])
        enc = hp.pop("encoding_circuit")
        kernel = kernel_from_dict(doc["kernel"], executor)
        est = cls(family_from_dict(enc) if enc is not None else None, quantum_kernel=None if enc else kernel,
                  executor=kernel.executor, **{k: v for k, v in hp.items()})
        est.kernel_ = kernel
        est.X_train_ = np.array(doc["X_train"], dtype=float)
        est._load_state(doc["state"])
        est._fitted = True
        return est


# ---------------------------------------------------------------------------------------------


class QSVC(KernelHead):
    """Support vector classifier; one-vs-rest for more than two classes."""

    _head_params = ("C", "tol", "max_passes")

    def __init__(self, encoding_circuit=None, *, C: float = 1.0, tol: float = 1e-3, max_passes: int = 200, **kw):
        super().__init__(encoding_circuit, **kw)
        self.C = C
        self.tol = tol
        self.max_passes = max_passes

    def _fit_gram(self, K, y):
        if self.C <= 0:
            raise ValueError("C must be > 0")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        targets = ([self.classes_[1]] if len(self.classes_) == 2 else list(self.classes_))
        self.dual_coef_, self.intercept_, self.support_ = [], [], []
        for c in targets:
            s = np.where(y == c, 1.0, -1.0)
            res = svc_dual(K, s, self.C, tol=self.tol, max_passes=self.max_passes)
            self.dual_coef_.append(res.alpha * s)
            self.intercept_.append(-res.rho)
            self.support_.append(np.flatnonzero(res.alpha > 0))
        self.dual_coef_ = np.array(self.dual_coef_)
        self.intercept_ = np.array(self.intercept_)

    def decision_function(self, X) -> np.ndarray:
        return self._decision(self._cross(X))

    def _decision(self, Kx):
        D = Kx @ self.dual_coef_.T + self.intercept_
        return D[:, 0] if len(self.classes_) == 2 else D

    def _predict_cross(self, Kx) -> np.ndarray:
        D = self._decision(Kx)
        if len(self.classes_) == 2:
            return np.where(D >= 0, self.classes_[1], self.classes_[0])
        return self.classes_[np.argmax(D, axis=1)] if D.shape[0] else self.classes_[:0]

    def score(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y).ravel()))

    def _state_dict(self):
        return {"classes": self.classes_.tolist(), "dual_coef": self.dual_coef_.tolist(),
                "intercept": self.intercept_.tolist()}

    def _load_state(self, st):
        self.classes_ = np.array(st["classes"])
        self.dual_coef_ = np.array(st["dual_coef"], dtype=float)
        self.intercept_ = np.array(st["intercept"], dtype=float)


class QSVR(KernelHead):
    """Epsilon-insensitive support vector regression."""

    _head_params = ("C", "epsilon", "tol", "max_passes")

    def __init__(self, encoding_circuit=None, *, C: float = 1.0, epsilon: float = 0.1, tol: float = 1e-3,
                 max_passes: int = 200, **kw):
        super().__init__(encoding_circuit, **kw)
        self.C = C
        self.epsilon = epsilon
        self.tol = tol
        self.max_passes = max_passes

    def _fit_gram(self, K, y):
        beta, res = svr_dual(K, np.asarray(y, dtype=float), self.C, self.epsilon, tol=self.tol,
                             max_passes=self.max_passes)
        self.dual_coef_ = beta
        self.intercept_ = -res.rho
        self.objective_ = res.objective

    def _predict_cross(self, Kx) -> np.ndarray:
        return Kx @ self.dual_coef_ + self.intercept_

    def score(self, X, y) -> float:
        return -float(np.mean((self.predict(X) - np.asarray(y, dtype=float).ravel()) ** 2))

    def _state_dict(self):
        return {"dual_coef": self.dual_coef_.tolist(), "intercept": self.intercept_}

    def _load_state(self, st):
        self.dual_coef_ = np.array(st["dual_coef"], dtype=float)
        self.intercept_ = float(st["intercept"])


class QKRR(KernelHead):
    """Kernel ridge regression: ``(K + lam I) beta = y`` by Cholesky; no centering."""

    _head_params = ("lam",)

    def __init__(self, encoding_circuit=None, *, lam: float = 1e-6, **kw):
        super().__init__(encoding_circuit, **kw)
        self.lam = lam

    def _fit_gram(self, K, y):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        A = K + self.lam * np.eye(K.shape[0])
        self.dual_coef_ = cho_solve(cho_factor(A, lower=True), np.asarray(y, dtype=float))

    def _predict_cross(self, Kx) -> np.ndarray:
        return Kx @ self.dual_coef_

    def score(self, X, y) -> float:
        return -float(np.mean((self.predict(X) - np.asarray(y, dtype=float).ravel()) ** 2))

    def _state_dict(self):
        return {"dual_coef": self.dual_coef_.tolist()}

    def _load_state(self, st):
        self.dual_coef_ = np.array(st["dual_coef"], dtype=float)


class QGPR(KernelHead):
    """Gaussian-process regression with noise variance ``sigma2`` and zero prior mean."""

    _head_params = ("sigma2",)

    def __init__(self, encoding_circuit=None, *, sigma2: float = 1e-8, **kw):
        super().__init__(encoding_circuit, **kw)
        self.sigma2 = sigma2

    def _fit_gram(self, K, y):
        self.chol_, self.jitter_ = cholesky_with_jitter(K, self.sigma2)
        self.dual_coef_ = cho_solve(self.chol_, np.asarray(y, dtype=float))

    def _predict_cross(self, Kx):
        return Kx @ self.dual_coef_

    def predict(self, X, return_std: bool = False):
        Kx = self._cross(X)
        mean = Kx @ self.dual_coef_
        if not return_std:
            return mean
        prior = np.array([self.kernel_.evaluate(x[None, :])[0, 0] for x in as_2d(X)]) if len(mean) else mean
        var = prior - np.einsum("ij,ji->i", Kx, cho_solve(self.chol_, Kx.T))
        return mean, np.sqrt(np.maximum(var, 0.0))

    def score(self, X, y) -> float:
        return -float(np.mean((self.predict(X) - np.asarray(y, dtype=float).ravel()) ** 2))

    def _state_dict(self):
        return {"dual_coef": self.dual_coef_.tolist(), "sigma2": self.sigma2}

    def _load_state(self, st):
        self.dual_coef_ = np.array(st["dual_coef"], dtype=float)
        K = self.kernel_.evaluate(self.X_train_)
        self.chol_, self.jitter_ = cholesky_with_jitter(K, self.sigma2)
