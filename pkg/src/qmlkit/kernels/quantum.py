"""Fidelity and projected quantum kernels."""

from __future__ import annotations

import numpy as np

from ..circuits import EncodingCircuit
from ..executor import Executor, Job
from ..observables import PauliObservable, single
from ..qnn import QNN, init_theta, shift_gradient
from .gram import GramMatrix, mitigate_msplit, regularize
from .outer import Gaussian, OuterKernel, outer_from_dict

DUPLICATE_MODES = ("all", "off_diagonal", "none")
CHUNK = 256  # rows per executor job; fixed so results never depend on n_jobs


def _as_2d(X, n_features):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if n_features == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected rows with {n_features} features, got shape {X.shape}")
    return X


class QuantumKernel:
    """Common parameter handling and Gram assembly."""

    kind = ""

    def __init__(self, circuit: EncodingCircuit, executor: Executor | None = None, theta=None,
                 regularization: str | None = None, seed: int = 0):
        self.circuit = circuit
        self.executor = executor or Executor()
        self.seed = seed
        self.theta = init_theta(circuit.n_params, seed) if theta is None else np.asarray(theta, dtype=float)
        if self.theta.size != circuit.n_params:
            raise ValueError(f"circuit has {circuit.n_params} parameters, theta has {self.theta.size}")
        if regularization not in (None, "thresholding", "tikhonov"):
            raise ValueError(f"unknown regularization {regularization!r}")
        self.regularization = regularization

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def _provenance(self) -> dict:
        be = self.executor.backend
        return {"kind": self.kind, "backend": be.describe(), "shots": be.shots,
                "seed": self.executor.plan.base_seed, "regularization": self.regularization}

    def gram(self, X, X2=None) -> GramMatrix:
        X = _as_2d(X, self.circuit.n_features)
        if X.shape[0] == 0:
            raise ValueError("empty data set")
        symmetric = X2 is None
        X2 = X if symmetric else _as_2d(X2, self.circuit.n_features)
        K = self._gram_values(X, X2, symmetric)
        if not np.all(np.isfinite(K)):
            raise FloatingPointError("non-finite kernel entries")
        prov = self._provenance()
        if symmetric and self.regularization is not None:
            K = regularize(K, self.regularization)
        return GramMatrix(K, symmetric, prov)

    def evaluate(self, X, X2=None) -> np.ndarray:
        return self.gram(X, X2).values

    def entry(self, x, x2) -> float:
        return float(self.evaluate(np.atleast_2d(x), np.atleast_2d(x2))[0, 0])

    def _gram_values(self, X, X2, symmetric) -> np.ndarray:
        raise NotImplementedError

    def gram_gradient(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric training Gram and ``dK/dtheta`` of shape ``(N, N, K)``."""
        raise NotImplementedError


class FidelityKernel(QuantumKernel):
    """``K(x, x') = |<psi(x)|psi(x')>|^2``.

    On the exact backend entries come from statevector overlaps; on shot
    backends each entry is the all-zero frequency of ``U(x')^dagger U(x)``.
    ``evaluate_duplicates`` is ``"all"`` (every entry evaluated
    independently), ``"off_diagonal"`` (upper triangle only, unit
    diagonal) or ``"none"`` (also skips any pair of identical inputs).
    """

    kind = "fidelity"

    def __init__(self, circuit, executor=None, theta=None, evaluate_duplicates: str = "off_diagonal",
                 mitigation: str | None = None, regularization=None, seed: int = 0, method: str = "auto"):
        super().__init__(circuit, executor, theta, regularization, seed)
        if evaluate_duplicates not in DUPLICATE_MODES:
            raise ValueError(f"evaluate_duplicates must be one of {DUPLICATE_MODES}")
        if mitigation not in (None, "msplit"):
            raise ValueError(f"unknown mitigation {mitigation!r}")
        if method not in ("auto", "overlap", "circuit"):
            raise ValueError("method must be auto, overlap or circuit")
        self.evaluate_duplicates = evaluate_duplicates
        self.mitigation = mitigation
        self.method = method
        self.kinds = tuple(op.kind for op in circuit.angled)

    def _use_overlap(self) -> bool:
        if self.method == "overlap":
            if not self.executor.backend.is_exact:
                raise ValueError("the overlap method needs the exact backend")
            return True
        return self.method == "auto" and self.executor.backend.is_exact

    def _fidelity_structure(self):
        return self.circuit.structure + self.circuit.inverse_structure()

    def _pair_angles(self, A1, A2, rows, cols):
        return np.concatenate([A1[rows], -A2[cols][:, ::-1]], axis=1)

    def _pairs(self, X, X2, symmetric):
        N, M = X.shape[0], X2.shape[0]
        mode = self.evaluate_duplicates
        need_diag = self.mitigation == "msplit"
        if symmetric and mode != "all":
            iu = np.triu_indices(N, 0 if need_diag else 1)
            rows, cols = iu
        else:
            rows, cols = (a.ravel() for a in np.meshgrid(np.arange(N), np.arange(M), indexing="ij"))
        if mode == "none":
            same = np.all(X[rows] == X2[cols], axis=1)
            if need_diag:
                same &= ~(symmetric & (rows == cols))
            rows, cols = rows[~same], cols[~same]
        return rows, cols

    def _run_pairs(self, A1, A2, rows, cols) -> np.ndarray:
        jobs = []
        n = self.circuit.n_qubits
        struct = self._fidelity_structure()
        for s in range(0, len(rows), CHUNK):
            r, c = rows[s:s + CHUNK], cols[s:s + CHUNK]
            jobs.append(Job(n, struct, self._pair_angles(A1, A2, r, c), "zero"))
        out = self.executor.run_many(jobs)
        return np.concatenate(out) if out else np.zeros(0)

    def _gram_values(self, X, X2, symmetric):
        N, M = X.shape[0], X2.shape[0]
        if self._use_overlap():
            S1 = self.executor.statevectors(self.circuit.n_qubits, self.circuit.structure,
                                            self.circuit.angles(X, self.theta))
            S2 = S1 if symmetric else self.executor.statevectors(
                self.circuit.n_qubits, self.circuit.structure, self.circuit.angles(X2, self.theta))
            K = np.abs(S1.conj() @ S2.T) ** 2
            if symmetric:
                K = 0.5 * (K + K.T)
                np.fill_diagonal(K, 1.0)
            return K
        A1 = self.circuit.angles(X, self.theta)
        A2 = A1 if symmetric else self.circuit.angles(X2, self.theta)
        rows, cols = self._pairs(X, X2, symmetric)
        vals = self._run_pairs(A1, A2, rows, cols)
        K = np.ones((N, M))
        K[rows, cols] = vals
        if symmetric and self.evaluate_duplicates != "all":
            upper = np.triu(K, 1)
            K = upper + upper.T + np.diag(np.diag(K))
            if self.mitigation is None:
                np.fill_diagonal(K, 1.0)
        if self.mitigation == "msplit":
            if symmetric:
                K = mitigate_msplit(K)
            else:
                K = mitigate_msplit(K, self._self_fidelity(A1), self._self_fidelity(A2))
        return K

    def _self_fidelity(self, A) -> np.ndarray:
        idx = np.arange(A.shape[0])
        return self._run_pairs(A, A, idx, idx)

    def entry_via_circuit(self, x, x2) -> float:
        """Zero-state probability of the fidelity test circuit for one pair."""
        A1 = self.circuit.angles(np.atleast_2d(x), self.theta)
        A2 = self.circuit.angles(np.atleast_2d(x2), self.theta)
        return float(self._run_pairs(A1, A2, np.array([0]), np.array([0]))[0])

    def gram_gradient(self, X):
        X = _as_2d(X, self.circuit.n_features)
        N = X.shape[0]
        A = self.circuit.angles(X, self.theta)
        J = self.circuit.angle_jacobian(X, self.theta, "p")
        rows, cols = np.triu_indices(N, 1)
        ang = self._pair_angles(A, A, rows, cols)
        jac = np.concatenate([J[rows], -J[cols][:, ::-1]], axis=1)
        kinds = self.kinds + self.kinds[::-1]
        struct = self._fidelity_structure()
        K = np.eye(N)
        dK = np.zeros((N, N, self.n_params))
        for s in range(0, len(rows), CHUNK):
            sl = slice(s, s + CHUNK)
            v, g = shift_gradient(self.executor, self.circuit.n_qubits, struct, kinds, ang[sl], jac[sl], "zero")
            r, c = rows[sl], cols[sl]
            K[r, c] = K[c, r] = v
            dK[r, c] = dK[c, r] = g
        return K, dK

    def get_params(self) -> dict:
        return {"evaluate_duplicates": self.evaluate_duplicates, "mitigation": self.mitigation,
                "regularization": self.regularization}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "circuit": self.circuit.to_dict(), "theta": self.theta.tolist(),
                **self.get_params()}


def default_measurement(n_qubits: int) -> list[PauliObservable]:
    """X, Y, Z on every qubit (the one-qubit reduced density matrices)."""
    return [PauliObservable(n_qubits, ((1.0, single(n_qubits, P, k)),))
            for k in range(n_qubits) for P in "XYZ"]


class ProjectedKernel(QuantumKernel):
    """Outer kernel applied to measured expectation values ``f_a(x) = <O_a>``."""

    kind = "projected"

    def __init__(self, circuit, executor=None, theta=None, measurement=None, outer: OuterKernel | None = None,
                 regularization=None, seed: int = 0):
        super().__init__(circuit, executor, theta, regularization, seed)
        if measurement is None:
            measurement = default_measurement(circuit.n_qubits)
        meas = []
        for m in measurement:
            if isinstance(m, str):
                m = PauliObservable(circuit.n_qubits, ((1.0, m),))
            if m.n_qubits != circuit.n_qubits:
                raise ValueError("measurement observable acts on the wrong number of qubits")
            meas.append(m)
        self.measurement = meas
        self.outer = outer or Gaussian(1.0)
        self.qnn = QNN(circuit, meas, self.executor)
        self.feature_evaluations = 0

    def features(self, X) -> np.ndarray:
        X = _as_2d(X, self.circuit.n_features)
        self.feature_evaluations += X.shape[0]
        return self.qnn.evaluate(X, self.theta)

    def _gram_values(self, X, X2, symmetric):
        F1 = self.features(X)
        F2 = F1 if symmetric else self.features(X2)
        K = self.outer(F1, F2)
        if symmetric:
            K = 0.5 * (K + K.T)
        return K

    def gram_gradient(self, X):
        X = _as_2d(X, self.circuit.n_features)
        self.feature_evaluations += X.shape[0]
        E, dE = self.qnn.string_gradients(X, self.theta, self.qnn.strings, "p")
        C = self.qnn.coefficient_matrix()
        F = E @ C.T  # (N, A)
        dF = np.einsum("bks,as->bak", dE, C)  # (N, A, K)
        K = self.outer(F, F)
        g1, g2 = self.outer.feature_grads(F, F)
        dK = np.einsum("nma,nak->nmk", g1, dF) + np.einsum("nma,mak->nmk", g2, dF)
        return K, dK

    def get_params(self) -> dict:
        return {"outer": self.outer.to_dict(), "regularization": self.regularization,
                "measurement": [[[c, s] for c, s in m.terms] for m in self.measurement]}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "circuit": self.circuit.to_dict(), "theta": self.theta.tolist(),
                **self.get_params()}


def kernel_from_dict(d: dict, executor: Executor | None = None) -> QuantumKernel:
    circuit = EncodingCircuit.from_dict(d["circuit"])
    theta = np.array(d["theta"], dtype=float)
    if d["kind"] == "fidelity":
        return FidelityKernel(circuit, executor, theta, d["evaluate_duplicates"], d["mitigation"],
                              d["regularization"])
    meas = [PauliObservable(circuit.n_qubits, tuple((float(c), s) for c, s in terms)) for terms in d["measurement"]]
    return ProjectedKernel(circuit, executor, theta, meas, outer_from_dict(d["outer"]), d["regularization"])
