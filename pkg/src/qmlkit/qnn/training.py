"""Losses, shot control, optimizers and the QNN training loop."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .. import state as sv
from ..circuits import EncodingCircuit
from ..observables import PauliObservable, commute, pauli_product
from .engine import QNN

EPS_FLOOR = 1e-3


class TrainingError(RuntimeError):
    """Non-finite loss; ``epoch`` is the epoch at which it appeared."""

    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


# ---------------------------------------------------------------------------------------------
# shot policies


@dataclass(frozen=True)
class FixedShots:
    shots: int

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass(frozen=True)
class RstdShots:
    """Size shots so the relative standard deviation of an estimate is about ``target_rstd``."""

    target_rstd: float = 0.1
    min_shots: int = 100
    max_shots: int = 10000

    def __post_init__(self):
        if self.target_rstd <= 0:
            raise ValueError("target_rstd must be > 0")
        if not 1 <= self.min_shots <= self.max_shots:
            raise ValueError("need 1 <= min_shots <= max_shots")


def choose_shots(policy, value_estimate, variance_estimate):
    """Shot count for one circuit; vectorised over estimate arrays."""
    if isinstance(policy, FixedShots):
        return policy.shots if np.ndim(value_estimate) == 0 else np.full(np.shape(value_estimate), policy.shots)
    var = np.asarray(variance_estimate, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance estimate must be >= 0")
    denom = (policy.target_rstd * np.maximum(np.abs(value_estimate), EPS_FLOOR)) ** 2
    n = np.clip(np.ceil(var / denom), policy.min_shots, policy.max_shots).astype(np.int64)
    return int(n) if n.ndim == 0 else n


# ---------------------------------------------------------------------------------------------
# optimizers


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: np.ndarray | None = field(default=None, init=False, repr=False)
    _v: np.ndarray | None = field(default=None, init=False, repr=False)
    _t: int = field(default=0, init=False, repr=False)

    def reset(self):
        self._m = self._v = None
        self._t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self._m is None:
            self._m = np.zeros_like(params)
            self._v = np.zeros_like(params)
        self._t += 1
        self._m = self.beta1 * self._m + (1 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1 - self.beta2) * grad * grad
        mhat = self._m / (1 - self.beta1**self._t)
        vhat = self._v / (1 - self.beta2**self._t)
        return params - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def to_dict(self):
        return {"name": "adam", "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


@dataclass
class SGD:
    lr: float

    def reset(self):
        pass

    def step(self, params, grad):
        return params - self.lr * grad

    def to_dict(self):
        return {"name": "sgd", "lr": self.lr}


def optimizer_from_dict(d: dict):
    d = dict(d)
    name = d.pop("name")
    return {"adam": Adam, "sgd": SGD}[name](**d)


@dataclass
class TrainConfig:
    epochs: int = 100
    optimizer: Adam | SGD = field(default_factory=lambda: Adam(lr=0.01))
    batch_size: int | None = None
    variance: float = 0.0
    shot_policy: FixedShots | RstdShots | None = None
    seed: int = 0
    loss: str = "squared"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.variance < 0:
            raise ValueError("variance weight must be >= 0")
        if self.loss != "squared":
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self):
        sp = self.shot_policy
        return {"epochs": self.epochs, "optimizer": self.optimizer.to_dict(), "batch_size": self.batch_size,
                "variance": self.variance, "seed": self.seed, "loss": self.loss,
                "shot_policy": None if sp is None else {"type": type(sp).__name__, **asdict(sp)}}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["optimizer"] = optimizer_from_dict(d["optimizer"])
        sp = d.get("shot_policy")
        if sp is not None:
            sp = dict(sp)
            d["shot_policy"] = {"FixedShots": FixedShots, "RstdShots": RstdShots}[sp.pop("type")](**sp)
        return cls(**d)


def init_theta(n_params: int, seed: int) -> np.ndarray:
    """Uniform in [-pi, pi) from ``seed``."""
    return sv.make_rng(seed).uniform(-np.pi, np.pi, n_params)


# ---------------------------------------------------------------------------------------------
# losses


Link = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def tanh_link(f):
    g = np.tanh(f)
    return g, 1.0 - g * g


def _as_targets(y, n_rows, n_out):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1 and n_out == 1:
        y = y.reshape(-1, 1)
    if y.shape != (n_rows, n_out):
        raise ValueError(f"targets have shape {y.shape}, expected {(n_rows, n_out)}")
    return y


def regularized_loss(qnn: QNN, X, y, theta, coef=None, variance: float = 0.0, link: Link | None = None,
                     shots=None) -> float:
    """``(1/N) sum ||g(f(x_i)) - y_i||^2 + variance * (1/N) sum Var[f(x_i)]``."""
    if variance < 0:
        raise ValueError("variance weight must be >= 0")
    X = qnn._X(X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    y = _as_targets(y, X.shape[0], qnn.n_outputs)
    coef = qnn.initial_coefficients() if coef is None else coef
    if variance > 0:
        strings, S2 = qnn.variance_strings(coef)
        E = qnn.expect(X, theta, strings, shots)
        C = np.zeros_like(S2)
        C[:, : len(qnn.strings)] = qnn.coefficient_matrix(coef)
        f = E @ C.T
        var = E @ S2.T - f * f
    else:
        f = qnn.evaluate(X, theta, coef, shots)
        var = 0.0
    g = link(f)[0] if link is not None else f
    N = X.shape[0]
    return float(np.sum((g - y) ** 2) / N + variance * np.sum(var) / N)


def loss_and_grad(qnn: QNN, X, y, theta, coef, variance=0.0, link: Link | None = None, shot_policy=None):
    """Loss and its gradient with respect to ``(theta, coef)``.

    One job evaluates all required strings (those of ``O`` and, when the
    variance weight is positive, of ``O^2``) at the unshifted and shifted
    angles.  Under an adaptive shot policy the unshifted circuits are run
    first and their value/variance estimates set the shifted-circuit shots.
    """
    X = qnn._X(X)
    N = X.shape[0]
    if N == 0:
        raise ValueError("empty batch")
    y = _as_targets(y, N, qnn.n_outputs)
    C = qnn.coefficient_matrix(coef)
    need_var = variance > 0 or isinstance(shot_policy, RstdShots)
    if need_var:
        strings, S2 = qnn.variance_strings(coef)
    else:
        strings, S2 = qnn.strings, None
    S = len(strings)
    Cf = np.zeros((qnn.n_outputs, S))
    Cf[:, : len(qnn.strings)] = C

    sampled = not qnn.executor.backend.is_exact
    shots_base = shots_shift = None
    if sampled and shot_policy is not None:
        if isinstance(shot_policy, FixedShots):
            shots_base = shots_shift = shot_policy.shots
            E, dE = qnn.string_gradients(X, theta, strings, "p", shots_base, shots_shift)
        else:
            E = qnn.expect(X, theta, strings)
            f0 = E @ Cf.T
            v0 = np.maximum(E @ S2.T - f0 * f0, 0.0)
            per_row = choose_shots(shot_policy, f0, v0).max(axis=1)
            _, dE = qnn.string_gradients(X, theta, strings, "p", None, per_row, include_base=False)
    else:
        E, dE = qnn.string_gradients(X, theta, strings, "p")
    if dE.ndim == 2:  # no gradient rows: keep a K axis of zero length or zeros
        dE = dE.reshape(N, -1, S)

    f = E @ Cf.T  # (N, O)
    df = np.einsum("bks,os->bko", dE, Cf)  # (N, K, O)
    if link is not None:
        g, dg = link(f)
    else:
        g, dg = f, np.ones_like(f)
    r = g - y
    loss = np.sum(r * r) / N
    w = 2.0 * r * dg / N  # dL/df
    grad_theta = np.einsum("bo,bko->k", w, df)
    grad_coef = np.zeros(qnn.n_coefs)
    for k, (o, col) in enumerate(qnn.coef_owner):
        grad_coef[k] = np.sum(w[:, o] * E[:, col])
    if variance > 0:
        var = E @ S2.T - f * f
        loss += variance * np.sum(var) / N
        dvar = np.einsum("bks,os->bko", dE, S2) - 2.0 * f[:, None, :] * df
        grad_theta += variance * np.sum(dvar, axis=(0, 2)) / N
        obs_list = qnn.bound_observables(coef)
        col = {s: i for i, s in enumerate(strings)}
        k = 0
        for o, obs in enumerate(obs_list):
            cvals = obs.coefficients
            for j in obs.trainable_indices:
                # d<O^2>/dc_j = sum over products P_j P_m + P_m P_j
                acc = np.zeros(N)
                for m, sm in enumerate(obs.strings):
                    ph, s = _commuting_product(obs.strings[j], sm)
                    if s is not None:
                        acc += 2.0 * cvals[m] * ph * E[:, col[s]]
                acc -= 2.0 * f[:, o] * E[:, col[obs.strings[j]]]
                grad_coef[k] += variance * np.sum(acc) / N
                k += 1
    return float(loss), grad_theta, grad_coef


def _commuting_product(a, b):
    if not commute(a, b):
        return 0.0, None
    ph, s = pauli_product(a, b)
    return float(np.real(ph)), s


# ---------------------------------------------------------------------------------------------
# fit


@dataclass
class FitResult:
    theta: np.ndarray
    coef: np.ndarray
    history: list[float]


def fit(qnn: QNN, X, y, config: TrainConfig, theta0=None, coef0=None, link: Link | None = None,
        train_coefs: bool = True, callback=None) -> FitResult:
    """Gradient descent over ``(theta, trainable c)``; history holds the full-batch loss per epoch."""
    X = qnn._X(X)
    N = X.shape[0]
    if N == 0:
        raise ValueError("empty training set")
    if X.shape[1] != qnn.circuit.n_features:
        raise ValueError(f"X has {X.shape[1]} features, circuit expects {qnn.circuit.n_features}")
    y = _as_targets(y, N, qnn.n_outputs)
    if config.batch_size is not None and config.batch_size > N:
        raise ValueError("batch_size exceeds the number of samples")
    theta = init_theta(qnn.n_params, config.seed) if theta0 is None else np.array(theta0, dtype=float)
    coef = qnn.initial_coefficients() if coef0 is None else np.array(coef0, dtype=float)
    K = theta.size
    params = np.concatenate([theta, coef])
    opt = config.optimizer
    opt.reset()
    rng = sv.make_rng(config.seed + 1)
    history: list[float] = []
    bs = config.batch_size or N
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(N) if bs < N else np.arange(N)
        for start in range(0, N, bs):
            idx = order[start:start + bs]
            loss, gt, gc = loss_and_grad(qnn, X[idx], y[idx], params[:K], params[K:], config.variance, link,
                                         config.shot_policy)
            if not math.isfinite(loss) or not (np.all(np.isfinite(gt)) and np.all(np.isfinite(gc))):
                raise TrainingError(epoch, "non-finite loss or gradient")
            grad = np.concatenate([gt, gc if train_coefs else np.zeros_like(gc)])
            params = opt.step(params, grad)
        full = regularized_loss(qnn, X, y, params[:K], params[K:], config.variance, link)
        if not math.isfinite(full):
            raise TrainingError(epoch, "non-finite loss")
        history.append(full)
        if callback is not None:
            callback(epoch, full)
    return FitResult(params[:K].copy(), params[K:].copy(), history)


# ---------------------------------------------------------------------------------------------
# serialization


def model_to_text(circuit: EncodingCircuit, observables, theta, coef, config: TrainConfig | None = None,
                  extra: dict | None = None) -> str:
    """JSON text document; floats use ``repr`` so theta and c round-trip bit-exactly."""
    doc = {
        "format": "qmlkit-model",
        "version": 1,
        "circuit": circuit.to_dict(),
        "observables": [{"n_qubits": o.n_qubits, "terms": [[c, s] for c, s in o.terms],
                         "trainable": list(o.trainable)} for o in observables],
        "theta": [float(t) for t in np.asarray(theta).ravel()],
        "coef": [float(c) for c in np.asarray(coef).ravel()],
        "config": None if config is None else config.to_dict(),
    }
    if extra:
        doc["extra"] = extra
    return json.dumps(doc, indent=1)


def model_from_text(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("format") != "qmlkit-model":
        raise ValueError("not a qmlkit model document")
    doc["circuit"] = EncodingCircuit.from_dict(doc["circuit"])
    doc["observables"] = [PauliObservable(o["n_qubits"], tuple((float(c), s) for c, s in o["terms"]),
                                          tuple(o["trainable"])) for o in doc["observables"]]
    doc["theta"] = np.array(doc["theta"], dtype=float)
    doc["coef"] = np.array(doc["coef"], dtype=float)
    if doc["config"] is not None:
        doc["config"] = TrainConfig.from_dict(doc["config"])
    return doc


__all__ = [
    "Adam", "SGD", "TrainConfig", "FixedShots", "RstdShots", "choose_shots", "fit", "FitResult",
    "loss_and_grad", "regularized_loss", "tanh_link", "TrainingError", "init_theta", "model_to_text",
    "model_from_text",
]
