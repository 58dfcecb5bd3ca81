"""Encoding-circuit IR: gate programs whose angles depend on features and parameters."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .. import state as sv


class DomainError(ValueError):
    """A feature or parameter value lies outside an angle map's domain."""


MAPS = ("id", "arccos", "arctan", "square")


@lru_cache(maxsize=None)
def _sympy_derivative(name: str, order: int):
    import sympy

    u = sympy.Symbol("u")
    base = {"arccos": sympy.acos(u), "arctan": sympy.atan(u)}[name]
    return sympy.lambdify(u, sympy.diff(base, u, order), "numpy")


def map_derivative(name: str, u: np.ndarray, order: int = 0) -> np.ndarray:
    """``order``-th derivative of an angle map evaluated at ``u``."""
    u = np.asarray(u, dtype=float)
    if name == "arccos" and np.any(np.abs(u) > 1.0):
        raise DomainError(f"arccos map needs |x| <= 1, got {u[np.abs(u) > 1.0][0]!r}")
    if name == "id":
        return u if order == 0 else (np.ones_like(u) if order == 1 else np.zeros_like(u))
    if name == "square":
        return [u * u, 2 * u, 2 * np.ones_like(u)][order] if order < 3 else np.zeros_like(u)
    if order == 0:
        return np.arccos(u) if name == "arccos" else np.arctan(u)
    if order == 1:
        if name == "arccos":
            with np.errstate(divide="ignore"):
                return -1.0 / np.sqrt(1.0 - u * u)
        return 1.0 / (1.0 + u * u)
    return np.broadcast_to(_sympy_derivative(name, order)(u), u.shape).astype(float)


@dataclass(frozen=True)
class AngleExpr:
    """Rotation angle ``scale * map(source) [* theta[scale_param]]``.

    ``source`` is ``"x"`` (feature ``index``), ``"p"`` (parameter ``index``)
    or ``"c"`` (constant angle equal to ``scale``).
    """

    source: str
    index: int = 0
    map: str = "id"
    scale: float = 1.0
    scale_param: int | None = None

    def __post_init__(self):
        if self.source not in ("x", "p", "c"):
            raise ValueError(f"unknown angle source {self.source!r}")
        if self.map not in MAPS:
            raise ValueError(f"unknown angle map {self.map!r}")
        if self.source == "p" and self.scale_param == self.index:
            raise ValueError("a parameter cannot scale its own mapped value")
        if self.source == "c" and self.scale_param is not None:
            raise ValueError("constant angles cannot carry a scale parameter")

    def depends_on(self, target: tuple[str, int]) -> bool:
        kind, i = target
        if kind == "p" and self.scale_param == i:
            return True
        return self.source == kind and self.index == i

    def derivative(self, x: np.ndarray, theta: np.ndarray, targets: Sequence[tuple[str, int]] = ()) -> np.ndarray:
        """Mixed partial derivative of the angle over a batch of feature rows."""
        B = x.shape[0]
        k_src = k_w = 0
        for t in targets:
            if self.source != "c" and t == (self.source, self.index):
                k_src += 1
            elif t == ("p", self.scale_param):
                k_w += 1
            else:
                return np.zeros(B)
        if k_w > 1:
            return np.zeros(B)
        if self.source == "c":
            return np.full(B, self.scale if k_src == 0 else 0.0)
        u = x[:, self.index] if self.source == "x" else np.full(B, theta[self.index])
        val = self.scale * map_derivative(self.map, u, k_src)
        if self.scale_param is not None and k_w == 0:
            val = val * theta[self.scale_param]
        return val

    def to_dict(self) -> dict:
        return {"source": self.source, "index": self.index, "map": self.map,
                "scale": self.scale, "scale_param": self.scale_param}

    def label(self) -> str:
        if self.source == "c":
            return f"{self.scale:.3g}"
        base = f"{self.source}{self.index}"
        if self.map != "id":
            base = f"{self.map}({base})"
        if self.scale != 1.0:
            base = f"{self.scale:g}*{base}"
        if self.scale_param is not None:
            base = f"p{self.scale_param}*{base}"
        return base


@dataclass(frozen=True)
class Op:
    kind: str
    qubits: tuple[int, ...]
    angle: AngleExpr | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind not in sv.GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != sv.n_qubits_of(self.kind) or len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"bad qubits {self.qubits} for {self.kind}")
        if (self.angle is not None) != (self.kind in sv.ANGLED):
            if self.angle is not None:
                raise ValueError(f"{self.kind} is not a rotation-type gate and cannot carry an angle")
            raise ValueError(f"{self.kind} needs an angle expression")


@dataclass(frozen=True)
class EncodingCircuit:
    """Immutable gate program ``U(x, theta)`` acting on ``|0...0>``."""

    n_qubits: int
    n_features: int
    n_params: int
    ops: tuple[Op, ...] = field(default=())
    name: str = "circuit"

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if max(op.qubits) >= self.n_qubits:
                raise ValueError(f"{op.kind} on qubit {max(op.qubits)} exceeds {self.n_qubits} qubits")
            a = op.angle
            if a is None:
                continue
            if a.source == "x" and not 0 <= a.index < self.n_features:
                raise ValueError(f"feature index {a.index} out of range [0, {self.n_features})")
            if a.source == "p" and not 0 <= a.index < self.n_params:
                raise ValueError(f"parameter index {a.index} out of range [0, {self.n_params})")
            if a.scale_param is not None and not 0 <= a.scale_param < self.n_params:
                raise ValueError(f"parameter index {a.scale_param} out of range [0, {self.n_params})")

    # -- structure -------------------------------------------------------------
    @cached_property
    def structure(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        return tuple((op.kind, op.qubits) for op in self.ops)

    @cached_property
    def angled(self) -> tuple[Op, ...]:
        return tuple(op for op in self.ops if op.angle is not None)

    @property
    def n_angles(self) -> int:
        return len(self.angled)

    @cached_property
    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def __hash__(self):
        return hash(self.digest)

    def __eq__(self, other):
        return isinstance(other, EncodingCircuit) and self.digest == other.digest

    def gate_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for op in self.ops:
            out[op.kind] = out.get(op.kind, 0) + 1
        return out

    # -- binding ---------------------------------------------------------------
    def _prepare(self, X, theta) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        if X.ndim <= 1:
            X = X.reshape(1, -1) if self.n_features != 1 or X.ndim == 0 else X.reshape(-1, 1)
            if X.shape[1] != self.n_features and X.size == self.n_features:
                X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        theta = np.asarray(theta if theta is not None else [], dtype=float).ravel()
        if theta.size != self.n_params:
            raise ValueError(f"circuit has {self.n_params} parameters, got a vector of length {theta.size}")
        return X, theta

    def angles(self, X, theta=None) -> np.ndarray:
        """Concrete angle matrix of shape ``(B, n_angles)``."""
        X, theta = self._prepare(X, theta)
        out = np.empty((X.shape[0], self.n_angles))
        for g, op in enumerate(self.angled):
            out[:, g] = op.angle.derivative(X, theta)
        return out

    def angle_derivative(self, X, theta, g: int, targets: Sequence[tuple[str, int]]) -> np.ndarray:
        X, theta = self._prepare(X, theta)
        return self.angled[g].angle.derivative(X, theta, targets)

    def angle_jacobian(self, X, theta=None, wrt: str = "p") -> np.ndarray:
        """d angle_g / d theta_k (``wrt="p"``) or d x_k (``"x"``); shape (B, G, K)."""
        X, theta = self._prepare(X, theta)
        K = self.n_params if wrt == "p" else self.n_features
        J = np.zeros((X.shape[0], self.n_angles, K))
        for g, op in enumerate(self.angled):
            a = op.angle
            for k in {a.index if a.source == wrt else None, a.scale_param if wrt == "p" else None} - {None}:
                J[:, g, k] = a.derivative(X, theta, [(wrt, k)])
        return J

    def bind(self, x, theta=None) -> list[sv.Gate]:
        ang = self.angles(x, theta)
        if ang.shape[0] != 1:
            raise ValueError("bind takes a single feature vector")
        it = iter(ang[0])
        return [sv.Gate(op.kind, op.qubits, float(next(it)) if op.angle is not None else None) for op in self.ops]

    def statevector(self, x, theta=None) -> sv.StateVector:
        amps = sv.run_ops(self.n_qubits, self.structure, self.angles(x, theta))
        return sv.StateVector(self.n_qubits, amps[0])

    def states(self, X, theta=None) -> np.ndarray:
        return sv.run_ops(self.n_qubits, self.structure, self.angles(X, theta))

    # -- transformations -------------------------------------------------------
    def inverse_structure(self) -> tuple:
        return tuple(reversed(self.structure))

    def compose(self, other: "EncodingCircuit") -> "EncodingCircuit":
        """Append ``other`` (sharing feature and parameter index spaces)."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit-count mismatch")
        return EncodingCircuit(self.n_qubits, max(self.n_features, other.n_features),
                               max(self.n_params, other.n_params), self.ops + other.ops, self.name)

    def remove_parameters(self, indices, theta_fixed: float = 0.0) -> "EncodingCircuit":
        """New circuit with the listed parameters frozen at ``theta_fixed``.

        Gates depending on a removed parameter get a constant angle; the
        remaining parameters are renumbered in order.
        """
        drop = set(int(i) for i in indices)
        keep = [i for i in range(self.n_params) if i not in drop]
        renum = {old: new for new, old in enumerate(keep)}
        ops = []
        for op in self.ops:
            a = op.angle
            if a is not None:
                a = _freeze(a, drop, renum, theta_fixed)
            ops.append(Op(op.kind, op.qubits, a))
        return EncodingCircuit(self.n_qubits, self.n_features, len(keep), tuple(ops), self.name)

    # -- serialization -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_qubits": self.n_qubits,
            "n_features": self.n_features,
            "n_params": self.n_params,
            "ops": [{"kind": op.kind, "qubits": list(op.qubits),
                     "angle": None if op.angle is None else op.angle.to_dict()} for op in self.ops],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingCircuit":
        ops = tuple(Op(o["kind"], tuple(o["qubits"]), None if o["angle"] is None else AngleExpr(**o["angle"]))
                    for o in d["ops"])
        return cls(d["n_qubits"], d["n_features"], d["n_params"], ops, d.get("name", "circuit"))

    # -- display -------------------------------------------------------------------
    def draw(self) -> str:
        """Plain-text diagram, one row per qubit, gates in program order."""
        rows = [[f"q{q}: "] for q in range(self.n_qubits)]
        for op in self.ops:
            label = op.kind if op.angle is None else f"{op.kind}({op.angle.label()})"
            if len(op.qubits) == 1:
                cells = {op.qubits[0]: label}
            elif op.kind == "SWAP":
                cells = {op.qubits[0]: "x", op.qubits[1]: "x"}
            else:
                cells = {op.qubits[0]: "@", op.qubits[1]: label[1:] if op.kind != "CZ" else "@"}
            width = max(len(c) for c in cells.values()) + 2
            lo, hi = min(op.qubits), max(op.qubits)
            for q in range(self.n_qubits):
                if q in cells:
                    rows[q].append(f"-{cells[q]}-".ljust(width, "-"))
                elif lo < q < hi:
                    rows[q].append("-|-".ljust(width, "-"))
                else:
                    rows[q].append("-" * width)
        return "\n".join("".join(r) for r in rows)

    def __str__(self) -> str:
        return self.draw()


def _freeze(a: AngleExpr, drop: set, renum: dict, value: float) -> AngleExpr:
    sp = a.scale_param
    if a.source == "p" and a.index in drop:
        mapped = a.scale * float(map_derivative(a.map, np.array([value]))[0])
        if sp is None:
            return AngleExpr("c", 0, "id", mapped)
        if sp in drop:
            return AngleExpr("c", 0, "id", mapped * value)
        # constant mapped value times a surviving parameter
        return AngleExpr("p", renum[sp], "id", mapped)
    index = renum[a.index] if a.source == "p" else a.index
    if sp is not None and sp in drop:
        return AngleExpr(a.source, index, a.map, a.scale * value, None)
    return AngleExpr(a.source, index, a.map, a.scale, None if sp is None else renum[sp])


def identity_circuit(n_qubits: int, n_features: int = 1) -> EncodingCircuit:
    return EncodingCircuit(n_qubits, n_features, 0, (), "identity")
