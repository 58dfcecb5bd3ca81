"""Predefined encoding-circuit families.

Each family is a small frozen dataclass holding its hyperparameters; the
concrete :class:`EncodingCircuit` is rebuilt from them on demand, so
changing ``n_qubits`` or ``n_layers`` (via :meth:`Family.replace`) yields a
circuit with a consistent parameter count.

Layouts (per layer unless stated otherwise):

``YzCx``
    ``Ry(t_i * x_j)`` then ``Rz(t'_i * x_j)`` on each qubit ``i`` with
    ``j = i mod d``, then a CX chain.  ``K = 2 n L``.
``ChebyshevPQC``
    ``Rx(p)`` on each qubit, ``Ry(t_i * arccos(x_j))`` on each qubit, then
    a CX ring; a final ``Rx(p)`` closing layer follows the last layer.
    ``K = 2 n L + n``.  Features must lie in ``[-1, 1]``.
``HighDim``
    Hadamards on all qubits, then per layer ``ceil(d / n)`` rotation
    sublayers alternating ``Rz``/``Ry`` that place features round-robin,
    each followed by a CX chain.  No trainable parameters.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import cached_property

from .core import AngleExpr, EncodingCircuit, Op
from .dsl import parse_layered


def cx_chain(n_qubits: int) -> list[Op]:
    return [Op("CX", (q, q + 1)) for q in range(n_qubits - 1)]


def cx_ring(n_qubits: int) -> list[Op]:
    ops = cx_chain(n_qubits)
    if n_qubits > 2:
        ops.append(Op("CX", (n_qubits - 1, 0)))
    return ops


@dataclass(frozen=True)
class Family:
    n_qubits: int
    n_features: int = 1
    n_layers: int = 1

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_features < 1 or self.n_layers < 0:
            raise ValueError(f"invalid sizes for {type(self).__name__}: {self}")

    def replace(self, **changes) -> "Family":
        return dataclasses.replace(self, **changes)

    @cached_property
    def circuit(self) -> EncodingCircuit:
        return self.build()

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def build(self) -> EncodingCircuit:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": type(self).__name__, **dataclasses.asdict(self)}


@dataclass(frozen=True)
class YzCx(Family):
    def build(self) -> EncodingCircuit:
        n, d = self.n_qubits, self.n_features
        ops: list[Op] = []
        k = 0
        for _ in range(self.n_layers):
            for q in range(n):
                ops.append(Op("RY", (q,), AngleExpr("x", q % d, scale_param=k)))
                k += 1
            for q in range(n):
                ops.append(Op("RZ", (q,), AngleExpr("x", q % d, scale_param=k)))
                k += 1
            ops += cx_chain(n)
        return EncodingCircuit(n, d, k, tuple(ops), "YzCx")


@dataclass(frozen=True)
class ChebyshevPQC(Family):
    def build(self) -> EncodingCircuit:
        n, d = self.n_qubits, self.n_features
        ops: list[Op] = []
        k = 0
        for _ in range(self.n_layers):
            for q in range(n):
                ops.append(Op("RX", (q,), AngleExpr("p", k)))
                k += 1
            for q in range(n):
                ops.append(Op("RY", (q,), AngleExpr("x", q % d, "arccos", scale_param=k)))
                k += 1
            ops += cx_ring(n)
        if self.n_layers:
            for q in range(n):
                ops.append(Op("RX", (q,), AngleExpr("p", k)))
                k += 1
        return EncodingCircuit(n, d, k, tuple(ops), "ChebyshevPQC")


@dataclass(frozen=True)
class HighDim(Family):
    def build(self) -> EncodingCircuit:
        n, d = self.n_qubits, self.n_features
        ops: list[Op] = [Op("H", (q,)) for q in range(n)]
        feat = 0
        sub = 0
        for _ in range(self.n_layers):
            for _ in range(max(1, math.ceil(d / n))):
                kind = "RZ" if sub % 2 == 0 else "RY"
                for q in range(n):
                    ops.append(Op(kind, (q,), AngleExpr("x", feat % d)))
                    feat += 1
                ops += cx_chain(n)
                sub += 1
        return EncodingCircuit(n, d, 0, tuple(ops), "HighDim")


@dataclass(frozen=True)
class Layered(Family):
    """Circuit from the string DSL, e.g. ``Layered("Ry(x)-Rz(x)-Rx(p)-cx", 4, 3, 2)``."""

    spec: str = "Ry(x)"

    def __init__(self, spec: str, n_qubits: int, n_features: int = 1, n_layers: int = 1):
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "n_qubits", n_qubits)
        object.__setattr__(self, "n_features", n_features)
        object.__setattr__(self, "n_layers", n_layers)
        self.__post_init__()
        parse_layered(spec, 1, 1, 0)  # validate tokens eagerly

    def build(self) -> EncodingCircuit:
        return parse_layered(self.spec, self.n_qubits, self.n_features, self.n_layers)


FAMILIES = {cls.__name__: cls for cls in (YzCx, ChebyshevPQC, HighDim, Layered)}


def builtin(family: str, n_qubits: int, n_features: int, n_layers: int) -> EncodingCircuit:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown circuit family {family!r}; choose from {sorted(FAMILIES)}") from None
    return cls(n_qubits, n_features, n_layers).circuit


def family_from_dict(d: dict) -> Family:
    d = dict(d)
    name = d.pop("family")
    if name == "QCNN":
        from .qcnn import QCNN

        return QCNN.from_dict(d)
    cls = FAMILIES[name]
    return cls(**d)
