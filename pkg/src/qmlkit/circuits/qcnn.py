"""Quantum convolutional neural network builder.

Pooling uses the deferred-measurement form: a controlled ``Ry`` from the
discarded qubit onto the kept one replaces measure-and-feedforward.  Both
convolution and pooling layers share their parameters across all qubit
pairs of the layer, so the parameter count grows with the number of
layers (logarithmic in the qubit count) rather than with the width.
"""

from __future__ import annotations

from functools import cached_property

from ..observables import PauliObservable, single
from .core import AngleExpr, EncodingCircuit, Op


class QCNN:
    """Record a sequence of QCNN steps and replay it into a circuit.

    >>> qc = QCNN(4, 2)
    >>> qc.convolution().pooling().repeat_layers().fully_connected()  # doctest: +ELLIPSIS
    <...>
    >>> qc.active
    [3]
    """

    def __init__(self, n_qubits: int, n_features: int = 1, n_layers: int = 1, recipe=()):
        if n_qubits < 1 or n_features < 1:
            raise ValueError("n_qubits and n_features must be >= 1")
        self.n_qubits = n_qubits
        self.n_features = n_features
        self.n_layers = n_layers  # unused by the layout; kept for a uniform hyperparameter surface
        self.steps: list[tuple[str, dict]] = []
        self.recipe: list[tuple[str, dict]] = []
        for name, kw in recipe:
            getattr(self, name)(**kw)

    # -- step recording ----------------------------------------------------------
    def _reset(self, name, kw=None):
        self.recipe.append((name, kw or {}))
        self.__dict__.pop("circuit", None)

    def convolution(self):
        self._replay_check([("convolution", {})])
        self.steps.append(("convolution", {}))
        self._reset("convolution")
        return self

    def pooling(self, measurement: bool = False):
        self._replay_check([("pooling", {"measurement": measurement})])
        self.steps.append(("pooling", {"measurement": measurement}))
        self._reset("pooling", {"measurement": measurement})
        return self

    def fully_connected(self):
        self.steps.append(("fully_connected", {}))
        self._reset("fully_connected")
        return self

    def repeat_layers(self):
        """Repeat the recorded steps until one qubit is left or a repetition fails."""
        block = [s for s in self.steps if s[0] in ("convolution", "pooling")]
        if not any(name == "pooling" for name, _ in block):
            raise ValueError("repeat_layers needs at least one pooling step to make progress")
        while len(self._active_after(self.steps)) > 1:
            try:
                self._replay_check(block)
            except ValueError:
                break
            self.steps.extend(block)
        self._reset("repeat_layers")
        return self

    def _replay_check(self, extra):
        self._layout(self.steps + list(extra))

    def _active_after(self, steps) -> list[int]:
        return self._layout(steps)[3]

    # -- layout ------------------------------------------------------------------------
    def _layout(self, steps):
        n = self.n_qubits
        ops = [Op("RY", (q,), AngleExpr("x", q % self.n_features)) for q in range(n)]
        active = list(range(n))
        k = 0
        for name, kw in steps:
            if name == "convolution":
                if len(active) < 2:
                    raise ValueError("convolution needs at least two active qubits")
                pairs = [(active[i], active[i + 1]) for i in range(0, len(active) - 1, 2)]
                pairs += [(active[i], active[i + 1]) for i in range(1, len(active) - 1, 2)]
                for a, b in pairs:
                    ops += [Op("RY", (a,), AngleExpr("p", k)), Op("RY", (b,), AngleExpr("p", k + 1)),
                            Op("CX", (a, b)),
                            Op("RY", (a,), AngleExpr("p", k + 2)), Op("RY", (b,), AngleExpr("p", k + 3))]
                k += 4
            elif name == "pooling":
                if len(active) < 2:
                    raise ValueError("pooling needs at least two active qubits")
                kept = []
                for i in range(0, len(active) - 1, 2):
                    gone, keep = active[i], active[i + 1]
                    ops.append(Op("CRY", (gone, keep), AngleExpr("p", k)))
                    kept.append(keep)
                if len(active) % 2:
                    kept.append(active[-1])
                active = kept
                k += 1
            elif name == "fully_connected":
                for q in active:
                    ops.append(Op("RX", (q,), AngleExpr("p", k)))
                    k += 1
                ops += [Op("CX", (active[i], active[i + 1])) for i in range(len(active) - 1)]
                for q in active:
                    ops.append(Op("RY", (q,), AngleExpr("p", k)))
                    k += 1
            else:
                raise ValueError(f"unknown QCNN step {name!r}")
        return ops, k, n, active

    @property
    def active(self) -> list[int]:
        return self._active_after(self.steps)

    @cached_property
    def circuit(self) -> EncodingCircuit:
        ops, k, n, _ = self._layout(self.steps)
        return EncodingCircuit(n, self.n_features, k, tuple(ops), "QCNN")

    def build(self) -> EncodingCircuit:
        return self.circuit

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def observable(self) -> PauliObservable:
        """Trainable ``b*I + sum a_q Z_q`` over the qubits still active."""
        n = self.n_qubits
        terms = [(0.0, "I" * n)] + [(1.0, single(n, "Z", q)) for q in self.active]
        return PauliObservable(n, tuple(terms), (True,) * len(terms))

    def replace(self, **changes) -> "QCNN":
        """Rebuild with new sizes by replaying the recorded builder calls."""
        kw = {"n_qubits": self.n_qubits, "n_features": self.n_features, "n_layers": self.n_layers}
        kw.update(changes)
        return QCNN(kw["n_qubits"], kw["n_features"], kw["n_layers"], recipe=list(self.recipe))

    def to_dict(self) -> dict:
        return {"family": "QCNN", "n_qubits": self.n_qubits, "n_features": self.n_features,
                "n_layers": self.n_layers, "recipe": [[n, kw] for n, kw in self.recipe]}

    @classmethod
    def from_dict(cls, d: dict) -> "QCNN":
        return cls(d["n_qubits"], d["n_features"], d.get("n_layers", 1),
                   recipe=[(n, dict(kw)) for n, kw in d["recipe"]])

    def __repr__(self):
        return f"<QCNN n_qubits={self.n_qubits} steps={[s for s, _ in self.steps]}>"
