"""String DSL for layered encoding circuits.

Grammar::

    spec  := token ("-" token)*
    token := gate "(" arg ")" | gate
    gate  := rx | ry | rz | h | x | y | z | cx | cz | crx | cry | crz   (case-insensitive)
    arg   := x | p

Single-qubit tokens act on every qubit.  Two-qubit tokens act on the
nearest-neighbour chain ``(0,1), (1,2), ..., (n-2, n-1)``.  Feature slots
are filled round-robin across the whole circuit; every ``p`` is a fresh
parameter.  The token sequence is repeated ``n_layers`` times.
"""

from __future__ import annotations

import re

from .core import AngleExpr, EncodingCircuit, Op

_TOKEN = re.compile(r"^([a-z]+)(?:\(([a-z]+)\))?$")
_ANGLED = {"rx": "RX", "ry": "RY", "rz": "RZ", "crx": "CRX", "cry": "CRY", "crz": "CRZ"}
_FIXED = {"h": "H", "x": "X", "y": "Y", "z": "Z", "cx": "CX", "cz": "CZ"}


class DSLError(ValueError):
    pass


def _tokens(spec: str) -> list[tuple[str, str | None]]:
    if not spec or not spec.strip():
        raise DSLError("empty circuit specification")
    out = []
    for raw in spec.split("-"):
        tok = raw.strip().lower()
        m = _TOKEN.match(tok)
        if not m:
            raise DSLError(f"cannot parse token {raw!r}")
        gate, arg = m.groups()
        if gate in _ANGLED:
            if arg not in ("x", "p"):
                raise DSLError(f"token {raw!r} needs an argument x or p")
        elif gate in _FIXED:
            if arg is not None:
                raise DSLError(f"token {raw!r} takes no argument")
        else:
            raise DSLError(f"unknown gate in token {raw!r}")
        out.append((gate, arg))
    return out


def parse_layered(spec: str, n_qubits: int, n_features: int, n_layers: int = 1) -> EncodingCircuit:
    tokens = _tokens(spec)
    if n_layers < 0:
        raise DSLError("n_layers must be >= 0")
    ops: list[Op] = []
    feat = 0
    n_params = 0
    chain = [(q, q + 1) for q in range(n_qubits - 1)]
    for _ in range(n_layers):
        for gate, arg in tokens:
            kind = _ANGLED.get(gate) or _FIXED[gate]
            targets = [(q,) for q in range(n_qubits)] if len(kind) <= 2 and kind not in ("CX", "CZ") else chain
            for qs in targets:
                angle = None
                if arg == "x":
                    angle = AngleExpr("x", feat % n_features)
                    feat += 1
                elif arg == "p":
                    angle = AngleExpr("p", n_params)
                    n_params += 1
                ops.append(Op(kind, qs, angle))
    return EncodingCircuit(n_qubits, n_features, n_params, tuple(ops), f"layered[{spec}]")
