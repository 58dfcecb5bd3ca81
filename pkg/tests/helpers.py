"""Shared builders for tests: random circuits and observables."""

from qmlkit.circuits import AngleExpr, EncodingCircuit, Op
from qmlkit.observables import PauliObservable

ROT = ("RX", "RY", "RZ")
CROT = ("CRX", "CRY", "CRZ")


def random_angle(rng, n_features, n_params, maps=("id", "arccos", "arctan", "square")):
    r = rng.random()
    if r < 0.45 and n_params:
        src, idx = "p", int(rng.integers(n_params))
    elif r < 0.85 and n_features:
        src, idx = "x", int(rng.integers(n_features))
    else:
        return AngleExpr("c", scale=float(rng.uniform(-2, 2)))
    m = str(rng.choice([m for m in maps if src == "x" or m != "arccos"]))
    sp = None
    if n_params and rng.random() < 0.3:
        sp = int(rng.integers(n_params))
        if src == "p" and sp == idx:
            sp = None
    return AngleExpr(src, idx, m, float(rng.choice([1.0, 0.5, -1.3])), sp)


def random_circuit(rng, n_qubits, n_features, n_params, n_gates, controlled=True, maps=None):
    ops = []
    kw = {} if maps is None else {"maps": maps}
    for _ in range(n_gates):
        r = rng.random()
        if n_qubits > 1 and r < 0.2:
            a, b = rng.choice(n_qubits, 2, replace=False)
            ops.append(Op(str(rng.choice(["CX", "CZ"])), (int(a), int(b))))
        elif n_qubits > 1 and controlled and r < 0.32:
            a, b = rng.choice(n_qubits, 2, replace=False)
            ops.append(Op(str(rng.choice(CROT)), (int(a), int(b)), random_angle(rng, n_features, n_params, **kw)))
        elif r < 0.37:
            ops.append(Op("H", (int(rng.integers(n_qubits)),)))
        else:
            ops.append(Op(str(rng.choice(ROT)), (int(rng.integers(n_qubits)),),
                          random_angle(rng, n_features, n_params, **kw)))
    # every parameter appears at least once
    for k in range(n_params):
        ops.append(Op(str(rng.choice(ROT)), (int(rng.integers(n_qubits)),), AngleExpr("p", k)))
    return EncodingCircuit(n_qubits, n_features, n_params, tuple(ops))


def random_observable(rng, n_qubits, n_terms=3, trainable=True):
    strings = set()
    while len(strings) < n_terms:
        strings.add("".join(rng.choice(list("IXYZ"), n_qubits)))
    terms = tuple((float(rng.normal()), s) for s in sorted(strings))
    return PauliObservable(n_qubits, terms, (trainable,) * n_terms)


def features_in_domain(rng, n):
    """Features inside [-0.9, 0.9], safe for every angle map."""
    return rng.uniform(-0.9, 0.9, n)
