"""Pauli-sum observables with optionally trainable coefficients.

Pauli strings are written most-significant qubit first: the leftmost letter
acts on qubit ``n-1`` and the rightmost on qubit 0, matching the bitstring
convention of :mod:`qmlkit.state`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import state as sv

_DROP = 1e-14

# single-letter products: (a, b) -> (phase, letter)
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}


def pauli_product(a: str, b: str) -> tuple[complex, str]:
    """Multiply two Pauli strings: ``a @ b = phase * string``."""
    if len(a) != len(b):
        raise ValueError("Pauli strings differ in length")
    phase = 1 + 0j
    letters = []
    for p, q in zip(a, b):
        f, r = _MUL[p, q]
        phase *= f
        letters.append(r)
    return phase, "".join(letters)


def commute(a: str, b: str) -> bool:
    anti = sum(1 for p, q in zip(a, b) if p != "I" and q != "I" and p != q)
    return anti % 2 == 0


def _check_string(text: str, n_qubits: int) -> str:
    text = text.strip().upper()
    if len(text) != n_qubits:
        raise ValueError(f"Pauli string {text!r} has length {len(text)}, expected {n_qubits}")
    bad = set(text) - set("IXYZ")
    if bad:
        raise ValueError(f"illegal character(s) {sorted(bad)} in Pauli string {text!r}")
    return text


def single(n_qubits: int, letter: str, qubit: int) -> str:
    """String with ``letter`` on ``qubit`` and identity elsewhere."""
    chars = ["I"] * n_qubits
    chars[n_qubits - 1 - qubit] = letter
    return "".join(chars)


@dataclass(frozen=True)
class PauliObservable:
    """Weighted sum of Pauli strings.

    ``terms`` is a tuple of ``(coefficient, string)``; ``trainable`` flags
    which coefficients are free parameters of a model.
    """

    n_qubits: int
    terms: tuple
    trainable: tuple = ()

    def __post_init__(self):
        terms = tuple((float(c), _check_string(s, self.n_qubits)) for c, s in self.terms)
        trainable = tuple(bool(t) for t in self.trainable) or (False,) * len(terms)
        if len(trainable) != len(terms):
            raise ValueError("trainable mask length differs from number of terms")
        if len({s for _, s in terms}) != len(terms):
            raise ValueError("duplicate Pauli strings; use PauliObservable.from_terms to merge")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "trainable", trainable)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable, trainable: bool = False) -> "PauliObservable":
        """Merge duplicate strings and drop negligible coefficients."""
        merged: dict[str, float] = {}
        for c, s in terms:
            s = _check_string(s, n_qubits)
            merged[s] = merged.get(s, 0.0) + float(c)
        kept = [(c, s) for s, c in merged.items() if abs(c) >= _DROP]
        return cls(n_qubits, tuple(kept), (trainable,) * len(kept))

    # -- views ---------------------------------------------------------------
    @property
    def strings(self) -> tuple[str, ...]:
        return tuple(s for _, s in self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    @property
    def n_trainable(self) -> int:
        return sum(self.trainable)

    @property
    def trainable_values(self) -> np.ndarray:
        return self.coefficients[list(self.trainable_indices)]

    @property
    def trainable_indices(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.trainable) if t)

    def with_trainable_values(self, values: Sequence[float]) -> "PauliObservable":
        values = np.asarray(values, dtype=float).ravel()
        if values.size != self.n_trainable:
            raise ValueError(f"expected {self.n_trainable} coefficient values, got {values.size}")
        coefs = self.coefficients
        coefs[list(self.trainable_indices)] = values
        terms = tuple((float(c), s) for c, s in zip(coefs, self.strings))
        return PauliObservable(self.n_qubits, terms, self.trainable)

    def is_diagonal(self) -> bool:
        return all(set(s) <= {"I", "Z"} for s in self.strings)

    # -- algebra -------------------------------------------------------------
    def __add__(self, other: "PauliObservable") -> "PauliObservable":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit-count mismatch")
        return PauliObservable.from_terms(self.n_qubits, self.terms + other.terms)

    def __mul__(self, scalar: float) -> "PauliObservable":
        return PauliObservable.from_terms(self.n_qubits, [(scalar * c, s) for c, s in self.terms])

    __rmul__ = __mul__

    def __sub__(self, other: "PauliObservable") -> "PauliObservable":
        return self + (-1.0) * other

    def __matmul__(self, other: "PauliObservable") -> "PauliObservable":
        """Operator product; the result must be Hermitian (real coefficients)."""
        acc: dict[str, complex] = {}
        for ca, sa in self.terms:
            for cb, sb in other.terms:
                ph, s = pauli_product(sa, sb)
                acc[s] = acc.get(s, 0) + ca * cb * ph
        for s, c in acc.items():
            if abs(c.imag) > 1e-12:
                raise ValueError(f"product is not Hermitian: imaginary coefficient on {s}")
        return PauliObservable.from_terms(self.n_qubits, [(c.real, s) for s, c in acc.items()])

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, s in self.terms:
            m = np.array([[1.0 + 0j]])
            for ch in s:
                m = np.kron(m, sv.PAULI[ch])
            out += c * m
        return out

    def __str__(self) -> str:
        return " + ".join(f"{c:g}*{s}" for c, s in self.terms) or "0"


def parse_pauli(text: str, n_qubits: int) -> PauliObservable:
    """Single-term observable from a string such as ``"ZZZZ"``."""
    return PauliObservable(n_qubits, ((1.0, _check_string(text, n_qubits)),))


def summed_paulis(n_qubits: int, letter: str = "Z") -> PauliObservable:
    """``b*I + sum_i a_i P_i`` with all coefficients trainable, a_i = 1, b = 0."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    terms = [(0.0, "I" * n_qubits)]
    terms += [(1.0, single(n_qubits, letter, q)) for q in range(n_qubits)]
    return PauliObservable(n_qubits, tuple(terms), (True,) * len(terms))


def ising_hamiltonian(n_qubits: int) -> PauliObservable:
    """``b*I + sum_i a_i Z_i + sum_{i<j} J_ij Z_i Z_j`` over all pairs."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    terms = [(0.0, "I" * n_qubits)]
    terms += [(1.0, single(n_qubits, "Z", q)) for q in range(n_qubits)]
    for i, j in combinations(range(n_qubits), 2):
        chars = ["I"] * n_qubits
        chars[n_qubits - 1 - i] = chars[n_qubits - 1 - j] = "Z"
        terms.append((1.0, "".join(chars)))
    return PauliObservable(n_qubits, tuple(terms), (True,) * len(terms))


def square(obs: PauliObservable) -> PauliObservable:
    """Expand ``O @ O`` into a canonical Pauli sum."""
    return obs @ obs


def coefficient_gradient(obs: PauliObservable, state: sv.StateVector) -> np.ndarray:
    """d<O>/dc_k = <P_k> for each trainable coefficient."""
    idx = obs.trainable_indices
    if not idx:
        return np.zeros(0)
    strings = [obs.strings[i] for i in idx]
    return sv.pauli_expectations(state.amplitudes[None, :], strings)[0]


def measurement_groups(strings: Sequence[str]) -> list[tuple[str, list[int]]]:
    """Greedy qubit-wise commuting grouping.

    Returns ``(basis, members)`` pairs where ``basis`` has one letter per
    qubit (``I`` where unconstrained) and ``members`` index into
    ``strings``.  Identity strings are left out; they need no measurement.
    """
    groups: list[tuple[list[str], list[int]]] = []
    for k, s in enumerate(strings):
        if set(s) == {"I"}:
            continue
        for basis, members in groups:
            if all(b == "I" or c == "I" or b == c for b, c in zip(basis, s)):
                for pos, c in enumerate(s):
                    if c != "I":
                        basis[pos] = c
                members.append(k)
                break
        else:
            groups.append((list(s), [k]))
    return [("".join(b), m) for b, m in groups]
