"""Dense statevector simulator.

Qubit 0 is the least-significant bit of the basis-state index.  Bitstrings
are written most-significant qubit first, so ``"01"`` on two qubits means
qubit 0 is in ``|1>``.

The workhorse is :func:`run_ops`, which pushes a *batch* of states through
one gate structure with per-row rotation angles.  All shifted circuits of a
parameter-shift derivative share a structure, so a whole gradient is a
single batched simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ROTATIONS = frozenset({"RX", "RY", "RZ"})
CONTROLLED_ROTATIONS = frozenset({"CRX", "CRY", "CRZ"})
ANGLED = ROTATIONS | CONTROLLED_ROTATIONS
FIXED_1Q = frozenset({"H", "X", "Y", "Z"})
FIXED_2Q = frozenset({"CX", "CZ", "SWAP"})
GATE_KINDS = ANGLED | FIXED_1Q | FIXED_2Q

_SQ2 = 1.0 / np.sqrt(2.0)
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI = {"I": np.eye(2, dtype=complex), **{k: _FIXED[k] for k in "XYZ"}}


def n_qubits_of(kind: str) -> int:
    return 1 if kind in ROTATIONS or kind in FIXED_1Q else 2


@dataclass(frozen=True)
class Gate:
    """A concrete gate: ``targets`` lists control first for two-qubit kinds."""

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != n_qubits_of(self.kind):
            raise ValueError(f"{self.kind} acts on {n_qubits_of(self.kind)} qubit(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated target in {self.targets}")
        if self.kind in ANGLED and self.angle is None:
            raise ValueError(f"{self.kind} needs an angle")
        if self.kind not in ANGLED and self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")

    def inverse(self) -> "Gate":
        if self.kind in ANGLED:
            return Gate(self.kind, self.targets, -self.angle)
        return self


def rotation_matrices(kind: str, angles: np.ndarray) -> np.ndarray:
    """Stack of 2x2 rotation matrices exp(-i a P / 2), shape (B, 2, 2)."""
    a = np.asarray(angles, dtype=float) / 2.0
    c, s = np.cos(a), np.sin(a)
    out = np.zeros(a.shape + (2, 2), dtype=complex)
    axis = kind[-1]
    if axis == "X":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif axis == "Y":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    else:
        out[..., 0, 0] = c - 1j * s
        out[..., 1, 1] = c + 1j * s
    return out


def _rotation_derivatives(kind: str, angles: np.ndarray) -> np.ndarray:
    # d/da exp(-i a P/2) = -i/2 P exp(-i a P/2)
    P = _FIXED[kind[-1]]
    return -0.5j * np.einsum("ij,bjk->bik", P, rotation_matrices(kind, angles))


def _apply_1q(psi: np.ndarray, U: np.ndarray, axis: int) -> np.ndarray:
    psi = np.moveaxis(psi, axis, -1)
    if U.ndim == 2:
        out = psi @ U.T
    else:
        out = np.einsum("b...j,bij->b...i", psi, U)
    return np.moveaxis(out, -1, axis)


def _slice(ndim: int, axis: int, value: int) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = value
    return tuple(idx)


def apply_op(
    psi: np.ndarray,
    kind: str,
    targets: Sequence[int],
    angles: np.ndarray | None = None,
    derivative: bool = False,
) -> np.ndarray:
    """Apply one gate to a batch tensor of shape ``(B, 2, ..., 2)``.

    ``angles`` has one entry per batch row.  With ``derivative=True`` the
    (non-unitary) derivative of the gate with respect to its angle is
    applied instead; used for exact state derivatives.
    """
    n = psi.ndim - 1
    ax = [n - q for q in targets]
    if kind in ROTATIONS:
        U = _rotation_derivatives(kind, angles) if derivative else rotation_matrices(kind, angles)
        return _apply_1q(psi, U, ax[0])
    if kind in FIXED_1Q:
        return _apply_1q(psi, _FIXED[kind], ax[0])
    if kind == "SWAP":
        return np.swapaxes(psi, ax[0], ax[1]).copy()
    c_ax, t_ax = ax
    on = _slice(psi.ndim, c_ax, 1)
    sub = psi[on]
    # target axis index inside the control=1 slice
    t_sub = t_ax - 1 if t_ax > c_ax else t_ax
    if kind == "CX":
        new = _apply_1q(sub, _FIXED["X"], t_sub)
    elif kind == "CZ":
        new = _apply_1q(sub, _FIXED["Z"], t_sub)
    else:
        base = kind[1:]
        U = _rotation_derivatives(base, angles) if derivative else rotation_matrices(base, angles)
        new = _apply_1q(sub, U, t_sub)
    out = psi.copy()
    out[on] = new
    if derivative:
        out[_slice(psi.ndim, c_ax, 0)] = 0.0
    return out


def zero_states(n_qubits: int, batch: int) -> np.ndarray:
    psi = np.zeros((batch,) + (2,) * n_qubits, dtype=complex)
    psi[(slice(None),) + (0,) * n_qubits] = 1.0
    return psi


def run_ops(
    n_qubits: int,
    ops: Sequence[tuple[str, tuple[int, ...]]],
    angles: np.ndarray,
    initial: np.ndarray | None = None,
    derivative_at: int | None = None,
) -> np.ndarray:
    """Simulate a gate structure for a batch of angle rows.

    ``ops`` lists ``(kind, targets)``; angled kinds consume the next column
    of ``angles`` (shape ``(B, n_angled)``).  Returns amplitudes of shape
    ``(B, 2**n)`` indexed with qubit 0 as least-significant bit.
    ``derivative_at`` selects an angled op (by column) to be replaced by its
    angle derivative.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    B = angles.shape[0]
    if initial is None:
        psi = zero_states(n_qubits, B)
    else:
        psi = np.asarray(initial, dtype=complex).reshape((B,) + (2,) * n_qubits).copy()
    col = 0
    for kind, targets in ops:
        if kind in ANGLED:
            psi = apply_op(psi, kind, targets, angles[:, col], derivative=(col == derivative_at))
            col += 1
        else:
            psi = apply_op(psi, kind, targets)
    if col != angles.shape[1]:
        raise ValueError(f"structure has {col} angled gates, got {angles.shape[1]} angles per row")
    return psi.reshape(B, 2**n_qubits)


# ----------------------------------------------------------------------------
# Pauli-string expectation values on amplitude batches


def pauli_masks(string: str) -> tuple[int, int, int]:
    """(x-mask, z-mask, number of Y) for a most-significant-first string."""
    n = len(string)
    x = z = ny = 0
    for pos, ch in enumerate(string):
        q = n - 1 - pos
        if ch in "XY":
            x |= 1 << q
        if ch in "ZY":
            z |= 1 << q
        if ch == "Y":
            ny += 1
        if ch not in "IXYZ":
            raise ValueError(f"illegal Pauli letter {ch!r}")
    return x, z, ny


def pauli_expectations(amps: np.ndarray, strings: Sequence[str]) -> np.ndarray:
    """Exact <psi|P|psi> for each row of ``amps`` and each string; (B, S)."""
    amps = np.atleast_2d(amps)
    dim = amps.shape[1]
    idx = np.arange(dim)
    out = np.empty((amps.shape[0], len(strings)))
    for k, s in enumerate(strings):
        x, z, ny = pauli_masks(s)
        sign = 1.0 - 2.0 * (np.bitwise_count(idx & z) & 1)
        # P|b> = i^ny (-1)^{b.z} |b ^ x>
        val = (1j**ny) * np.sum(np.conj(amps[:, idx ^ x]) * sign * amps, axis=1)
        out[:, k] = val.real
    return out


def probabilities(amps: np.ndarray) -> np.ndarray:
    p = np.abs(np.atleast_2d(amps)) ** 2
    return p / p.sum(axis=1, keepdims=True)


def depolarize(probs: np.ndarray, p: float) -> np.ndarray:
    """Mix a measurement distribution with the uniform one."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {p}")
    probs = np.asarray(probs, dtype=float)
    return (1.0 - p) * probs + p / probs.shape[-1]


def basis_rotation(amps: np.ndarray, basis: str) -> np.ndarray:
    """Rotate so that measuring Z afterwards measures ``basis`` letters.

    ``basis`` is most-significant first over {I, X, Y, Z}; X qubits get H,
    Y qubits get H.S^dagger.
    """
    n = len(basis)
    B = amps.shape[0]
    psi = amps.reshape((B,) + (2,) * n)
    hs = _FIXED["H"] @ np.diag([1, -1j])
    for pos, ch in enumerate(basis):
        q = n - 1 - pos
        if ch == "X":
            psi = _apply_1q(psi, _FIXED["H"], n - q)
        elif ch == "Y":
            psi = _apply_1q(psi, hs, n - q)
    return psi.reshape(B, 2**n)


# ----------------------------------------------------------------------------
# Single-state API


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        if self.n_qubits < 1 or amps.size != 2**self.n_qubits:
            raise ValueError(f"need 2**{self.n_qubits} amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class ShotResult:
    counts: dict
    shots: int
    seed: int


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    if max(gate.targets) >= state.n_qubits or min(gate.targets) < 0:
        raise ValueError(f"gate targets {gate.targets} out of range for {state.n_qubits} qubits")
    psi = state.amplitudes.reshape((1,) + (2,) * state.n_qubits)
    ang = None if gate.angle is None else np.array([gate.angle])
    out = apply_op(psi, gate.kind, gate.targets, ang)
    return StateVector(state.n_qubits, out.ravel())


def apply_gates(state: StateVector, gates: Iterable[Gate]) -> StateVector:
    for g in gates:
        state = apply_gate(state, g)
    return state


def expectation(state: StateVector, observable) -> float:
    """<psi|O|psi> for a :class:`~qmlkit.observables.PauliObservable`."""
    if observable.n_qubits != state.n_qubits:
        raise ValueError(f"observable acts on {observable.n_qubits} qubits, state has {state.n_qubits}")
    strings = [s for _, s in observable.terms]
    if not strings:
        return 0.0
    vals = pauli_expectations(state.amplitudes[None, :], strings)[0]
    return float(np.dot([c for c, _ in observable.terms], vals))


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial histogram over basis indices."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return rng.multinomial(int(shots), p / p.sum())


def sample(state: StateVector, shots: int, seed: int) -> ShotResult:
    hist = sample_counts(state.probabilities(), shots, make_rng(seed))
    n = state.n_qubits
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(hist) if c}
    return ShotResult(counts, int(shots), seed)


def overlap_sq(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise ValueError("states have different qubit counts")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def apply_depolarizing(state_or_probs, p: float) -> np.ndarray:
    probs = state_or_probs.probabilities() if isinstance(state_or_probs, StateVector) else state_or_probs
    return depolarize(probs, p)
