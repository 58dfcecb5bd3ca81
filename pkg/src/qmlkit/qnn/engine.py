"""QNN evaluation and parameter-shift differentiation.

A QNN pairs an :class:`EncodingCircuit` with one or more Pauli-sum
observables; output ``o`` is ``f_o(x) = sum_s C[o, s] <P_s>``.  Everything
quantum reduces to Pauli-string expectation values of (shifted) circuits,
which are requested from the executor in one batched job per call.

Shift rules per gate angle ``a`` (offsets in units of pi/2):

* ``RX/RY/RZ``: ``df/da = 1/2 [f(a + pi/2) - f(a - pi/2)]``
* ``CRX/CRY/CRZ`` (generator spectrum {0, +-1/2}): the four-term rule
  ``c1 [f(a + pi/2) - f(a - pi/2)] - c2 [f(a + 3pi/2) - f(a - 3pi/2)]``
  with ``c1 = (sqrt2 + 1) / (4 sqrt2)`` and ``c2 = (sqrt2 - 1) / (4 sqrt2)``.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Sequence

import numpy as np

from .. import state as sv
from ..circuits import EncodingCircuit
from ..executor import Executor, Job
from ..observables import PauliObservable, commute, pauli_product

_C1 = (np.sqrt(2) + 1) / (4 * np.sqrt(2))
_C2 = (np.sqrt(2) - 1) / (4 * np.sqrt(2))
SHIFT_RULES = {
    **{k: ((1, 0.5), (-1, -0.5)) for k in sv.ROTATIONS},
    **{k: ((1, _C1), (-1, -_C1), (3, -_C2), (-3, _C2)) for k in sv.CONTROLLED_ROTATIONS},
}


def shift_gradient(
    executor: Executor,
    n_qubits: int,
    structure: tuple,
    kinds: Sequence[str],
    angles: np.ndarray,
    jac: np.ndarray,
    measurement,
    shots_base=None,
    shots_shift=None,
    include_base: bool = True,
):
    """Values and first derivatives through an angle Jacobian.

    ``angles`` is ``(B, G)`` and ``jac`` is ``(B, G, K)`` (d angle / d
    variable).  Returns ``(values, grads)`` with ``values`` of shape
    ``(B, M)`` (or ``(B,)`` for the ``"zero"`` measurement) and ``grads``
    of shape ``(B, K, M)`` (or ``(B, K)``).  All shifted circuits are
    submitted as a single job.
    """
    B, G = angles.shape
    K = jac.shape[2]
    gates = [g for g in range(G) if np.any(jac[:, g, :] != 0.0)]
    blocks = [angles] if include_base else []
    weights = []
    for g in gates:
        for m, w in SHIFT_RULES[kinds[g]]:
            shifted = angles.copy()
            shifted[:, g] += m * np.pi / 2
            blocks.append(shifted)
            weights.append((g, w))
    if not blocks:
        return None, np.zeros((B, K) if measurement == "zero" else (B, K, len(measurement)))
    rows = np.concatenate(blocks, axis=0)
    shots = None
    if shots_base is not None or shots_shift is not None:
        sb = np.broadcast_to(shots_base if shots_base is not None else executor.backend.shots or 1, (B,))
        ss = np.broadcast_to(shots_shift if shots_shift is not None else sb, (B,))
        shots = np.concatenate(([sb] if include_base else []) + [ss] * len(weights))
    meas = measurement if measurement == "zero" else tuple(measurement)
    vals = executor.run(Job(n_qubits, tuple(structure), rows, meas, shots))
    vals = vals.reshape((len(blocks), B) + vals.shape[1:])
    off = 1 if include_base else 0
    base = vals[0] if include_base else None
    D = np.zeros((B, G) + vals.shape[2:])
    for i, (g, w) in enumerate(weights):
        D[:, g] += w * vals[off + i]
    if measurement == "zero":
        grads = np.einsum("bgk,bg->bk", jac, D)
    else:
        grads = np.einsum("bgk,bgs->bks", jac, D)
    return base, grads


class QNN:
    """Low-level QNN: ``f(x, theta, c)`` for a list of observables.

    ``c`` is the flat vector of trainable observable coefficients,
    concatenated over observables in order.
    """

    def __init__(self, circuit: EncodingCircuit, observables, executor: Executor | None = None):
        if isinstance(observables, PauliObservable):
            observables = [observables]
        self.circuit = circuit
        self.observables = list(observables)
        for obs in self.observables:
            if obs.n_qubits != circuit.n_qubits:
                raise ValueError(f"observable acts on {obs.n_qubits} qubits, circuit has {circuit.n_qubits}")
        self.executor = executor or Executor()
        strings: dict[str, int] = {}
        for obs in self.observables:
            for s in obs.strings:
                strings.setdefault(s, len(strings))
        self.strings = tuple(strings)
        self._col = strings
        self.coef_owner = []  # (output, column) per trainable coefficient
        for o, obs in enumerate(self.observables):
            for i in obs.trainable_indices:
                self.coef_owner.append((o, strings[obs.strings[i]]))
        self.kinds = tuple(op.kind for op in circuit.angled)

    # -- bookkeeping --------------------------------------------------------------------
    @property
    def n_outputs(self) -> int:
        return len(self.observables)

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    @property
    def n_coefs(self) -> int:
        return len(self.coef_owner)

    def initial_coefficients(self) -> np.ndarray:
        return np.concatenate([obs.trainable_values for obs in self.observables] + [np.zeros(0)])

    def coefficient_matrix(self, coef=None) -> np.ndarray:
        C = np.zeros((self.n_outputs, len(self.strings)))
        for o, obs in enumerate(self.observables):
            for c, s in obs.terms:
                C[o, self._col[s]] = c
        if coef is not None:
            coef = np.asarray(coef, dtype=float).ravel()
            if coef.size != self.n_coefs:
                raise ValueError(f"expected {self.n_coefs} observable coefficients, got {coef.size}")
            for (o, col), v in zip(self.coef_owner, coef):
                C[o, col] = v
        return C

    def bound_observables(self, coef=None) -> list[PauliObservable]:
        if coef is None:
            return list(self.observables)
        out, k = [], 0
        coef = np.asarray(coef, dtype=float).ravel()
        for obs in self.observables:
            out.append(obs.with_trainable_values(coef[k:k + obs.n_trainable]))
            k += obs.n_trainable
        return out

    def _check_theta(self, theta):
        theta = np.asarray(theta if theta is not None else np.zeros(0), dtype=float).ravel()
        if theta.size != self.n_params:
            raise ValueError(f"circuit has {self.n_params} parameters, got a vector of length {theta.size}")
        return theta

    def _X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            X = X.reshape(-1, 1) if self.circuit.n_features == 1 else X.reshape(1, -1)
        return X

    # -- evaluation ------------------------------------------------------------------------
    def expect(self, X, theta, strings: Sequence[str], shots=None) -> np.ndarray:
        X = self._X(X)
        theta = self._check_theta(theta)
        ang = self.circuit.angles(X, theta)
        return self.executor.run(Job(self.circuit.n_qubits, self.circuit.structure, ang, tuple(strings), shots))

    def evaluate(self, X, theta, coef=None, shots=None) -> np.ndarray:
        """Model outputs, shape ``(B, n_outputs)``."""
        E = self.expect(X, theta, self.strings, shots)
        return E @ self.coefficient_matrix(coef).T

    def variance_strings(self, coef=None):
        """Union string list and per-output ``<O^2>`` coefficient rows.

        Every commuting product ``P_j P_k`` is listed even when its weight is
        zero, so coefficient gradients of the variance stay available.
        """
        strings = dict(self._col)
        rows = []
        for obs in self.bound_observables(coef):
            c = obs.coefficients
            row: dict[str, float] = {}
            for j, k, ph, s in product_table(obs):
                strings.setdefault(s, len(strings))
                row[s] = row.get(s, 0.0) + ph * c[j] * c[k]
            rows.append(row)
        S2 = np.zeros((self.n_outputs, len(strings)))
        for o, row in enumerate(rows):
            for s, v in row.items():
                S2[o, strings[s]] = v
        return tuple(strings), S2

    def variance(self, X, theta, coef=None, shots=None) -> np.ndarray:
        """``<O^2> - <O>^2`` per output; O and O^2 share one measurement pass per basis."""
        strings, S2 = self.variance_strings(coef)
        E = self.expect(X, theta, strings, shots)
        C = np.zeros_like(S2)
        C[:, : len(self.strings)] = self.coefficient_matrix(coef)
        f = E @ C.T
        return E @ S2.T - f * f

    # -- fast first derivatives ---------------------------------------------------------------
    def string_gradients(self, X, theta, strings, wrt: str = "p", shots_base=None, shots_shift=None,
                         include_base=True):
        """``<P_s>`` and ``d<P_s>/d theta`` (or ``d/dx``); shapes (B, S), (B, K, S)."""
        X = self._X(X)
        theta = self._check_theta(theta)
        ang = self.circuit.angles(X, theta)
        jac = self.circuit.angle_jacobian(X, theta, wrt)
        return shift_gradient(self.executor, self.circuit.n_qubits, self.circuit.structure, self.kinds,
                              ang, jac, tuple(strings), shots_base, shots_shift, include_base)

    def gradient(self, X, theta, coef=None, wrt: str = "p"):
        """Jacobian of all outputs, ``(B, n_outputs, K)``, for ``wrt`` in p, x, c."""
        if wrt == "c":
            E = self.expect(X, theta, self.strings)
            out = np.zeros((E.shape[0], self.n_outputs, self.n_coefs))
            for k, (o, col) in enumerate(self.coef_owner):
                out[:, o, k] = E[:, col]
            return out
        _, dE = self.string_gradients(X, theta, self.strings, wrt)
        return np.einsum("bks,os->bok", dE, self.coefficient_matrix(coef))

    # -- arbitrary derivatives ------------------------------------------------------------------
    def derivative(self, X, theta, targets: Sequence[tuple[str, int]], coef=None) -> np.ndarray:
        """Mixed partial derivative of every output, ``(B, n_outputs)``.

        ``targets`` lists differentiation variables ``("p", i)``,
        ``("x", j)`` or ``("c", k)``; its length is the derivative order.
        Circuit derivatives come from repeated parameter shifts; the
        product and chain rules account for parameters shared by several
        gates and for non-linear angle maps.
        """
        X = self._X(X)
        theta = self._check_theta(theta)
        for kind, i in targets:
            limit = {"p": self.n_params, "x": self.circuit.n_features, "c": self.n_coefs}.get(kind)
            if limit is None or not 0 <= i < limit:
                raise ValueError(f"invalid differentiation target {(kind, i)}")
        terms = {((), (), None): 1.0}
        for t in targets:
            terms = self._differentiate(terms, t)
        return self._evaluate_terms(terms, X, theta, coef)

    def _differentiate(self, terms, t):
        out: dict = defaultdict(float)
        angled = self.circuit.angled
        for (factors, shifts, obs), w in terms.items():
            if t[0] == "c":
                if obs is None:
                    out[factors, shifts, t[1]] += w
                continue
            # product rule on existing chain factors
            for i, (g, tg) in enumerate(factors):
                new_t = tuple(sorted(tg + (t,)))
                if _structurally_nonzero(angled[g].angle, new_t):
                    nf = tuple(sorted(factors[:i] + ((g, new_t),) + factors[i + 1:]))
                    out[nf, shifts, obs] += w
            # differentiate the circuit through each gate depending on t
            for g, op in enumerate(angled):
                if not op.angle.depends_on(t):
                    continue
                nf = tuple(sorted(factors + ((g, (t,)),)))
                sd = dict(shifts)
                for m, wr in SHIFT_RULES[op.kind]:
                    s2 = dict(sd)
                    s2[g] = s2.get(g, 0) + m
                    key = tuple(sorted((k, v) for k, v in s2.items() if v))
                    out[nf, key, obs] += w * wr
        return {k: v for k, v in out.items() if v != 0.0}

    def _evaluate_terms(self, terms, X, theta, coef):
        B = X.shape[0]
        result = np.zeros((B, self.n_outputs))
        if not terms:
            return result
        shift_keys = sorted({s for _, s, _ in terms})
        index = {s: u for u, s in enumerate(shift_keys)}
        base = self.circuit.angles(X, theta)
        rows = np.repeat(base[None], len(shift_keys), axis=0)
        for u, s in enumerate(shift_keys):
            for g, m in s:
                rows[u, :, g] += m * np.pi / 2
        E = self.executor.run(Job(self.circuit.n_qubits, self.circuit.structure,
                                  rows.reshape(-1, base.shape[1]), self.strings))
        E = E.reshape(len(shift_keys), B, len(self.strings))
        C = self.coefficient_matrix(coef)
        factor_cache: dict = {}
        for (factors, shifts, obs), w in terms.items():
            val = np.full(B, w)
            for f in factors:
                if f not in factor_cache:
                    factor_cache[f] = self.circuit.angle_derivative(X, theta, f[0], f[1])
                val = val * factor_cache[f]
            Eu = E[index[shifts]]
            if obs is None:
                result += val[:, None] * (Eu @ C.T)
            else:
                o, col = self.coef_owner[obs]
                result[:, o] += val * Eu[:, col]
        return result


def _structurally_nonzero(angle, targets) -> bool:
    n_w = 0
    for t in targets:
        if angle.source != "c" and t == (angle.source, angle.index):
            continue
        if t == ("p", angle.scale_param):
            n_w += 1
            continue
        return False
    return n_w <= 1


def product_table(obs: PauliObservable):
    """Commuting pairs of terms: ``(j, k, phase, string)`` with ``P_j P_k = phase * string``."""
    out = []
    strings = obs.strings
    for j, a in enumerate(strings):
        for k, b in enumerate(strings):
            if commute(a, b):
                ph, s = pauli_product(a, b)
                out.append((j, k, float(ph.real), s))
    return out
