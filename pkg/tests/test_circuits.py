import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmlkit import state as sv
from qmlkit.circuits import (QCNN, AngleExpr, ChebyshevPQC, DomainError, DSLError, EncodingCircuit, HighDim,
                             Layered, Op, YzCx, builtin, detect_redundant, family_from_dict, map_derivative,
                             parse_layered, qfim, remove_redundant)
from qmlkit.executor import ExecutionPlan, Sampled

from .helpers import random_circuit


def feature_indices(circuit):
    return {op.angle.index for op in circuit.angled if op.angle.source == "x"}


# -- DSL -------------------------------------------------------------------------------------


def test_layered_gate_and_parameter_count():
    c = parse_layered("Ry(x)-Rz(x)-Rx(p)-cx", 4, 3, 2)
    assert len(c.ops) == 30
    assert c.n_params == 8
    assert c.gate_counts() == {"RY": 8, "RZ": 8, "RX": 8, "CX": 6}
    assert [op.qubits for op in c.ops if op.kind == "CX"][:3] == [(0, 1), (1, 2), (2, 3)]


def test_layered_features_round_robin():
    c = parse_layered("Ry(x)-Rz(x)", 4, 3, 1)
    idx = [op.angle.index for op in c.angled]
    assert idx == [0, 1, 2, 0, 1, 2, 0, 1]


def test_layered_zero_layers_is_identity():
    c = parse_layered("Ry(x)-cx", 3, 2, 0)
    assert c.ops == () and c.n_params == 0
    assert np.allclose(c.statevector([0.1, 0.2]).amplitudes, sv.StateVector.zero(3).amplitudes)


@pytest.mark.parametrize("spec", ["Rq(x)", "", "Ry(z)", "h(x)", "Ry"])
def test_layered_parse_errors(spec):
    with pytest.raises(DSLError):
        parse_layered(spec, 2, 1, 1)


def test_layered_error_names_token():
    with pytest.raises(DSLError, match="Rq"):
        parse_layered("Ry(x)-Rq(x)", 2, 1)


def test_layered_controlled_rotations_and_case():
    c = parse_layered("RY(X)-crz(p)-CZ", 3, 1, 1)
    assert c.gate_counts() == {"RY": 3, "CRZ": 2, "CZ": 2}
    assert c.n_params == 2


# -- built-in families ---------------------------------------------------------------------------


def test_yzcx_counts():
    c = builtin("YzCx", 5, 2, 2)
    assert c.gate_counts() == {"RY": 10, "RZ": 10, "CX": 8}
    assert c.n_params == 20
    assert all(op.angle.scale_param is not None for op in c.angled)


def test_chebyshev_uses_arccos_on_features():
    c = ChebyshevPQC(4, 1, 3).circuit
    feat = [op for op in c.angled if op.angle.source == "x"]
    assert feat and all(op.angle.map == "arccos" for op in feat)
    c.angles([0.5], np.zeros(c.n_params))
    with pytest.raises(DomainError):
        c.angles([1.5], np.zeros(c.n_params))


def test_highdim_covers_every_feature():
    c = HighDim(4, 23, 2).circuit
    assert feature_indices(c) == set(range(23))
    assert c.n_params == 0


def test_builtin_unknown_family():
    with pytest.raises(ValueError, match="unknown circuit family"):
        builtin("Nope", 2, 1, 1)


@pytest.mark.parametrize("fam", [YzCx(3, 2, 2), ChebyshevPQC(2, 1, 2), HighDim(3, 5, 1),
                                 Layered("Ry(x)-cx-Rz(p)", 3, 2, 2)])
def test_family_roundtrip_and_replace(fam):
    assert family_from_dict(fam.to_dict()) == fam
    bigger = fam.replace(n_layers=fam.n_layers + 1)
    assert bigger.circuit.n_params >= fam.circuit.n_params
    assert len(bigger.circuit.ops) > len(fam.circuit.ops)


def test_reconfigured_circuit_rejects_stale_theta():
    fam = YzCx(3, 1, 1)
    theta = np.zeros(fam.circuit.n_params)
    grown = fam.replace(n_layers=2)
    with pytest.raises(ValueError, match="parameters"):
        grown.circuit.angles([0.3], theta)


# -- IR validation ---------------------------------------------------------------------------------


def test_circuit_index_validation():
    with pytest.raises(ValueError, match="feature index"):
        EncodingCircuit(1, 1, 0, (Op("RX", (0,), AngleExpr("x", 1)),))
    with pytest.raises(ValueError, match="parameter index"):
        EncodingCircuit(1, 1, 1, (Op("RX", (0,), AngleExpr("p", 0, scale_param=3)),))
    with pytest.raises(ValueError, match="exceeds"):
        EncodingCircuit(1, 1, 0, (Op("H", (1,)),))
    with pytest.raises(ValueError):
        Op("H", (0,), AngleExpr("x"))
    with pytest.raises(ValueError):
        AngleExpr("x", 0, "log")


def test_angle_expression_values():
    X = np.array([[0.5, -0.2]])
    theta = np.array([2.0, 3.0])
    assert AngleExpr("x", 1, "square", 2.0).derivative(X, theta)[0] == pytest.approx(0.08)
    assert AngleExpr("x", 0, "arccos", 1.0, 1).derivative(X, theta)[0] == pytest.approx(3 * np.arccos(0.5))
    assert AngleExpr("p", 0, "arctan").derivative(X, theta)[0] == pytest.approx(np.arctan(2.0))
    assert AngleExpr("c", scale=0.7).derivative(X, theta)[0] == 0.7


@pytest.mark.parametrize("name", ["arccos", "arctan", "square", "id"])
def test_map_derivatives_match_finite_differences(name):
    u = np.array([-0.6, 0.1, 0.7])
    h = 1e-5
    for order in (1, 2, 3):
        fd = (map_derivative(name, u + h, order - 1) - map_derivative(name, u - h, order - 1)) / (2 * h)
        assert np.allclose(map_derivative(name, u, order), fd, rtol=1e-6, atol=1e-6)


def test_binding_is_deterministic_and_serializable():
    c = YzCx(3, 2, 2).circuit
    theta = np.linspace(-1, 1, c.n_params)
    assert c.bind([0.1, 0.4], theta) == c.bind([0.1, 0.4], theta)
    c2 = EncodingCircuit.from_dict(c.to_dict())
    assert c2 == c and c2.digest == c.digest


def test_draw_lists_every_qubit():
    text = parse_layered("H-Ry(x)-cx", 3, 1).draw()
    lines = text.splitlines()
    assert len(lines) == 3 and lines[0].startswith("q0:") and "RY(x0)" in text


def test_compose_and_remove_parameters():
    a = EncodingCircuit(1, 1, 2, (Op("RY", (0,), AngleExpr("p", 0)), Op("RZ", (0,), AngleExpr("p", 1))))
    frozen = a.remove_parameters([0], theta_fixed=0.0)
    assert frozen.n_params == 1
    assert frozen.angled[0].angle.source == "c"
    x = np.array([[0.0]])
    assert np.allclose(frozen.states(x, [0.4]), a.states(x, [0.0, 0.4]))
    both = a.compose(a)
    assert len(both.ops) == 4


# -- QCNN ---------------------------------------------------------------------------------------------


def test_qcnn_pooling_halves():
    qc = QCNN(4).convolution().pooling()
    assert len(qc.active) == 2
    qc.pooling()
    assert len(qc.active) == 1
    with pytest.raises(ValueError, match="pooling"):
        qc.pooling()


def test_qcnn_repeat_layers_on_eight_qubits():
    qc = QCNN(8).convolution().pooling().repeat_layers()
    pools = sum(1 for s, _ in qc.steps if s == "pooling")
    assert pools == 3 and len(qc.active) == 1
    assert qc.circuit.n_params == 3 * (4 + 1)
    small = QCNN(4).convolution().pooling().repeat_layers()
    assert small.circuit.n_params == 2 * (4 + 1)


def test_qcnn_measurement_pooling_uses_controlled_rotation_and_scoped_observable():
    qc = QCNN(4, 2).convolution().pooling(measurement=True).repeat_layers().fully_connected()
    assert "CRY" in qc.circuit.gate_counts()
    obs = qc.observable()
    assert obs.strings == ("IIII", "ZIII")
    assert qc.active == [3]


def test_qcnn_shares_convolution_parameters():
    c = QCNN(4).convolution().circuit
    p_idx = [op.angle.index for op in c.angled if op.angle.source == "p"]
    assert sorted(set(p_idx)) == [0, 1, 2, 3]
    assert len(p_idx) == 12


def test_qcnn_replace_replays_recipe():
    qc = QCNN(4, 2).convolution().pooling().repeat_layers().fully_connected()
    big = qc.replace(n_qubits=8)
    assert big.n_qubits == 8 and len(big.active) == 1
    assert QCNN.from_dict(qc.to_dict()).circuit == qc.circuit


# -- QFIM ------------------------------------------------------------------------------------------------


def test_qfim_rz_only_is_zero():
    c = EncodingCircuit(1, 1, 2, (Op("RZ", (0,), AngleExpr("p", 0)), Op("RZ", (0,), AngleExpr("p", 1))))
    r = qfim(c, [[0.0]], [0.3, -1.2])
    assert np.allclose(r.qfim, 0, atol=1e-14) and r.rank == 0


def test_qfim_single_ry_is_one():
    c = EncodingCircuit(1, 1, 1, (Op("RY", (0,), AngleExpr("p", 0)),))
    assert np.allclose(qfim(c, [[0.0]], [0.8]).qfim, [[1.0]], atol=1e-14)


def test_qfim_rejects_shot_backend():
    c = EncodingCircuit(1, 1, 1, (Op("RY", (0,), AngleExpr("p", 0)),))
    with pytest.raises(ValueError, match="exact"):
        qfim(c, [[0.0]], [0.1], plan=ExecutionPlan(Sampled(10)))


def fubini_study_fd(circuit, x, theta, h=1e-5):
    """Metric from central differences of the statevector."""
    def psi(t):
        return circuit.statevector(x, t).amplitudes

    p0 = psi(theta)
    d = []
    for k in range(circuit.n_params):
        e = np.zeros_like(theta)
        e[k] = h
        d.append((psi(theta + e) - psi(theta - e)) / (2 * h))
    d = np.array(d)
    G = d.conj() @ d.T
    v = d.conj() @ p0
    return 4 * np.real(G - np.outer(v, v.conj()))


@pytest.mark.parametrize("seed", range(8))
def test_qfim_matches_finite_difference_metric(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 3
    c = random_circuit(rng, n, 2, 4, 10)
    x = rng.uniform(-0.9, 0.9, (1, 2))
    theta = rng.uniform(-np.pi, np.pi, 4)
    F = qfim(c, x, theta).qfim
    assert np.allclose(F, F.T, atol=1e-10)
    assert np.linalg.eigvalsh(F).min() >= -1e-8
    assert np.allclose(F, fubini_study_fd(c, x, theta), atol=1e-6)


def test_redundant_rz_on_zero_state():
    c = EncodingCircuit(1, 1, 2, (Op("RZ", (0,), AngleExpr("p", 0)), Op("RY", (0,), AngleExpr("p", 1))))
    assert detect_redundant(c) == {0}


def test_redundant_consecutive_ry():
    c = EncodingCircuit(1, 1, 2, (Op("RY", (0,), AngleExpr("p", 0)), Op("RY", (0,), AngleExpr("p", 1))))
    red = detect_redundant(c)
    assert len(red) == 1 and red <= {0, 1}
    reduced, removed = remove_redundant(c)
    assert removed == red and reduced.n_params == 1


def test_full_rank_circuit_has_no_redundancy():
    ops = (Op("RY", (0,), AngleExpr("p", 0)), Op("RY", (1,), AngleExpr("p", 1)), Op("CX", (0, 1)),
           Op("RX", (0,), AngleExpr("p", 2)), Op("RY", (1,), AngleExpr("p", 3)))
    c = EncodingCircuit(2, 1, 4, ops)
    assert qfim(c, [[0.0]], [0.3, 1.1, -0.7, 2.0]).rank == 4
    assert detect_redundant(c) == set()


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 3))
def test_round_robin_completeness(n_qubits, n_features, n_layers):
    c = parse_layered("Ry(x)-Rz(x)", n_qubits, n_features, n_layers)
    slots = 2 * n_qubits * n_layers
    if slots >= n_features:
        assert feature_indices(c) == set(range(n_features))
