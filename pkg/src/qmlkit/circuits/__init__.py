from .core import AngleExpr, DomainError, EncodingCircuit, Op, identity_circuit, map_derivative
from .dsl import DSLError, parse_layered
from .library import FAMILIES, ChebyshevPQC, Family, HighDim, Layered, YzCx, builtin, family_from_dict
from .qcnn import QCNN
from .qfim import QfimReport, detect_redundant, qfim, remove_redundant

__all__ = [
    "AngleExpr", "DomainError", "EncodingCircuit", "Op", "identity_circuit", "map_derivative",
    "DSLError", "parse_layered",
    "FAMILIES", "ChebyshevPQC", "Family", "HighDim", "Layered", "YzCx", "builtin", "family_from_dict",
    "QCNN", "QfimReport", "detect_redundant", "qfim", "remove_redundant",
]
