from .base import Estimator, NotFittedError
from .kernel_heads import QGPR, QKRR, QSVC, QSVR, KernelHead
from .qnn_heads import QNNClassifier, QNNRegressor
from .smo import ConvergenceError, SmoResult, solve, svc_dual, svr_dual

__all__ = [
    "Estimator", "NotFittedError", "QGPR", "QKRR", "QSVC", "QSVR", "KernelHead", "QNNClassifier",
    "QNNRegressor", "ConvergenceError", "SmoResult", "solve", "svc_dual", "svr_dual",
]
