from .gram import (
    GramMatrix, load_gram, mitigate_msplit, nll_grad, nll_loss, regularize, save_gram, target_alignment,
    target_alignment_grad,
)
from .optimize import KernelFitResult, kernel_loss, optimize_kernel
from .outer import OUTER_KERNELS, DotProduct, Gaussian, Matern, OuterKernel, RationalQuadratic, outer_kernel
from .quantum import FidelityKernel, ProjectedKernel, QuantumKernel, default_measurement, kernel_from_dict

__all__ = [
    "GramMatrix", "load_gram", "mitigate_msplit", "nll_grad", "nll_loss", "regularize", "save_gram",
    "target_alignment", "target_alignment_grad", "KernelFitResult", "kernel_loss", "optimize_kernel",
    "OUTER_KERNELS", "DotProduct", "Gaussian", "Matern", "OuterKernel", "RationalQuadratic", "outer_kernel",
    "FidelityKernel", "ProjectedKernel", "QuantumKernel", "default_measurement", "kernel_from_dict",
]
