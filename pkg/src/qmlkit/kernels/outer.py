"""Classical outer kernels applied to projected-kernel feature vectors.

Each kernel maps feature matrices ``F1 (N, A)``, ``F2 (M, A)`` to a Gram
block ``(N, M)`` and provides the derivative of every entry with respect to
both feature vectors, used when training the circuit parameters.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _diff(F1, F2):
    return F1[:, None, :] - F2[None, :, :]


class OuterKernel:
    name = ""

    def __call__(self, F1, F2) -> np.ndarray:
        raise NotImplementedError

    def feature_grads(self, F1, F2) -> tuple[np.ndarray, np.ndarray]:
        """``(dK/dF1, dK/dF2)``, each ``(N, M, A)``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"name": self.name, **asdict(self)}


@dataclass(frozen=True)
class Gaussian(OuterKernel):
    """``exp(-gamma * ||f - f'||^2)``."""

    gamma: float = 1.0
    name = "gaussian"

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")

    def __call__(self, F1, F2):
        D = _diff(F1, F2)
        return np.exp(-self.gamma * np.einsum("nma,nma->nm", D, D))

    def feature_grads(self, F1, F2):
        D = _diff(F1, F2)
        K = np.exp(-self.gamma * np.einsum("nma,nma->nm", D, D))
        g = -2.0 * self.gamma * K[..., None] * D
        return g, -g


@dataclass(frozen=True)
class Matern(OuterKernel):
    """Matern family in closed form for ``nu`` in {0.5, 1.5, 2.5}."""

    nu: float = 1.5
    length_scale: float = 1.0
    name = "matern"

    def __post_init__(self):
        if self.nu not in (0.5, 1.5, 2.5):
            raise ValueError("nu must be one of 0.5, 1.5, 2.5")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be > 0")

    def _parts(self, F1, F2):
        D = _diff(F1, F2)
        r = np.sqrt(np.einsum("nma,nma->nm", D, D)) / self.length_scale
        return D, r

    def __call__(self, F1, F2):
        _, r = self._parts(F1, F2)
        if self.nu == 0.5:
            return np.exp(-r)
        if self.nu == 1.5:
            s = np.sqrt(3.0) * r
            return (1.0 + s) * np.exp(-s)
        s = np.sqrt(5.0) * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)

    def feature_grads(self, F1, F2):
        D, r = self._parts(F1, F2)
        ell2 = self.length_scale**2
        # coefficient c with dK/dF1 = c * D
        if self.nu == 0.5:
            with np.errstate(divide="ignore", invalid="ignore"):
                c = np.where(r > 0, -np.exp(-r) / (r * ell2), 0.0)
        elif self.nu == 1.5:
            c = -3.0 / ell2 * np.exp(-np.sqrt(3.0) * r)
        else:
            s = np.sqrt(5.0) * r
            c = -5.0 / (3.0 * ell2) * (1.0 + s) * np.exp(-s)
        g = c[..., None] * D
        return g, -g


@dataclass(frozen=True)
class RationalQuadratic(OuterKernel):
    """``(1 + ||f - f'||^2 / (2 alpha l^2))^(-alpha)``."""

    alpha: float = 1.0
    length_scale: float = 1.0
    name = "rational_quadratic"

    def __post_init__(self):
        if self.alpha <= 0 or self.length_scale <= 0:
            raise ValueError("alpha and length_scale must be > 0")

    def __call__(self, F1, F2):
        D = _diff(F1, F2)
        base = 1.0 + np.einsum("nma,nma->nm", D, D) / (2 * self.alpha * self.length_scale**2)
        return base ** (-self.alpha)

    def feature_grads(self, F1, F2):
        D = _diff(F1, F2)
        base = 1.0 + np.einsum("nma,nma->nm", D, D) / (2 * self.alpha * self.length_scale**2)
        g = -(base ** (-self.alpha - 1.0))[..., None] * D / self.length_scale**2
        return g, -g


@dataclass(frozen=True)
class DotProduct(OuterKernel):
    """``sigma0^2 + f . f'``."""

    sigma0: float = 1.0
    name = "dot_product"

    def __call__(self, F1, F2):
        return self.sigma0**2 + F1 @ F2.T

    def feature_grads(self, F1, F2):
        N, M = F1.shape[0], F2.shape[0]
        g1 = np.broadcast_to(F2[None, :, :], (N, M, F2.shape[1]))
        g2 = np.broadcast_to(F1[:, None, :], (N, M, F1.shape[1]))
        return g1, g2


OUTER_KERNELS = {k.name: k for k in (Gaussian, Matern, RationalQuadratic, DotProduct)}


def outer_kernel(name: str, **params) -> OuterKernel:
    try:
        cls = OUTER_KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown outer kernel {name!r}; choose from {sorted(OUTER_KERNELS)}") from None
    return cls(**params)


def outer_from_dict(d: dict) -> OuterKernel:
    d = dict(d)
    return outer_kernel(d.pop("name"), **d)
