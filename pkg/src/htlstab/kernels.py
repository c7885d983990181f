"""Kernels, Gram matrices and the kernel bound ``kappa``."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError

logger = logging.getLogger(__name__)

# inflation applied to data-witnessed kernel bounds of unbounded-domain kernels
KAPPA_INFLATION = 1.10


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    GAUSSIAN = "gaussian"
    POLYNOMIAL = "polynomial"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel description.

    Parameters used per kind: gaussian ``exp(-gamma |x - x'|^2)``; polynomial
    ``(x.x' + offset)^degree``; sigmoid ``tanh(scale x.x' + offset)``.
    ``kappa`` is the bound on ``k(x, x)``; ``None`` until supplied or estimated.
    """

    kind: KernelKind = KernelKind.GAUSSIAN
    gamma: float = 1.0
    degree: int = 2
    offset: float = 0.0
    scale: float = 1.0
    kappa: Optional[float] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.GAUSSIAN and not self.gamma > 0:
            raise ConfigError(f"gaussian kernel needs gamma > 0, got {self.gamma}")
        if self.kind is KernelKind.POLYNOMIAL and (int(self.degree) != self.degree or self.degree < 1):
            raise ConfigError(f"polynomial degree must be a positive integer, got {self.degree}")
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")

    @property
    def analytic_kappa(self) -> Optional[float]:
        if self.kind in (KernelKind.GAUSSIAN, KernelKind.SIGMOID):
            return 1.0
        return None

    def with_kappa(self, kappa: float) -> "KernelSpec":
        return replace(self, kappa=float(kappa))

    def __call__(self, a, b) -> np.ndarray:
        return cross_gram(self, a, b)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kind is KernelKind.GAUSSIAN:
            out["gamma"] = self.gamma
        elif self.kind is KernelKind.POLYNOMIAL:
            out.update(degree=int(self.degree), offset=self.offset)
        elif self.kind is KernelKind.SIGMOID:
            out.update(scale=self.scale, offset=self.offset)
        if self.kappa is not None:
            out["kappa"] = self.kappa
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        if isinstance(obj, str):
            obj = {"kind": obj}
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError(f"kernel entry must be a mapping with 'kind': {obj!r}")
        try:
            kind = KernelKind(obj["kind"])
        except ValueError:
            raise ConfigError(f"unknown kernel {obj['kind']!r}") from None
        kappa = obj.get("kappa")
        return cls(
            kind=kind,
            gamma=float(obj.get("gamma", 1.0)),
            degree=int(obj.get("degree", 2)),
            offset=float(obj.get("offset", 0.0)),
            scale=float(obj.get("scale", 1.0)),
            kappa=None if kappa is None else float(kappa),
        )


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, d) point set, got shape {np.shape(points)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point set contains non-finite entries")
    return x


def cross_gram(kernel: KernelSpec, a, b) -> np.ndarray:
    """Matrix ``K[i, j] = k(a_i, b_j)``."""
    a = _as_points(a)
    b = _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    kind = kernel.kind
    if kind is KernelKind.GAUSSIAN:
        return np.exp(-kernel.gamma * cdist(a, b, "sqeuclidean"))
    dot = a @ b.T
    if kind is KernelKind.LINEAR:
        return dot
    if kind is KernelKind.POLYNOMIAL:
        return (dot + kernel.offset) ** int(kernel.degree)
    return np.tanh(kernel.scale * dot + kernel.offset)


def gram(kernel: KernelSpec, points) -> np.ndarray:
    """Symmetric Gram matrix of ``points`` (shape ``(n, d)``)."""
    x = _as_points(points)
    g = cross_gram(kernel, x, x)
    g = 0.5 * (g + g.T)
    if kernel.kind is KernelKind.SIGMOID:
        _warn_if_indefinite(g)
    return g


def _warn_if_indefinite(g: np.ndarray) -> None:
    tol = 1e-8 * max(abs(np.trace(g)), 1.0)
    if np.linalg.eigvalsh(g)[0] < -tol:
        logger.warning("sigmoid Gram matrix is indefinite on this sample")


def kernel_diagonal(kernel: KernelSpec, points) -> np.ndarray:
    """``k(x_i, x_i)`` for every row, without forming the full Gram matrix."""
    x = _as_points(points)
    kind = kernel.kind
    if kind is KernelKind.GAUSSIAN:
        return np.ones(x.shape[0])
    sq = np.einsum("ij,ij->i", x, x)
    if kind is KernelKind.LINEAR:
        return sq
    if kind is KernelKind.POLYNOMIAL:
        return (sq + kernel.offset) ** int(kernel.degree)
    return np.tanh(kernel.scale * sq + kernel.offset)


def estimate_kappa(kernel: KernelSpec, sample) -> float:
    """Largest kernel value witnessed on ``sample`` (analytic value when known).

    For positive-definite kernels ``|k(x, x')| <= sqrt(k(x, x) k(x', x'))``, so the
    diagonal maximum is the pairwise maximum.
    """
    analytic = kernel.analytic_kappa
    if analytic is not None:
        return analytic
    return float(np.max(kernel_diagonal(kernel, sample)))


def resolve_kappa(kernel: KernelSpec, *samples) -> KernelSpec:
    """Return ``kernel`` with ``kappa`` filled in.

    A supplied kappa is kept. Otherwise the analytic bound is used, or the pooled
    sample maximum inflated by ``KAPPA_INFLATION``.
    """
    if kernel.kappa is not None:
        return kernel
    analytic = kernel.analytic_kappa
    if analytic is not None:
        return kernel.with_kappa(analytic)
    pooled = np.vstack([_as_points(s) for s in samples])
    kappa = KAPPA_INFLATION * estimate_kappa(kernel, pooled)
    if not kappa > 0 or not math.isfinite(kappa):
        raise ConfigError(f"could not estimate a positive kernel bound (got {kappa})")
    return kernel.with_kappa(kappa)
