"""Margin-based surrogate losses and their stability functions.

Every loss is evaluated on the margin ``x = score * label``:

==============  =====================================
exponential     ``exp(-x)``
logistic        ``log(1 + exp(-x))``
mse             ``(1 - x)**2``
squared_hinge   ``max(0, 1 - x)**2``
softplus        ``s * log(1 + exp((1 - x) / s))``
==============  =====================================

``psi1`` / ``psi2`` turn the target risk of the source hypothesis into the
magnitude entering the hypothesis / pointwise-hypothesis stability parameters.
For logistic and softplus the ``psi2`` row carries a single ``(e^{sqrt x} - 1)``
factor; the derivation behind it picks up an additional ``e^{sqrt x}`` factor
at one step, which is not included here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DomainError

# exp() overflows IEEE doubles a little above 709
EXP_CLAMP = 700.0

UNBOUNDED = math.inf


class LossKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    LOGISTIC = "logistic"
    MSE = "mse"
    SQUARED_HINGE = "squared_hinge"
    SOFTPLUS = "softplus"


@dataclass(frozen=True)
class LossSpec:
    """A surrogate loss; ``s`` is the softplus temperature and ignored otherwise."""

    kind: LossKind
    s: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.SOFTPLUS and not self.s > 0:
            raise ConfigError(f"softplus temperature must be positive, got {self.s}")

    @property
    def name(self) -> str:
        return self.kind.value

    def to_dict(self) -> dict:
        if self.kind is LossKind.SOFTPLUS:
            return {"name": self.name, "s": self.s}
        return {"name": self.name}

    @classmethod
    def from_dict(cls, obj) -> "LossSpec":
        if isinstance(obj, str):
            obj = {"name": obj}
        if not isinstance(obj, dict) or "name" not in obj:
            raise ConfigError(f"loss entry must be a name or a mapping with 'name': {obj!r}")
        try:
            kind = LossKind(obj["name"])
        except ValueError:
            raise ConfigError(f"unknown loss {obj['name']!r}") from None
        return cls(kind, float(obj.get("s", 0.1)))

    # convenience so callers can write ``loss(m)`` / ``loss.grad(m)``
    def __call__(self, margin):
        return loss_value(self, margin)

    def grad(self, margin):
        return loss_derivative(self, margin)


ALL_LOSSES = (
    LossSpec(LossKind.EXPONENTIAL),
    LossSpec(LossKind.LOGISTIC),
    LossSpec(LossKind.MSE),
    LossSpec(LossKind.SQUARED_HINGE),
    LossSpec(LossKind.SOFTPLUS, 0.1),
)


def _check_finite(margin):
    x = np.asarray(margin, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("loss evaluated at a non-finite margin")
    return x


def _safe_exp(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(np.minimum(z, EXP_CLAMP))
    return np.where(z > EXP_CLAMP, np.inf, out)


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def loss_value(loss: LossSpec, margin):
    """Evaluate ``phi(margin)``; accepts scalars or arrays."""
    x = _check_finite(margin)
    kind = loss.kind
    if kind is LossKind.EXPONENTIAL:
        out = _safe_exp(-x)
    elif kind is LossKind.LOGISTIC:
        out = np.logaddexp(0.0, -x)
    elif kind is LossKind.MSE:
        out = (1.0 - x) ** 2
    elif kind is LossKind.SQUARED_HINGE:
        out = np.maximum(0.0, 1.0 - x) ** 2
    else:
        out = loss.s * np.logaddexp(0.0, (1.0 - x) / loss.s)
    return _unwrap(margin, out)


def loss_derivative(loss: LossSpec, margin):
    """Evaluate ``phi'(margin)``; continuous everywhere, 0 at the squared-hinge kink."""
    x = _check_finite(margin)
    kind = loss.kind
    if kind is LossKind.EXPONENTIAL:
        out = -_safe_exp(-x)
    elif kind is LossKind.LOGISTIC:
        out = -expit(-x)
    elif kind is LossKind.MSE:
        out = -2.0 * (1.0 - x)
    elif kind is LossKind.SQUARED_HINGE:
        out = -2.0 * np.maximum(0.0, 1.0 - x)
    else:
        out = -expit((1.0 - x) / loss.s)
    return _unwrap(margin, out)


def derivative_sup(loss: LossSpec) -> float:
    """``sup |phi'|``: 1 for logistic/softplus, ``UNBOUNDED`` (inf) otherwise."""
    if loss.kind in (LossKind.LOGISTIC, LossKind.SOFTPLUS):
        return 1.0
    return UNBOUNDED


def exp_moment_constant(alpha: float, m_s: float, n: int) -> float:
    """``C_S = exp(2 + 2 alpha M_S / n + 4 alpha^2 M_S^2 / (n - 1))``."""
    return _exp_or_inf(_log_c_s(alpha, m_s, n))


def _log_c_s(alpha: float, m_s: float, n: int) -> float:
    if n < 2:
        raise ConfigError(f"C_S needs n >= 2, got n={n}")
    return 2.0 + 2.0 * alpha * m_s / n + 4.0 * alpha**2 * m_s**2 / (n - 1)


def _exp_or_inf(z: float) -> float:
    return math.inf if z > EXP_CLAMP else math.exp(z)


def _require(ctx, field):
    value = getattr(ctx, field, None)
    if value is None:
        raise ConfigError(f"bound context is missing {field!r}")
    return value


def _log_expm1(z: float) -> float:
    # log(e^z - 1) for z > 0 without overflow
    return z + math.log(-math.expm1(-z)) if z > 1.0 else math.log(math.expm1(z))


def _psi(loss: LossSpec, x: float, ctx, power: int) -> float:
    if x < 0:
        raise DomainError(f"psi is defined for non-negative risk, got {x}")
    alpha = _require(ctx, "alpha")
    kind = loss.kind
    if x == 0:
        return 0.0
    if kind in (LossKind.MSE, LossKind.SQUARED_HINGE):
        return 8.0 * x * (4.0 * alpha + 1.0)
    # the rows are products of C_S, powers of x and exponentials; sum their logs so
    # a huge C_S times a tiny x neither overflows nor turns into inf * 0
    log_value = _log_c_s(alpha, _require(ctx, "m_s"), _require(ctx, "n")) + 2.0 * alpha * x
    if kind is LossKind.EXPONENTIAL:
        if power == 2:
            log_value += 2.0 * math.log(x)
        else:
            m_s = _require(ctx, "m_s")
            if m_s == 0:
                return 0.0
            log_value += math.log(m_s) + math.log(x)
    else:
        root = math.sqrt(x) if kind is LossKind.LOGISTIC else math.sqrt(x / loss.s)
        log_value += power * _log_expm1(root)
    return _exp_or_inf(log_value)


def psi1(loss: LossSpec, x: float, ctx) -> float:
    """Hypothesis-stability function evaluated at source risk ``x``.

    ``ctx`` needs ``alpha``, and ``m_s`` / ``n`` for every row involving ``C_S``.
    """
    return _psi(loss, x, ctx, 2)


def psi2(loss: LossSpec, x: float, ctx) -> float:
    """Pointwise-hypothesis-stability counterpart of :func:`psi1`."""
    return _psi(loss, x, ctx, 1)
